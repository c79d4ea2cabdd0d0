"""Cross-validation harness for the classification experiment grid."""
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import embed
from .dataset import (
    N_CLASSES,
    AugmentationPlan,
    DesignMatrix,
    Standardizer,
    augmented_design_matrix,
    make_folds,
    standardize_apply,
    standardize_fit,
)
from .model import KnnModel, TrainConfig, knn_predict, load_knn, load_mlp, predict, save_knn, save_mlp, train
from .optim import LbfgsConfig

PREPS = ("GRAY", "GRH")
MODELS = ("MLP", "KNN")


@dataclass(frozen=True)
class ExperimentConfig:
    prep: str = "GRH"
    augment: bool = True
    reducer: str = "PCA"
    model: str = "MLP"
    hidden: int = 160
    k: int = 5
    folds: int = 5
    graph_knn: int = 5
    target_dim: object = 40
    pre_dim: object = 40
    ridge: float = 0.01
    lam: float = 1e-5
    C: float = 1.0
    max_iters: int = 500
    augment_seed: int = 0
    fold_seed: int = 0
    init_seed: int = 0

    def __post_init__(self):
        if self.prep not in PREPS:
            raise ValueError(f"prep must be one of {PREPS}")
        if self.reducer not in embed.METHODS:
            raise ValueError(f"reducer must be one of {embed.METHODS}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.hidden < 1 or self.k < 1 or self.folds < 2:
            raise ValueError("hidden and k must be positive, folds at least 2")

    @property
    def model_label(self):
        return f"NNs({self.hidden})" if self.model == "MLP" else f"k-NN (k={self.k})"

    @property
    def name(self):
        aug = "Y" if self.augment else "N"
        model = f"MLP{self.hidden}" if self.model == "MLP" else f"KNN{self.k}"
        return f"{self.prep}-{aug}-{self.reducer}-{model}"

    def train_config(self):
        return TrainConfig(lam=self.lam, C=self.C, seed=self.init_seed,
                           lbfgs=LbfgsConfig(max_iters=self.max_iters))

    def with_seed(self, seed):
        return replace(self, augment_seed=seed, fold_seed=seed, init_seed=seed)

    def to_dict(self):
        return {**asdict(self), "name": self.name}


def reference_grid(**overrides):
    """The ten rows of the reference results table, in table order.

    The GRAY baseline uses PCA as the table lists it; pass ``reducer="NONE"``
    on that row to run it without reduction.
    """
    rows = [
        dict(prep="GRAY", augment=False, reducer="PCA", hidden=160),
        dict(reducer="PCA"),
        dict(reducer="SLPP"),
        dict(reducer="NPE"),
        dict(reducer="SR"),
        dict(reducer="PCA", model="KNN", k=5),
        dict(augment=False, reducer="PCA", hidden=100),
        dict(augment=False, reducer="SLPP", hidden=100),
        dict(augment=False, reducer="SR", hidden=100),
        dict(augment=False, reducer="NPE", hidden=100),
    ]
    return [ExperimentConfig(**{**row, **overrides}) for row in rows]


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def accuracy(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("prediction and truth must be equal-length non-empty vectors")
    return float(np.mean(pred == truth))


def confusion_matrix(pred, truth, n_classes=N_CLASSES):
    """Counts with truth along rows and prediction along columns."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth differ in length")
    for name, v in (("prediction", pred), ("truth", truth)):
        if v.size and (v.min() < 0 or v.max() >= n_classes):
            raise ValueError(f"{name} label outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truth, pred), 1)
    return cm


# --------------------------------------------------------------------------
# one fold
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FoldArtifacts:
    """Everything fitted on one training split."""
    standardizer: object
    reducer: embed.EmbeddingModel
    scaler: object
    classifier: object
    model_kind: str

    def features(self, m):
        z = embed.transform(self.reducer, standardize_apply(self.standardizer, m))
        return standardize_apply(self.scaler, z)

    def predict(self, m):
        z = self.features(m)
        z = z.values if isinstance(z, DesignMatrix) else z
        if self.model_kind == "KNN":
            return knn_predict(self.classifier, z)
        return predict(self.classifier, z)


def fit_fold(train_m, cfg):
    """Fit standardizer, reducer, post-reduction scaler and classifier on training rows only."""
    std = standardize_fit(train_m)
    z = standardize_apply(std, train_m)
    reducer = embed.fit_reducer(cfg.reducer, z, knn=cfg.graph_knn, target_dim=cfg.target_dim,
                                ridge=cfg.ridge, pre_dim=cfg.pre_dim)
    z = embed.transform(reducer, z)
    scaler = standardize_fit(z, per_column=False)
    z = standardize_apply(scaler, z)
    if cfg.model == "KNN":
        clf = KnnModel(z.values, z.labels, cfg.k)
    else:
        clf = train(z.values, z.labels, cfg.hidden, cfg.train_config(), n_classes=N_CLASSES)
    return FoldArtifacts(std, reducer, scaler, clf, cfg.model)


class FoldError(RuntimeError):
    pass


@dataclass
class FoldResult:
    fold: int
    accuracy: float
    confusion: list
    reduced_dim: int
    n_train: int
    n_test: int
    train_status: str
    wall_time: float


def _run_fold(fold, dm, train_mask, test_mask, cfg):
    """Fit on the training mask, score the test mask; returns ``(FoldResult, FoldArtifacts)``."""
    t0 = time.perf_counter()
    try:
        art = fit_fold(dm.take(train_mask), cfg)
        test = dm.take(test_mask)
        pred = art.predict(test)
    except Exception as exc:
        raise FoldError(f"{cfg.name}: fold {fold} failed: {exc}") from exc
    status = art.classifier.status if cfg.model == "MLP" else "n/a"
    return art, FoldResult(
        fold=fold,
        accuracy=accuracy(pred, test.labels),
        confusion=confusion_matrix(pred, test.labels).tolist(),
        reduced_dim=int(art.reducer.out_dim),
        n_train=int(train_mask.sum()),
        n_test=int(test_mask.sum()),
        train_status=status,
        wall_time=time.perf_counter() - t0,
    )


def save_fold_artifacts(art, directory):
    """Standardizers, reducer and classifier of one fold as ``.npz`` files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savez(directory / "scaling.npz", mean=art.standardizer.mean, std=art.standardizer.std,
             post_mean=art.scaler.mean, post_std=art.scaler.std, model_kind=np.array(art.model_kind))
    embed.save_embedding(art.reducer, directory / "reducer.npz")
    if art.model_kind == "KNN":
        save_knn(art.classifier, directory / "classifier.npz")
    else:
        save_mlp(art.classifier, directory / "classifier.npz")


def load_fold_artifacts(directory):
    directory = Path(directory)
    with np.load(directory / "scaling.npz", allow_pickle=False) as z:
        std = Standardizer(z["mean"], z["std"])
        post = Standardizer(z["post_mean"], z["post_std"])
        kind = str(z["model_kind"])
    reducer = embed.load_embedding(directory / "reducer.npz")
    clf = load_knn(directory / "classifier.npz") if kind == "KNN" else load_mlp(directory / "classifier.npz")
    return FoldArtifacts(std, reducer, post, clf, kind)


# --------------------------------------------------------------------------
# whole experiment
# --------------------------------------------------------------------------

@dataclass
class CvReport:
    config: dict
    folds: list
    mean_accuracy: float
    n_samples: int
    n_augmented: int
    wall_time: float = 0.0
    error: str = None
    artifacts: list = field(default=None, repr=False)

    @property
    def fold_accuracies(self):
        return [f.accuracy for f in self.folds]

    def to_dict(self, timings=False):
        """JSON-ready dict; timings are left out unless asked for so reports stay reproducible."""
        folds = []
        for f in self.folds:
            d = asdict(f)
            if not timings:
                d.pop("wall_time")
            folds.append(d)
        out = {
            "config": self.config,
            "mean_accuracy": self.mean_accuracy,
            "fold_accuracies": self.fold_accuracies,
            "reduced_dims": [f.reduced_dim for f in self.folds],
            "n_samples": self.n_samples,
            "n_augmented": self.n_augmented,
            "folds": folds,
        }
        if self.error is not None:
            out["error"] = self.error
        if timings:
            out["wall_time"] = self.wall_time
        return out


def check_leak_free(groups, fold_of_sample):
    """Raise if any group id shows up in more than one fold."""
    seen = {}
    for g, f in zip(np.asarray(groups).tolist(), np.asarray(fold_of_sample).tolist()):
        if seen.setdefault(g, f) != f:
            raise AssertionError(f"group {g} appears in folds {seen[g]} and {f}")


def build_design(cfg, images, labels, groups, plan=None):
    """Design matrix for one experiment, augmented when the config asks for it."""
    if cfg.augment:
        plan = plan or AugmentationPlan.reference()
        plan = replace(plan, seed=cfg.augment_seed)
    else:
        plan = None
    return augmented_design_matrix(images, labels, groups, plan)


def run_experiment(cfg, store, plan=None, jobs=1, keep_artifacts=False):
    """5-fold cross-validation of one grid row over a feature store.

    ``store`` is a :class:`drmanifold.store.FeatureStore` (or anything with
    ``images``, ``labels`` and ``groups``) holding images preprocessed with
    ``cfg.prep``. ``plan`` supplies the per-class additions when the row
    augments (default: the reference table); its seed is replaced by
    ``cfg.augment_seed``.
    """
    if getattr(store, "prep", cfg.prep) != cfg.prep:
        raise ValueError(f"{cfg.name}: feature store holds {store.prep} images")
    t0 = time.perf_counter()
    dm = build_design(cfg, store.images, store.labels, store.groups, plan)
    assignment = make_folds(dm, cfg.folds, cfg.fold_seed)
    fold_of = assignment.sample_folds(dm.groups)
    check_leak_free(dm.groups, fold_of)

    def one(fold):
        return _run_fold(fold, dm, fold_of != fold, fold_of == fold, cfg)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one, range(cfg.folds)))
    else:
        outcomes = [one(f) for f in range(cfg.folds)]
    results = [r for _, r in outcomes]
    accs = [r.accuracy for r in results]
    config = cfg.to_dict()
    if cfg.augment:
        used = plan or AugmentationPlan.reference()
        config["augmentation"] = {"additions": {str(c): n for c, n in sorted(used.additions.items())},
                                  "angles": list(used.angles)}
    return CvReport(
        config=config,
        folds=results,
        mean_accuracy=float(np.mean(accs)),
        n_samples=dm.n,
        n_augmented=int(dm.augmented.sum()),
        wall_time=time.perf_counter() - t0,
        artifacts=[a for a, _ in outcomes] if keep_artifacts else None,
    )


def format_table(reports):
    """Plain-text summary with Prep, Aug, DR-method, Model and ACC(%) columns."""
    header = ("Prep", "Aug", "DR-method", "Model", "ACC(%)")
    rows = []
    for r in reports:
        r = r if isinstance(r, dict) else r.to_dict()
        c = r["config"]
        model = f"NNs({c['hidden']})" if c["model"] == "MLP" else f"k-NN (k={c['k']})"
        acc = r.get("mean_accuracy")
        acc_s = "FAILED" if r.get("error") is not None or acc is None else f"{100 * acc:.2f}"
        rows.append((c["prep"], "Y" if c["augment"] else "N", c["reducer"], model, acc_s))
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    fmt = " | ".join("{:<%d}" % w for w in widths)
    lines = [fmt.format(*header).rstrip(), "-+-".join("-" * w for w in widths)]
    lines += [fmt.format(*r).rstrip() for r in rows]
    return "\n".join(lines) + "\n"


def write_report(report, path, timings=False):
    Path(path).write_text(json.dumps(report.to_dict(timings), indent=2, sort_keys=True) + "\n")
