"""Design matrices, the augmentation plan, standardization and group-aware folds."""
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imaging import ROTATION_ANGLES, rotate

N_CLASSES = 5


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    label: int
    group_id: int
    is_augmented: bool = False

    def __post_init__(self):
        if self.label not in range(N_CLASSES):
            raise ValueError(f"label must be in 0..{N_CLASSES - 1}, got {self.label}")


@dataclass(frozen=True)
class SourceImage:
    """A preprocessed gray image awaiting augmentation and unrolling."""
    image: np.ndarray
    label: int
    group_id: int


@dataclass(frozen=True)
class DesignMatrix:
    """``values`` is ``(N, k)``; ``labels`` and ``groups`` have length ``N``."""
    values: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    augmented: np.ndarray = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"design matrix must be a non-empty 2-D array, got shape {values.shape}")
        labels = np.asarray(self.labels, dtype=np.int64)
        groups = np.asarray(self.groups, dtype=np.int64)
        if labels.shape != (values.shape[0],) or groups.shape != (values.shape[0],):
            raise ValueError("labels and groups must have one entry per row")
        augmented = self.augmented
        augmented = np.zeros(len(labels), dtype=bool) if augmented is None else np.asarray(augmented, dtype=bool)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "augmented", augmented)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def k(self):
        return self.values.shape[1]

    def with_values(self, values):
        return DesignMatrix(values, self.labels, self.groups, self.augmented)

    def take(self, idx):
        return DesignMatrix(self.values[idx], self.labels[idx], self.groups[idx], self.augmented[idx])

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        return cls(
            np.stack([s.features for s in samples]),
            [s.label for s in samples],
            [s.group_id for s in samples],
            [s.is_augmented for s in samples],
        )


def unroll(img):
    """Row-major flattening of a gray image into a float vector."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    return img.astype(np.float64).ravel()


# --------------------------------------------------------------------------
# augmentation
# --------------------------------------------------------------------------

class AugmentationCapacityError(ValueError):
    """A class has fewer distinct (source, angle) rotations than requested."""


@dataclass(frozen=True)
class AugmentationPlan:
    """Number of rotated copies to add per class.

    The counts are additions on top of the originals; class 0 never grows.
    """
    additions: dict = field(default_factory=dict)
    angles: tuple = ROTATION_ANGLES
    seed: int = 0

    def __post_init__(self):
        adds = {int(c): int(n) for c, n in self.additions.items()}
        for c, n in adds.items():
            if c not in range(N_CLASSES):
                raise ValueError(f"unknown class {c} in augmentation plan")
            if n < 0:
                raise ValueError(f"augmentation count for class {c} is negative")
        if adds.get(0, 0) != 0:
            raise ValueError("class 0 is never augmented")
        angles = tuple(int(a) for a in self.angles)
        if not set(angles) <= set(ROTATION_ANGLES) or len(set(angles)) != len(angles):
            raise ValueError(f"angles must be distinct members of {ROTATION_ANGLES}")
        object.__setattr__(self, "additions", adds)
        object.__setattr__(self, "angles", angles)

    @classmethod
    def reference(cls, seed=0):
        """Additions used on the reference sample set (classes 1-4)."""
        return cls({1: 100, 2: 20, 3: 100, 4: 100}, seed=seed)

    def count(self, label):
        return self.additions.get(int(label), 0)


def plan_augmentation(labels, plan):
    """Choose the (source index, angle) pairs to add.

    For every class the pool is all ``len(plan.angles)`` rotations of each of
    its members; ``plan.count(c)`` pairs are drawn uniformly without
    replacement. Returns a list ordered by class, then source, then angle.
    """
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(plan.seed)
    chosen = []
    for c in range(N_CLASSES):
        want = plan.count(c)
        members = np.flatnonzero(labels == c)
        pool = len(members) * len(plan.angles)
        if want > pool:
            raise AugmentationCapacityError(
                f"class {c}: {want} rotations requested but only {pool} distinct ones exist"
            )
        if want == 0:
            continue
        picks = np.sort(rng.choice(pool, size=want, replace=False))
        for p in picks:
            src, a = divmod(int(p), len(plan.angles))
            chosen.append((int(members[src]), plan.angles[a]))
    return chosen


def build_augmented_set(sources, plan):
    """Unroll the originals and append the planned rotated copies.

    Each copy inherits the label and group id of its source image.
    """
    sources = list(sources)
    out = [LabeledSample(unroll(s.image), s.label, s.group_id) for s in sources]
    for idx, angle in plan_augmentation([s.label for s in sources], plan):
        s = sources[idx]
        out.append(LabeledSample(unroll(rotate(s.image, angle)), s.label, s.group_id, True))
    return out


def augmented_design_matrix(images, labels, groups, plan):
    """Array-level :func:`build_augmented_set`: ``images`` is ``(N, H, W)`` uint8."""
    images = np.asarray(images)
    labels = np.asarray(labels, dtype=np.int64)
    groups = np.asarray(groups, dtype=np.int64)
    picks = plan_augmentation(labels, plan) if plan is not None else []
    n0 = images.shape[0]
    values = np.empty((n0 + len(picks), images.shape[1] * images.shape[2]))
    values[:n0] = images.reshape(n0, -1)
    for row, (idx, angle) in enumerate(picks, start=n0):
        values[row] = rotate(images[idx], angle).ravel()
    src = np.concatenate([np.arange(n0), np.array([p[0] for p in picks], dtype=np.int64)])
    aug = np.zeros(len(src), dtype=bool)
    aug[n0:] = True
    return DesignMatrix(values, labels[src], groups[src], aug)


# --------------------------------------------------------------------------
# standardization
# --------------------------------------------------------------------------

STD_GUARD = 1e-12


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray


def _values(m):
    return m.values if isinstance(m, DesignMatrix) else np.asarray(m, dtype=np.float64)


def standardize_fit(train, per_column=True):
    """Per-column mean and population std; near-constant columns get std 1.

    With ``per_column=False`` every column is divided by one shared scale,
    the root mean square of the centered entries, which keeps the relative
    variances of the columns intact.
    """
    x = _values(train)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("standardization needs at least two rows")
    mean = x.mean(axis=0)
    if per_column:
        std = x.std(axis=0)
    else:
        std = np.full(x.shape[1], np.sqrt(np.mean((x - mean) ** 2)))
    std[std < STD_GUARD] = 1.0
    return Standardizer(mean, std)


def standardize_apply(std, m):
    x = _values(m)
    if x.ndim != 2 or x.shape[1] != std.mean.shape[0]:
        raise ValueError(f"expected {std.mean.shape[0]} columns, got shape {x.shape}")
    out = (x - std.mean) / std.std
    return m.with_values(out) if isinstance(m, DesignMatrix) else out


# --------------------------------------------------------------------------
# folds
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    n_folds: int
    fold_of_group: dict

    def sample_folds(self, groups):
        return np.array([self.fold_of_group[int(g)] for g in groups], dtype=np.int64)

    def split(self, groups, fold):
        """Boolean train and test masks for one fold."""
        f = self.sample_folds(groups)
        return f != fold, f == fold


def make_folds(m, n_folds=5, seed=0):
    """Stratified, group-aware fold assignment.

    Groups (a source image plus its rotated copies) are never split. Within
    each class the groups are shuffled and dealt round robin, continuing the
    deal across classes so fold sizes stay balanced overall too.
    """
    if isinstance(m, DesignMatrix):
        labels, groups = m.labels, m.groups
    else:
        labels, groups = (np.asarray(a, dtype=np.int64) for a in m)
    if n_folds < 2:
        raise ValueError("need at least two folds")
    label_of = {}
    for g, y in zip(groups.tolist(), labels.tolist()):
        if label_of.setdefault(g, y) != y:
            raise ValueError(f"group {g} carries more than one label")
    rng = np.random.default_rng(seed)
    fold_of = {}
    offset = 0
    for c in sorted(set(label_of.values())):
        gids = sorted(g for g, y in label_of.items() if y == c)
        if len(gids) < n_folds:
            raise ValueError(f"class {c} has {len(gids)} groups, fewer than {n_folds} folds")
        for t, g in enumerate(rng.permutation(gids).tolist()):
            fold_of[int(g)] = (offset + t) % n_folds
        offset = (offset + len(gids)) % n_folds
    return FoldAssignment(n_folds, fold_of)


# --------------------------------------------------------------------------
# manifest
# --------------------------------------------------------------------------

def read_manifest(path):
    """Rows of ``(image path, label)`` from a ``path,label`` CSV.

    Relative image paths resolve against the manifest's directory.
    """
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:2]] != ["path", "label"]:
            raise ValueError(f"{path}: manifest header must be 'path,label'")
        for lineno, rec in enumerate(reader, start=2):
            label = int(rec["label"])
            if label not in range(N_CLASSES):
                raise ValueError(f"{path}:{lineno}: label {label} outside 0..{N_CLASSES - 1}")
            p = Path(rec["path"].strip())
            rows.append((p if p.is_absolute() else path.parent / p, label))
    return rows
