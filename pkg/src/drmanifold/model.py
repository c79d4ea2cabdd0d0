"""One-hidden-layer ReLU network trained by L-BFGS, and the kNN baseline."""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .optim import LbfgsConfig, minimize


@dataclass(frozen=True, eq=False)
class MlpModel:
    """``x -> relu(x @ w1 + b1) @ w2 + b2 -> softmax``."""
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    status: str = field(default="", compare=False)
    trace: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        d, h = self.w1.shape
        if h < 1 or self.b1.shape != (h,) or self.w2.shape[0] != h or self.w2.shape[1] < 2:
            raise ValueError("inconsistent MLP parameter shapes")
        if self.b2.shape != (self.w2.shape[1],):
            raise ValueError("inconsistent MLP parameter shapes")

    @property
    def in_dim(self):
        return self.w1.shape[0]

    @property
    def hidden(self):
        return self.w1.shape[1]

    @property
    def n_classes(self):
        return self.w2.shape[1]

    def flat(self):
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    @classmethod
    def from_flat(cls, theta, in_dim, hidden, n_classes, **extra):
        theta = np.asarray(theta, dtype=np.float64)
        i = 0
        parts = []
        for shape in ((in_dim, hidden), (hidden,), (hidden, n_classes), (n_classes,)):
            size = int(np.prod(shape))
            parts.append(theta[i:i + size].reshape(shape))
            i += size
        if i != theta.size:
            raise ValueError(f"expected {i} parameters, got {theta.size}")
        return cls(*parts, **extra)


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1e-5
    C: float = 1.0
    seed: int = 0
    lbfgs: LbfgsConfig = field(default_factory=LbfgsConfig)

    def __post_init__(self):
        if self.lam < 0 or self.C < 0:
            raise ValueError("lam and C must be non-negative")


def relu(z):
    return np.maximum(z, 0.0)


def _check_x(m, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != m.in_dim:
        raise ValueError(f"expected input with {m.in_dim} columns, got shape {x.shape}")
    return x


def logits(m, x):
    x = _check_x(m, x)
    return relu(x @ m.w1 + m.b1) @ m.w2 + m.b2


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(m, x):
    """Class probabilities, one row per input row."""
    return softmax(logits(m, x))


def predict(m, x):
    """Most probable class per row; ties go to the smaller class index."""
    return np.argmax(forward(m, x), axis=1)


def loss_and_gradient(m, x, labels, cfg=None):
    """Mean softmax cross-entropy plus ``C * lam * (|w1|^2 + |w2|^2)``.

    Biases are not penalized. The gradient is flattened in the order of
    :meth:`MlpModel.flat`.
    """
    cfg = cfg or TrainConfig()
    x = _check_x(m, x)
    labels = np.asarray(labels, dtype=np.int64)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if labels.shape != (n,) or labels.min() < 0 or labels.max() >= m.n_classes:
        raise ValueError("labels must be one class index in [0, c) per row")

    pre = x @ m.w1 + m.b1
    h = relu(pre)
    z = h @ m.w2 + m.b2
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    pen = cfg.C * cfg.lam
    loss = float(np.mean(logsum - z[rows, labels]) + pen * (np.sum(m.w1 ** 2) + np.sum(m.w2 ** 2)))

    dz = np.exp(z - logsum[:, None])
    dz[rows, labels] -= 1.0
    dz /= n
    gw2 = h.T @ dz + 2.0 * pen * m.w2
    gb2 = dz.sum(axis=0)
    dpre = (dz @ m.w2.T) * (pre > 0)
    gw1 = x.T @ dpre + 2.0 * pen * m.w1
    gb1 = dpre.sum(axis=0)
    return loss, np.concatenate([gw1.ravel(), gb1, gw2.ravel(), gb2])


def mlp_objective(x, labels, in_dim, hidden, n_classes, cfg=None):
    """Closure over a batch: flat parameters -> (loss, flat gradient)."""
    def objective(theta):
        return loss_and_gradient(MlpModel.from_flat(theta, in_dim, hidden, n_classes), x, labels, cfg)
    return objective


def init_mlp(in_dim, hidden, n_classes, seed=0):
    """Glorot-uniform weights from a seeded generator, zero biases."""
    rng = np.random.default_rng(seed)
    r1 = np.sqrt(6.0 / (in_dim + hidden))
    r2 = np.sqrt(6.0 / (hidden + n_classes))
    w1 = rng.uniform(-r1, r1, size=(in_dim, hidden))
    w2 = rng.uniform(-r2, r2, size=(hidden, n_classes))
    return MlpModel(w1, np.zeros(hidden), w2, np.zeros(n_classes))


def train(x, labels, hidden, cfg=None, n_classes=None):
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    cfg = cfg or TrainConfig()
    c = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    if c < 2:
        raise ValueError("need at least two classes")
    if x.shape[0] < c:
        raise ValueError(f"need at least {c} training rows, got {x.shape[0]}")
    start = init_mlp(x.shape[1], hidden, c, cfg.seed)
    res = minimize(mlp_objective(x, labels, x.shape[1], hidden, c, cfg), start.flat(), cfg.lbfgs)
    return MlpModel.from_flat(res.x, x.shape[1], hidden, c, status=res.status, trace=tuple(res.trace))


# --------------------------------------------------------------------------
# k nearest neighbours
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KnnModel:
    features: np.ndarray
    labels: np.ndarray
    k: int = 5

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] == 0:
            raise ValueError("kNN needs a non-empty training set")
        if labels.shape != (feats.shape[0],):
            raise ValueError("one label per training row is required")
        if not 1 <= self.k <= feats.shape[0]:
            raise ValueError(f"k must be in [1, {feats.shape[0]}], got {self.k}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)


def knn_predict(m, x):
    """Euclidean majority vote of the ``k`` nearest training rows.

    Equal distances favour the earlier training row; tied votes favour the
    smaller class label.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != m.features.shape[1]:
        raise ValueError(f"expected {m.features.shape[1]} columns, got shape {x.shape}")
    d2 = kernels.sq_distances(x, m.features)
    return kernels.knn_vote(d2, m.labels, m.k, int(m.labels.max()) + 1)


def save_mlp(m, path):
    np.savez(path, w1=m.w1, b1=m.b1, w2=m.w2, b2=m.b2)


def load_mlp(path):
    with np.load(path, allow_pickle=False) as z:
        return MlpModel(z["w1"], z["b1"], z["w2"], z["b2"])


def save_knn(m, path):
    np.savez(path, features=m.features, labels=m.labels, k=np.array(m.k))


def load_knn(path):
    with np.load(path, allow_pickle=False) as z:
        return KnnModel(z["features"], z["labels"], int(z["k"]))
