"""Linear reducers: PCA, supervised LPP, NPE and spectral regression.

Every ``fit_*`` returns an :class:`EmbeddingModel`; :func:`transform` maps
rows through ``(x - center) @ projection``. Column signs are fixed so the
largest-magnitude entry of every projection column is positive, which makes
fits reproducible across runs.

SLPP and NPE first project onto the numerical-rank PCA subspace of the
training set. With image-sized ``k`` the ``k x k`` scatter matrices are
singular, and the pre-projection keeps all eigen-solves at ``N x N`` scale.
``pre_dim`` caps that subspace further; with few samples the full-rank
problem fits noise, and a few dozen leading components generalize better.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import kernels
from .dataset import DesignMatrix

METHODS = ("PCA", "SLPP", "NPE", "SR", "NONE")
RANK_TOL = 1e-10
REG_SCALE = 1e-3


@dataclass(frozen=True)
class EmbeddingModel:
    """A fitted linear reducer.

    ``projection`` is ``(k, d)``, or ``None`` for the pass-through reducer.
    ``spectrum`` holds the eigenvalues matching the projection columns.
    """
    method: str
    projection: np.ndarray
    center: np.ndarray
    spectrum: np.ndarray = None

    @property
    def in_dim(self):
        return self.center.shape[0]

    @property
    def out_dim(self):
        return self.in_dim if self.projection is None else self.projection.shape[1]


@dataclass(frozen=True)
class AffinityGraph:
    neighbors: np.ndarray
    weights: np.ndarray

    @property
    def n(self):
        return self.weights.shape[0]


def _xy(train, labels=None):
    if isinstance(train, DesignMatrix):
        return train.values, (train.labels if labels is None else np.asarray(labels))
    return np.asarray(train, dtype=np.float64), (None if labels is None else np.asarray(labels))


def fix_signs(vecs):
    """Flip columns so each one's largest-magnitude entry is positive."""
    vecs = np.array(vecs, dtype=np.float64)
    if vecs.size == 0:
        return vecs
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _resolve_dim(target_dim, available):
    if target_dim is None or target_dim == "auto":
        return available
    target_dim = int(target_dim)
    if target_dim < 1:
        raise ValueError(f"target dimension must be positive, got {target_dim}")
    return min(target_dim, available)


def pca_basis(xc):
    """Principal axes of centered rows ``xc`` with non-negligible variance.

    Returns ``(axes, variances)`` with variances non-increasing. Uses the
    ``N x N`` Gram matrix when there are more columns than rows.
    """
    n, k = xc.shape
    if k > n:
        gram = xc @ xc.T
        evals, evecs = linalg.eigh((gram + gram.T) / 2)
        evals, evecs = evals[::-1], evecs[:, ::-1]
        keep = evals > RANK_TOL * max(evals[0], 0.0)
        evals, evecs = evals[keep], evecs[:, keep]
        axes = (xc.T @ evecs) / np.sqrt(evals)
    else:
        scatter = xc.T @ xc
        evals, axes = linalg.eigh((scatter + scatter.T) / 2)
        evals, axes = evals[::-1], axes[:, ::-1]
        keep = evals > RANK_TOL * max(evals[0], 0.0)
        evals, axes = evals[keep], axes[:, keep]
    return fix_signs(axes), evals / (n - 1)


def fit_pca(train, target_dim=None):
    """PCA; ``target_dim`` of ``None``/``"auto"`` keeps the numerical rank."""
    x, _ = _xy(train)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("PCA needs at least two rows")
    center = x.mean(axis=0)
    axes, variances = pca_basis(x - center)
    d = _resolve_dim(target_dim, axes.shape[1])
    return EmbeddingModel("PCA", axes[:, :d], center, variances[:d])


# --------------------------------------------------------------------------
# neighbourhood graphs
# --------------------------------------------------------------------------

def knn_indices(y, knn):
    """Indices of each row's ``knn`` nearest other rows (ties: lower index)."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.shape[0]
    if knn < 1 or knn >= n:
        raise ValueError(f"knn must be in [1, {n - 1}], got {knn}")
    d2 = kernels.sq_distances(y, y)
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :knn]


def affinity_graph(y, labels, knn):
    """Binary kNN graph (either-direction neighbours), restricted to same-label pairs.

    ``labels=None`` gives the unsupervised graph.
    """
    nbrs = knn_indices(y, knn)
    n = nbrs.shape[0]
    adj = np.zeros((n, n))
    adj[np.repeat(np.arange(n), nbrs.shape[1]), nbrs.ravel()] = 1.0
    adj = np.maximum(adj, adj.T)
    if labels is not None:
        labels = np.asarray(labels)
        adj *= labels[:, None] == labels[None, :]
    np.fill_diagonal(adj, 0.0)
    return AffinityGraph(nbrs, adj)


def _regularize_if_singular(mat):
    evals = linalg.eigvalsh(mat)
    top = max(evals[-1], 0.0)
    if evals[0] > RANK_TOL * top:
        return mat, int(mat.shape[0])
    rank = int(np.sum(evals > RANK_TOL * top))
    tr = np.trace(mat)
    return mat + (REG_SCALE * tr if tr > 0 else 1.0) * np.eye(mat.shape[0]), rank


def _smallest_generalized(num, den, d):
    num = (num + num.T) / 2
    den = (den + den.T) / 2
    evals, evecs = linalg.eigh(num, den, subset_by_index=(0, d - 1))
    return evals, evecs


def generalized_residuals(num, den, evals, evecs):
    """``||num a - lam den a|| / ||a||`` for each returned pair."""
    r = num @ evecs - (den @ evecs) * evals
    return np.linalg.norm(r, axis=0) / np.linalg.norm(evecs, axis=0)


def _pre_project(x, pre_dim=None):
    center = x.mean(axis=0)
    xc = x - center
    axes, _ = pca_basis(xc)
    axes = axes[:, :_resolve_dim(pre_dim, axes.shape[1])]
    return center, axes, xc @ axes


def _finish(method, center, axes, evecs, evals):
    return EmbeddingModel(method, fix_signs(axes @ evecs), center, evals)


def fit_slpp(train, labels=None, knn=5, target_dim=None, pre_dim=None):
    """Supervised locality preserving projections.

    Solves ``Y^T L Y a = lam Y^T D Y a`` on the PCA-reduced rows ``Y`` and
    keeps the smallest eigenvalues. ``target_dim`` of ``None`` keeps the
    numerical rank of ``Y^T D Y``.
    """
    x, labels = _xy(train, labels)
    if labels is None:
        raise ValueError("SLPP needs class labels")
    if x.shape[0] < len(np.unique(labels)):
        raise ValueError("SLPP needs at least one row per class")
    if knn >= x.shape[0]:
        raise ValueError(f"knn={knn} must be smaller than the number of rows ({x.shape[0]})")
    center, axes, y = _pre_project(x, pre_dim)
    graph = affinity_graph(y, labels, knn)
    deg = graph.weights.sum(axis=1)
    lap = np.diag(deg) - graph.weights
    num = y.T @ lap @ y
    den, rank = _regularize_if_singular(y.T @ (deg[:, None] * y))
    d = _resolve_dim(target_dim, max(rank, 1))
    evals, evecs = _smallest_generalized(num, den, d)
    return _finish("SLPP", center, axes, evecs, evals)


def reconstruction_weights(y, neighbors):
    """Sum-to-one least-squares weights reconstructing each row from its neighbours.

    Returns the dense ``(N, N)`` weight matrix. A singular local Gram matrix
    is regularized by ``1e-3 * trace``.
    """
    n, knn = neighbors.shape
    w = np.zeros((n, n))
    ones = np.ones(knn)
    for i in range(n):
        z = y[neighbors[i]] - y[i]
        gram, _ = _regularize_if_singular(z @ z.T)
        wi = linalg.solve(gram, ones, assume_a="pos")
        w[i, neighbors[i]] = wi / wi.sum()
    return w


def fit_npe(train, labels=None, knn=5, target_dim=None, pre_dim=None):
    """Neighborhood preserving embedding; ``labels`` is accepted and ignored.

    Solves ``Y^T M Y a = lam Y^T Y a`` with ``M = (I - W)^T (I - W)``.
    """
    x, _ = _xy(train)
    if knn >= x.shape[0]:
        raise ValueError(f"knn={knn} must be smaller than the number of rows ({x.shape[0]})")
    center, axes, y = _pre_project(x, pre_dim)
    w = reconstruction_weights(y, knn_indices(y, knn))
    iw = np.eye(x.shape[0]) - w
    num = y.T @ (iw.T @ iw) @ y
    den, rank = _regularize_if_singular(y.T @ y)
    d = _resolve_dim(target_dim, max(rank, 1))
    evals, evecs = _smallest_generalized(num, den, d)
    return _finish("NPE", center, axes, evecs, evals)


def class_responses(labels):
    """Orthonormal basis of the class-indicator space orthogonal to the ones vector.

    These are the non-trivial eigenvectors of the supervised graph in which
    every pair of same-class samples is connected; one column per class
    beyond the first.
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("spectral regression needs at least two classes")
    basis = [np.ones(len(labels))] + [(labels == c).astype(np.float64) for c in classes[:-1]]
    q, _ = np.linalg.qr(np.column_stack(basis))
    return q[:, 1:]


def fit_sr(train, labels=None, ridge=0.01, pre_dim=None):
    """Spectral regression: ridge-regress the class responses onto the data.

    Each projection column solves ``(Xc^T Xc + ridge I) a = Xc^T y``; with
    more columns than rows the equivalent dual system is solved instead.
    With ``pre_dim`` the regression runs on that many leading principal
    components and the returned projection is the composite map.
    """
    x, labels = _xy(train, labels)
    if labels is None:
        raise ValueError("spectral regression needs class labels")
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    responses = class_responses(labels)
    if pre_dim is not None:
        center, axes, y = _pre_project(x, pre_dim)
        return EmbeddingModel("SR", fix_signs(axes @ ridge_solve(y, responses, ridge)), center, None)
    center = x.mean(axis=0)
    return EmbeddingModel("SR", fix_signs(ridge_solve(x - center, responses, ridge)), center, None)


def ridge_solve(xc, targets, ridge):
    """``(xc^T xc + ridge I)^{-1} xc^T targets``, through the dual when ``xc`` is wide."""
    n, k = xc.shape
    if k > n:
        alpha = linalg.solve(xc @ xc.T + ridge * np.eye(n), targets, assume_a="pos")
        return xc.T @ alpha
    return linalg.solve(xc.T @ xc + ridge * np.eye(k), xc.T @ targets, assume_a="pos")


def fit_identity(train):
    x, _ = _xy(train)
    return EmbeddingModel("NONE", None, np.zeros(x.shape[1]), None)


def fit_reducer(method, train, knn=5, target_dim=None, ridge=0.01, pre_dim=None):
    """Dispatch on the method tag; PCA ignores ``pre_dim``."""
    if method == "PCA":
        return fit_pca(train, target_dim)
    if method == "SLPP":
        return fit_slpp(train, knn=knn, target_dim=target_dim, pre_dim=pre_dim)
    if method == "NPE":
        return fit_npe(train, knn=knn, target_dim=target_dim, pre_dim=pre_dim)
    if method == "SR":
        return fit_sr(train, ridge=ridge, pre_dim=pre_dim)
    if method == "NONE":
        return fit_identity(train)
    raise ValueError(f"unknown reducer {method!r}; expected one of {METHODS}")


def transform(model, m):
    x = m.values if isinstance(m, DesignMatrix) else np.asarray(m, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.in_dim:
        raise ValueError(f"expected {model.in_dim} columns, got shape {x.shape}")
    out = x - model.center
    if model.projection is not None:
        out = out @ model.projection
    return m.with_values(out) if isinstance(m, DesignMatrix) else out


def save_embedding(model, path):
    arrays = {"method": np.array(model.method), "center": model.center}
    if model.projection is not None:
        arrays["projection"] = np.asfortranarray(model.projection)
    if model.spectrum is not None:
        arrays["spectrum"] = model.spectrum
    np.savez(path, **arrays)


def load_embedding(path):
    with np.load(path, allow_pickle=False) as z:
        return EmbeddingModel(
            str(z["method"]),
            z["projection"] if "projection" in z else None,
            z["center"],
            z["spectrum"] if "spectrum" in z else None,
        )
