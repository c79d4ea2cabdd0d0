"""Limited-memory BFGS with a strong Wolfe line search.

An objective is any callable mapping a 1-D parameter vector to
``(value, gradient)``.
"""
from collections import deque
from dataclasses import dataclass, field

import numpy as np

CURVATURE_GUARD = 1e-10


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 10
    max_iters: int = 500
    grad_tol: float = 1e-5
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = 20

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("Wolfe constants must satisfy 0 < c1 < c2 < 1")
        if self.memory < 1 or self.max_iters < 0 or self.max_line_search < 1:
            raise ValueError("memory and max_line_search must be >= 1, max_iters >= 0")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")


@dataclass
class LbfgsResult:
    """Final iterate plus the per-iteration trace.

    ``trace`` holds ``(value, gradient inf-norm)`` for the starting point and
    every accepted iterate. ``status`` is one of ``"converged"``,
    ``"max_iters"`` or ``"line_search_failed"``.
    """
    x: np.ndarray
    value: float
    grad: np.ndarray
    status: str
    n_iters: int
    n_evals: int
    trace: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"


class _Counted:
    def __init__(self, fun):
        self.fun = fun
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        f, g = self.fun(x)
        return float(f), np.asarray(g, dtype=np.float64)


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb), or None."""
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    t = b - (b - a) * (gb + d2 - d1) / denom
    return t if np.isfinite(t) else None


def _line_search(fun, x, f0, g0, d, alpha, cfg):
    """Strong Wolfe step along ``d``. Returns ``(alpha, f, g)`` or ``None``."""
    dphi0 = float(g0 @ d)
    steps = 0

    def phi(a):
        f, g = fun(x + a * d)
        return f, g, float(g @ d)

    def zoom(lo, flo, dlo, hi, fhi, dhi):
        nonlocal steps
        while steps < cfg.max_line_search:
            width = hi - lo
            a = _cubic_min(lo, flo, dlo, hi, fhi, dhi) if np.isfinite(fhi) else None
            lo_edge, hi_edge = sorted((lo + 0.1 * width, hi - 0.1 * width))
            if a is None or not lo_edge <= a <= hi_edge:
                a = lo + 0.5 * width
            f, g, da = phi(a)
            steps += 1
            if not np.isfinite(f) or f > f0 + cfg.c1 * a * dphi0 or f >= flo:
                hi, fhi, dhi = a, f, da
            else:
                if abs(da) <= -cfg.c2 * dphi0:
                    return a, f, g
                if da * (hi - lo) >= 0:
                    hi, fhi, dhi = lo, flo, dlo
                lo, flo, dlo = a, f, da
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)):
                break
        return None

    a_prev, f_prev, d_prev = 0.0, f0, dphi0
    a = alpha
    while steps < cfg.max_line_search:
        f, g, da = phi(a)
        steps += 1
        if not np.isfinite(f) or f > f0 + cfg.c1 * a * dphi0 or (steps > 1 and f >= f_prev):
            return zoom(a_prev, f_prev, d_prev, a, f, da)
        if abs(da) <= -cfg.c2 * dphi0:
            return a, f, g
        if da >= 0:
            return zoom(a, f, da, a_prev, f_prev, d_prev)
        a_prev, f_prev, d_prev = a, f, da
        a = 2.0 * a
    return None


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def minimize(obj, x0, cfg=None):
    """Minimize ``obj`` from ``x0``; see :class:`LbfgsResult`.

    A failed line search ends the run with the last accepted iterate and
    ``status="line_search_failed"`` rather than raising.
    """
    cfg = cfg or LbfgsConfig()
    fun = _Counted(obj)
    x = np.array(x0, dtype=np.float64).ravel()
    f, g = fun(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise ValueError("objective is not finite at the starting point")
    if g.shape != x.shape:
        raise ValueError(f"gradient has shape {g.shape}, expected {x.shape}")

    pairs = deque(maxlen=cfg.memory)
    trace = [(f, float(np.max(np.abs(g), initial=0.0)))]
    status = "max_iters"
    it = 0
    while True:
        if trace[-1][1] <= cfg.grad_tol:
            status = "converged"
            break
        if it >= cfg.max_iters:
            break
        d = _two_loop(g, pairs)
        if not g @ d < 0:
            pairs.clear()
            d = -g
        alpha = 1.0 if pairs else min(1.0, 1.0 / np.linalg.norm(g))
        found = _line_search(fun, x, f, g, d, alpha, cfg)
        if found is None:
            status = "line_search_failed"
            break
        alpha, f_new, g_new = found
        s = alpha * d
        y = g_new - g
        sy = s @ y
        if sy > CURVATURE_GUARD * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        x = x + s
        f, g = f_new, g_new
        it += 1
        trace.append((f, float(np.max(np.abs(g)))))
    return LbfgsResult(x, f, g, status, it, fun.calls, trace)


def check_gradient(obj, x, eps=1e-5, max_full=2000, n_subset=200, seed=0):
    """Largest ``|analytic - central difference| / max(1, |central difference|)``.

    Every coordinate is probed when ``x`` has at most ``max_full`` entries,
    otherwise a seeded random subset of ``n_subset`` coordinates.
    """
    x = np.array(x, dtype=np.float64).ravel()
    _, g = obj(x)
    g = np.asarray(g, dtype=np.float64)
    if x.size <= max_full:
        coords = np.arange(x.size)
    else:
        coords = np.sort(np.random.default_rng(seed).choice(x.size, size=n_subset, replace=False))
    worst = 0.0
    for i in coords:
        xp = x.copy()
        xm = x.copy()
        xp[i] += eps
        xm[i] -= eps
        numeric = (obj(xp)[0] - obj(xm)[0]) / (2.0 * eps)
        worst = max(worst, abs(g[i] - numeric) / max(1.0, abs(numeric)))
    return worst
