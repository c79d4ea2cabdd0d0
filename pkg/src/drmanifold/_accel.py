"""Backend switch for the compiled kernels.

Set ``DRMANIFOLD_DISABLE_NUMBA=1`` to force the pure-numpy kernels. If numba
cannot be imported the numpy kernels are used regardless.
"""
import os

_DISABLED = os.environ.get("DRMANIFOLD_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise the identity decorator.

    Compilation is always lazy, so importing the package never triggers a JIT
    even when the numpy backend is selected.
    """
    kwargs.setdefault("cache", True)
    if HAVE_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda fn: fn


def backend():
    return "numba" if USE_NUMBA else "numpy"
