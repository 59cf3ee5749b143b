"""Numba switch.

Set ``CFXBO_DISABLE_NUMBA=1`` before importing :mod:`cfxbo` to run every
kernel on the pure NumPy/Python path. The flag is read once at import time.
"""

import os

_DISABLED = os.environ.get("CFXBO_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    _njit = None


def jit(func):
    """Compile ``func`` in nopython mode when numba is enabled, else return it unchanged."""
    if HAS_NUMBA:
        return _njit(cache=True, nogil=True)(func)
    return func


def backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"
