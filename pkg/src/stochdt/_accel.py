"""Numba switch for the hot kernels.

Set ``STOCHDT_DISABLE_NUMBA=1`` to route every kernel through its numpy/scipy
fallback. ``use_numba(False)`` does the same at runtime (tests, benchmarks).
"""
from __future__ import annotations

import contextlib
import os

try:
    import numba
    from numba import njit, prange
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


_enabled = HAVE_NUMBA and os.environ.get("STOCHDT_DISABLE_NUMBA", "").strip().lower() not in (
    "1", "true", "yes", "on")


def numba_enabled() -> bool:
    return _enabled


@contextlib.contextmanager
def use_numba(flag: bool):
    """Temporarily force the numba path on or off."""
    global _enabled
    old = _enabled
    _enabled = bool(flag) and HAVE_NUMBA
    try:
        yield
    finally:
        _enabled = old


def set_threads(n: int | None) -> None:
    if n and HAVE_NUMBA:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
