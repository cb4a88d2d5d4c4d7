"""Numba toggle.

Set ``SIXDMA_DISABLE_NUMBA=1`` before importing :mod:`sixdma` to run every
kernel through its pure-numpy implementation.
"""

import os

_DISABLED = os.environ.get("SIXDMA_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by SIXDMA_DISABLE_NUMBA")
    from numba import njit as _njit
    HAS_NUMBA = True
except ImportError:
    _njit = None
    HAS_NUMBA = False


def opts():
    return dict(cache=True, fastmath=False, nogil=True, error_model="numpy")


def njit(func):
    """``numba.njit`` with package options, or the undecorated function."""
    if _njit is None:
        return func
    return _njit(**opts())(func)
