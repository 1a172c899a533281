"""Numba switch.

Set ``HYPERTRUST_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels. Numba is also skipped silently when it cannot be imported.
"""

import os

_DISABLED = os.environ.get("HYPERTRUST_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by HYPERTRUST_DISABLE_NUMBA")
    from numba import njit as _njit

    USING_NUMBA = True
except ImportError:
    _njit = None
    USING_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise the identity decorator."""
    if USING_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
