"""Numba switch.

Hot kernels are compiled with ``numba.njit`` when numba is importable and the
``ALPHAPOT_NUMBA`` environment variable is not set to a false value
(``0``, ``false``, ``no``, ``off``). Otherwise the pure-numpy kernels are used.
The flag is read once, at import time.
"""
from __future__ import annotations

import os

_FALSE = {"0", "false", "no", "off"}

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("ALPHAPOT_NUMBA", "1").strip().lower() not in _FALSE


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity decorator otherwise."""
    if HAS_NUMBA:
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap
