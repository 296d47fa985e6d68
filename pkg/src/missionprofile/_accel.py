"""Numba switch.

Kernels are compiled with numba when it is importable and the environment
variable ``MP_NUMBA`` is not set to ``0``. Otherwise the pure-numpy
implementations are used. Both paths produce identical results.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("MP_NUMBA", "1") != "0"


def njit(func=None, **kwargs):
    """``numba.njit`` when numba is available, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if numba is None:
            return f
        return numba.njit(**kwargs)(f)

    if func is not None:
        return wrap(func)
    return wrap
