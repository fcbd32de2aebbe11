"""Numba switch.

Kernels in :mod:`stokes_darcy.kernels` exist twice: a numba ``@njit`` loop
version and a vectorized numpy version. Setting ``STOKES_DARCY_DISABLE_NUMBA=1``
(or running without numba installed) selects the numpy path.
"""
import os

ENV_FLAG = "STOKES_DARCY_DISABLE_NUMBA"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _flag_set():
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not _flag_set()


def use_numba():
    return USE_NUMBA


def set_use_numba(flag):
    """Switch kernel backend at runtime (mostly for tests and benchmarks)."""
    global USE_NUMBA
    USE_NUMBA = bool(flag) and HAVE_NUMBA
    return USE_NUMBA
