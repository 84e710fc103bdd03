"""Backend selection for the hot loops.

Kernels are compiled with numba when it is importable; setting the environment
variable ``PARACHUTE_BACKEND=numpy`` forces the pure numpy implementations.
The variable is read on every dispatch, so it can be flipped at run time.
"""
import os

from .errors import ConfigError

BACKEND_ENV = "PARACHUTE_BACKEND"

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False


def njit(func):
    if HAS_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def backend():
    want = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if want not in ("numba", "numpy"):
        raise ConfigError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {want!r}")
    return "numba" if want == "numba" and HAS_NUMBA else "numpy"
