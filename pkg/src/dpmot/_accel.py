"""Backend selection for the numeric kernels.

Set ``DPMOT_DISABLE_NUMBA=1`` in the environment before import to force the
pure-numpy path. Numba is used whenever it imports and is not disabled.
"""
import os

_DISABLED = os.environ.get("DPMOT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    import numba

    USE_NUMBA = True
except ImportError:
    numba = None
    USE_NUMBA = False


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` with numba.njit when the numba backend is active."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func
