"""Switch between numba-compiled kernels and the plain numpy path.

Set ``LIEVORTEX_DISABLE_JIT=1`` to run every kernel as ordinary Python/numpy.
The same source is used in both modes.
"""
import os

_DISABLED = os.environ.get("LIEVORTEX_DISABLE_JIT", "0").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    USE_JIT = True
except ImportError:  # numba missing or explicitly disabled
    _njit = None
    USE_JIT = False


def kernel(func):
    """Compile ``func`` with ``numba.njit`` unless the fallback path is selected.

    The undecorated function stays reachable as ``func.py_func`` in both modes.
    """
    if USE_JIT:
        return _njit(cache=True, nogil=True)(func)
    func.py_func = func
    return func
