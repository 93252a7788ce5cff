"""Kernel backend selection.

Hot loops are written once as plain Python in ``*_loops`` modules.  With the
``numba`` backend they are compiled with ``@njit``; with the ``numpy`` backend
vectorised numpy equivalents are used where one exists, and the loop source
runs interpreted otherwise.

Set ``STREETSEG_BACKEND=numpy`` before import to force the fallback path.
"""
import os

_requested = os.environ.get("STREETSEG_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"STREETSEG_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

HAVE_NUMBA = False
try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

BACKEND = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"


def compile_kernel(func):
    """Return the njit-compiled ``func``, or raise if numba is unavailable."""
    if not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    return _numba.njit(cache=True, nogil=True)(func)
