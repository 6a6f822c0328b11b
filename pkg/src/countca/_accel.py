"""Backend selection for the hot kernels.

Set ``COUNTCA_DISABLE_NUMBA=1`` to force the pure-numpy paths.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

DISABLED = os.environ.get("COUNTCA_DISABLE_NUMBA", "").lower() not in ("", "0", "false", "no")
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(fn):
    """Compile ``fn`` with numba when available; otherwise return it untouched."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
