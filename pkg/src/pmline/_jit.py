"""Numba switch.

Set ``PMLINE_DISABLE_NUMBA=1`` to force the pure-numpy kernels (useful on
platforms without an LLVM toolchain, or to compare both paths).
"""
import os

_FLAG = os.environ.get("PMLINE_DISABLE_NUMBA", "").strip().lower()

try:  # pragma: no cover - depends on environment
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")

JIT_OPTIONS = {"nogil": True, "cache": True}


def njit(func):
    """Compile ``func`` in nopython mode when numba is enabled.

    The undecorated function stays reachable as ``.py_func`` either way, so
    tests can exercise the loop body without the compiler.
    """
    if HAVE_NUMBA:
        compiled = numba.njit(**JIT_OPTIONS)(func)
        return compiled
    func.py_func = func
    return func
