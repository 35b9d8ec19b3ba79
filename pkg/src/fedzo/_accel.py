"""JIT plumbing: numba-compiled hot kernels with a pure-Python fallback.

The fallback executes the exact same kernel source uncompiled, so both
execution modes produce bit-identical results (same IEEE-754 operations in
the same order). Set the environment variable ``FEDZO_NO_NUMBA=1`` to force
the fallback; it is also selected automatically when numba is not
importable. The choice is made once at import time.
"""

from __future__ import annotations

import os

DISABLE_ENV = "FEDZO_NO_NUMBA"


def _decide() -> bool:
    if os.environ.get(DISABLE_ENV, "").strip().lower() in {"1", "true", "yes", "on"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _decide()


def maybe_jit(func):
    """Compile ``func`` with ``numba.njit`` when acceleration is enabled.

    The returned callable always exposes the original Python function as
    ``.py_func`` so benchmarks and equivalence tests can compare both paths.
    """
    if NUMBA_ENABLED:
        import numba

        return numba.njit(cache=True)(func)
    func.py_func = func
    return func
