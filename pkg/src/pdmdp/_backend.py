"""Kernel backend selection: numba JIT by default, pure numpy on request.

The hot numeric kernels in this package are written once and executed either
compiled (numba ``@njit``) or as plain Python over numpy scalars.  Selection
happens at import time via the environment variable ``PDMDP_NUMBA``:

* unset or ``"1"``: use numba if it imports, else fall back silently;
* ``"0"``: force the pure-numpy path (useful for debugging and as the
  reference timing baseline in ``benchmarks/``).

Both paths consume identical RNG streams; see ``_rng.py``.
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

_env = os.environ.get("PDMDP_NUMBA", "").strip().lower()
_want_numba = _env not in ("0", "false", "no", "off")

if _want_numba:
    try:
        from numba import njit as _njit

        def jit(func):
            return _njit(cache=True, nogil=True)(func)

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        def jit(func):
            return func

        NUMBA_ENABLED = False
else:
    def jit(func):
        return func

    NUMBA_ENABLED = False


def active_backend() -> str:
    """Name of the kernel execution backend: ``"numba"`` or ``"python"``."""
    return "numba" if NUMBA_ENABLED else "python"


def kernel_errstate():
    """Context manager for kernel calls.

    The pure-Python path does uint64 wraparound arithmetic with numpy
    scalars, which numpy reports as overflow; the wraparound is intended.
    Compiled kernels use native machine integers and need no suppression.
    """
    if NUMBA_ENABLED:
        return contextlib.nullcontext()
    return np.errstate(over="ignore")
