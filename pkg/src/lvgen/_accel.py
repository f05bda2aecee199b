"""Backend switch for the numeric kernels.

Every hot kernel ships twice: an explicit-loop version compiled with
``numba.njit`` and a vectorised numpy version. ``LVGEN_NUMBA=0`` (or a
missing numba install) selects the numpy path at import time.
"""
from __future__ import annotations

import os

_FLAG = os.environ.get("LVGEN_NUMBA", "1").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged.

    The loop versions stay callable (slowly) without numba so the two paths
    can always be compared against each other.
    """
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def select(loop_fn, numpy_fn):
    return loop_fn if USE_NUMBA else numpy_fn


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
