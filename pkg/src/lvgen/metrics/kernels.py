"""Pairwise squared-distance kernels (numba loop / numpy fallback)."""
from __future__ import annotations

import numpy as np

from .._accel import njit, select


@njit
def sqdist_loop(a, b):
    n, m, d = a.shape[0], b.shape[0], a.shape[1]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                s += diff * diff
            out[i, j] = s
    return out


def sqdist_numpy(a, b):
    aa = np.einsum("ij,ij->i", a, a)[:, None]
    bb = np.einsum("ij,ij->i", b, b)[None, :]
    return np.maximum(aa + bb - 2.0 * a @ b.T, 0.0)


_sqdist = select(sqdist_loop, sqdist_numpy)


def sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return _sqdist(a, b)
