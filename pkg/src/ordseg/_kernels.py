"""Hot numeric kernels: exact distance transforms.

Every kernel is written in nopython-compatible form and JIT-compiled with
numba when available.  Setting the environment variable ``ORDSEG_NO_NUMBA=1``
(or when numba is not importable) selects the identical pure-Python/NumPy
fallback path; results are bit-for-bit the same on both paths.
"""

from __future__ import annotations

import os

import numpy as np

_NO_NUMBA_ENV = os.environ.get("ORDSEG_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

if not _NO_NUMBA_ENV:
    try:
        import numba

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        USING_NUMBA = False
else:
    USING_NUMBA = False


def _maybe_jit(fn):
    if USING_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


# Squared distances above this stand in for "no active pixel"; callers map
# them back to +inf.  Safely above (H^2 + W^2) for any realistic grid.
BIG = 1.0e12


def _edt_1d_sq(f, d, v, z):
    """Felzenszwalb-Huttenlocher 1-D squared distance transform.

    ``f`` holds input squared distances (BIG where empty), ``d`` receives the
    output, ``v``/``z`` are scratch arrays of length n and n + 1.
    """
    n = f.shape[0]
    k = 0
    v[0] = 0
    z[0] = -1.0e30
    z[1] = 1.0e30
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = 1.0e30
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        diff = q - v[k]
        d[q] = diff * diff + f[v[k]]


def _edt_sq_impl(active):
    """Exact squared Euclidean distance transform of a 0/1 activation grid."""
    h, w = active.shape
    dist = np.empty((h, w), dtype=np.float64)
    # Column pass: 1-D distance to nearest active pixel in the same column.
    for j in range(w):
        prev = BIG
        for i in range(h):
            if active[i, j] != 0:
                prev = 0.0
            elif prev < BIG:
                prev = prev + 1.0
            dist[i, j] = prev
        prev = BIG
        for i in range(h - 1, -1, -1):
            if active[i, j] != 0:
                prev = 0.0
            elif prev < BIG:
                prev = prev + 1.0
            if prev < dist[i, j]:
                dist[i, j] = prev
    for j in range(w):
        for i in range(h):
            if dist[i, j] < BIG:
                dist[i, j] = dist[i, j] * dist[i, j]
            else:
                dist[i, j] = BIG
    # Row pass: lower envelope of parabolas over the column distances.
    f = np.empty(w, dtype=np.float64)
    d = np.empty(w, dtype=np.float64)
    v = np.empty(w, dtype=np.int64)
    z = np.empty(w + 1, dtype=np.float64)
    for i in range(h):
        for j in range(w):
            f[j] = dist[i, j]
        _edt_1d_sq(f, d, v, z)
        for j in range(w):
            dist[i, j] = d[j]
    return dist


def _chamfer_impl(active, diagonal):
    """Two-pass sweep distance transform.

    ``diagonal`` True gives the chessboard metric, False gives Manhattan.
    Both are exact under two raster sweeps.
    """
    h, w = active.shape
    dist = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            dist[i, j] = 0.0 if active[i, j] != 0 else BIG
    for i in range(h):
        for j in range(w):
            best = dist[i, j]
            if i > 0 and dist[i - 1, j] + 1.0 < best:
                best = dist[i - 1, j] + 1.0
            if j > 0 and dist[i, j - 1] + 1.0 < best:
                best = dist[i, j - 1] + 1.0
            if diagonal:
                if i > 0 and j > 0 and dist[i - 1, j - 1] + 1.0 < best:
                    best = dist[i - 1, j - 1] + 1.0
                if i > 0 and j < w - 1 and dist[i - 1, j + 1] + 1.0 < best:
                    best = dist[i - 1, j + 1] + 1.0
            dist[i, j] = best
    for i in range(h - 1, -1, -1):
        for j in range(w - 1, -1, -1):
            best = dist[i, j]
            if i < h - 1 and dist[i + 1, j] + 1.0 < best:
                best = dist[i + 1, j] + 1.0
            if j < w - 1 and dist[i, j + 1] + 1.0 < best:
                best = dist[i, j + 1] + 1.0
            if diagonal:
                if i < h - 1 and j < w - 1 and dist[i + 1, j + 1] + 1.0 < best:
                    best = dist[i + 1, j + 1] + 1.0
                if i < h - 1 and j > 0 and dist[i + 1, j - 1] + 1.0 < best:
                    best = dist[i + 1, j - 1] + 1.0
            dist[i, j] = best
    return dist


if USING_NUMBA:
    _edt_1d_sq = numba.njit(cache=True)(_edt_1d_sq)

edt_sq = _maybe_jit(_edt_sq_impl)
chamfer = _maybe_jit(_chamfer_impl)
