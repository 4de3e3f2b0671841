"""Hot inner loops, each with a numba and a pure-numpy implementation.

Set ``HDCLT_NO_NUMBA=1`` to force the numpy path (the numba path is also
skipped when numba cannot be imported).  Both paths return identical values
for the max/min style reductions; summation kernels may differ in the last
few ulps because of accumulation order.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("HDCLT_NO_NUMBA", "0") not in ("1", "true", "yes")
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------- numpy path

def rowmax_abs_numpy(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape[1] == 0:
        return np.zeros(a.shape[0])
    return np.abs(a).max(axis=1)


def ecdf_sup_two_sample_numpy(x: np.ndarray, y: np.ndarray, m: float):
    """sup_r r^m |Fx(r) - Fy(r)| over the pooled support, both inputs sorted.

    Returns (value, argmax_r, Fx(argmax), Fy(argmax)).
    """
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / x.size
    fy = np.searchsorted(y, grid, side="right") / y.size
    w = np.abs(grid) ** m if m > 0 else np.ones_like(grid)
    d = w * np.abs(fx - fy)
    k = int(np.argmax(d))
    return float(d[k]), float(grid[k]), float(fx[k]), float(fy[k])


def halfline_sup_numpy(x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Per row: max_k |sum of xi over the k largest x| for k = 0..n (unscaled)."""
    order = np.argsort(-x, axis=1, kind="stable")
    s = np.cumsum(np.take_along_axis(xi, order, axis=1), axis=1)
    xs = np.take_along_axis(x, order, axis=1)
    # a prefix is a half-line only where it ends a run of tied x values
    ends = np.ones(x.shape, dtype=bool)
    ends[:, :-1] = xs[:, :-1] != xs[:, 1:]
    return np.where(ends, np.abs(s), 0.0).max(axis=1, initial=0.0)


def halfline_sup_brute_numpy(x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """O(n^2) reference over cut points u in {-inf, x_1, ..., x_n}.

    Each cut set {i : x_i > u} is summed independently, visiting points in
    decreasing-x order so the comparison with the prefix-sum kernel is
    bit-exact.
    """
    reps, n = x.shape
    out = np.zeros(reps)
    for r in range(reps):
        order = np.argsort(-x[r], kind="stable")
        xs = x[r][order]
        zs = xi[r][order]
        best = 0.0
        for u in np.concatenate([[-np.inf], x[r]]):
            s = 0.0
            for i in range(n):
                if xs[i] > u:
                    s += zs[i]
            best = max(best, abs(s))
        out[r] = best
    return out


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def rowmax_abs_numba(a):
        n, p = a.shape
        out = np.zeros(n)
        for i in range(n):
            best = 0.0
            for j in range(p):
                v = abs(a[i, j])
                if v > best:
                    best = v
            out[i] = best
        return out

    @njit(cache=True)
    def _ecdf_sup_two_sample_nb(x, y, m):
        nx = x.size
        ny = y.size
        i = 0
        j = 0
        best = -1.0
        br = 0.0
        bfx = 0.0
        bfy = 0.0
        while i < nx or j < ny:
            if j >= ny or (i < nx and x[i] <= y[j]):
                r = x[i]
            else:
                r = y[j]
            while i < nx and x[i] <= r:
                i += 1
            while j < ny and y[j] <= r:
                j += 1
            fx = i / nx
            fy = j / ny
            w = abs(r) ** m if m > 0 else 1.0
            d = w * abs(fx - fy)
            if d > best:
                best = d
                br = r
                bfx = fx
                bfy = fy
        return best, br, bfx, bfy

    def ecdf_sup_two_sample_numba(x, y, m):
        v, r, fx, fy = _ecdf_sup_two_sample_nb(
            np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(y, dtype=np.float64), float(m)
        )
        return float(v), float(r), float(fx), float(fy)

    @njit(cache=True)
    def halfline_sup_numba(x, xi):
        reps, n = x.shape
        out = np.zeros(reps)
        for r in range(reps):
            order = np.argsort(-x[r], kind="mergesort")
            s = 0.0
            best = 0.0
            for k in range(n):
                s += xi[r, order[k]]
                if k < n - 1 and x[r, order[k]] == x[r, order[k + 1]]:
                    continue
                if abs(s) > best:
                    best = abs(s)
            out[r] = best
        return out

    @njit(cache=True)
    def halfline_sup_brute_numba(x, xi):
        reps, n = x.shape
        out = np.zeros(reps)
        for r in range(reps):
            order = np.argsort(-x[r], kind="mergesort")
            best = 0.0
            for c in range(n + 1):
                u = -np.inf if c == 0 else x[r, c - 1]
                s = 0.0
                for k in range(n):
                    i = order[k]
                    if x[r, i] > u:
                        s += xi[r, i]
                if abs(s) > best:
                    best = abs(s)
            out[r] = best
        return out

else:  # pragma: no cover
    rowmax_abs_numba = rowmax_abs_numpy
    ecdf_sup_two_sample_numba = ecdf_sup_two_sample_numpy
    halfline_sup_numba = halfline_sup_numpy
    halfline_sup_brute_numba = halfline_sup_brute_numpy


if USE_NUMBA:
    def rowmax_abs(a):
        return rowmax_abs_numba(np.ascontiguousarray(a, dtype=np.float64))

    ecdf_sup_two_sample = ecdf_sup_two_sample_numba

    def halfline_sup(x, xi):
        return halfline_sup_numba(np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(xi, dtype=np.float64))

    def halfline_sup_brute(x, xi):
        return halfline_sup_brute_numba(
            np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(xi, dtype=np.float64)
        )
else:
    rowmax_abs = rowmax_abs_numpy
    ecdf_sup_two_sample = ecdf_sup_two_sample_numpy
    halfline_sup = halfline_sup_numpy
    halfline_sup_brute = halfline_sup_brute_numpy
