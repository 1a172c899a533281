"""Hot loops: sparse incidence products, pairwise distances, k-means assignment.

Every kernel exists twice: a numba version (``*_jit``) and a pure-numpy
version (``*_np``). The public name binds to the jit version unless numba is
disabled (see ``_accel``). Both are always importable so they can be
benchmarked and cross-checked against each other.
"""

import numpy as np

from ._accel import USING_NUMBA, njit

__all__ = [
    "USING_NUMBA",
    "csr_spmm",
    "csr_spmm_sorted",
    "pairwise_distances",
    "kmeans_assign",
]


# --- sparse (CSR) x dense ----------------------------------------------------
#
# ``csr_spmm`` accumulates in storage order. ``csr_spmm_sorted`` sums each
# output entry in ascending value order, so its result depends only on the
# multiset of contributions and not on how the columns are labelled; the
# network uses it wherever device relabelling would otherwise reorder a sum.


def csr_spmm_np(indptr, indices, data, x, n_rows):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros((n_rows, x.shape[1]), dtype=np.float64)
    if indices.size == 0:
        return out
    counts = np.diff(indptr)
    nonempty = np.flatnonzero(counts)
    out[nonempty] = np.add.reduceat(data[:, None] * x[indices], indptr[nonempty], axis=0)
    return out


@njit(cache=True)
def _csr_spmm_plain(indptr, indices, data, x, n_rows):
    d = x.shape[1]
    out = np.zeros((n_rows, d), dtype=np.float64)
    for r in range(n_rows):
        for p in range(indptr[r], indptr[r + 1]):
            c = indices[p]
            v = data[p]
            for k in range(d):
                out[r, k] += v * x[c, k]
    return out


def csr_spmm_jit(indptr, indices, data, x, n_rows):
    return _csr_spmm_plain(indptr, indices, data, np.ascontiguousarray(x, dtype=np.float64), n_rows)


def csr_spmm_sorted_np(indptr, indices, data, x, n_rows):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros((n_rows, x.shape[1]), dtype=np.float64)
    if indices.size == 0:
        return out
    counts = np.diff(indptr)
    contrib = data[:, None] * x[indices]
    for m in np.unique(counts[counts > 0]):
        rows = np.flatnonzero(counts == m)
        take = indptr[rows][:, None] + np.arange(m)[None, :]
        block = np.sort(contrib[take], axis=1)
        acc = block[:, 0].copy()
        for p in range(1, m):
            acc += block[:, p]
        out[rows] = acc
    return out


@njit(cache=True)
def _csr_spmm_sorted_loop(indptr, indices, data, x, n_rows):
    d = x.shape[1]
    out = np.zeros((n_rows, d), dtype=np.float64)
    max_m = 0
    for r in range(n_rows):
        max_m = max(max_m, indptr[r + 1] - indptr[r])
    block = np.empty((max_m, d), dtype=np.float64)
    col = np.empty(max_m, dtype=np.float64)
    for r in range(n_rows):
        start = indptr[r]
        m = indptr[r + 1] - start
        if m == 0:
            continue
        for p in range(m):
            v = data[start + p]
            src = indices[start + p]
            for k in range(d):
                block[p, k] = v * x[src, k]
        if m == 1:
            for k in range(d):
                out[r, k] = block[0, k]
        elif m == 2:
            # a + b == b + a exactly
            for k in range(d):
                out[r, k] = block[0, k] + block[1, k]
        else:
            for k in range(d):
                # insertion sort; rows are short
                for p in range(m):
                    v = block[p, k]
                    q = p - 1
                    while q >= 0 and col[q] > v:
                        col[q + 1] = col[q]
                        q -= 1
                    col[q + 1] = v
                acc = 0.0
                for p in range(m):
                    acc += col[p]
                out[r, k] = acc
    return out


def csr_spmm_sorted_jit(indptr, indices, data, x, n_rows):
    return _csr_spmm_sorted_loop(indptr, indices, data, np.ascontiguousarray(x, dtype=np.float64), n_rows)


# --- pairwise distances -------------------------------------------------------


def pairwise_distances_np(x, metric="euclidean"):
    x = np.asarray(x, dtype=np.float64)
    if metric == "cosine":
        norms = np.sqrt(np.einsum("ij,ij->i", x, x))
        safe = np.where(norms > 0.0, norms, 1.0)
        u = x / safe[:, None]
        sim = u @ u.T
        sim[norms == 0.0, :] = 0.0
        sim[:, norms == 0.0] = 0.0
        dist = 1.0 - np.clip(sim, -1.0, 1.0)
    elif metric == "euclidean":
        diff = x[:, None, :] - x[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    np.fill_diagonal(dist, 0.0)
    return dist


@njit(cache=True)
def _pairwise_loop(x, cosine):
    n, d = x.shape
    out = np.zeros((n, n), dtype=np.float64)
    norms = np.zeros(n, dtype=np.float64)
    if cosine:
        for i in range(n):
            s = 0.0
            for k in range(d):
                s += x[i, k] * x[i, k]
            norms[i] = np.sqrt(s)
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            if cosine:
                if norms[i] == 0.0 or norms[j] == 0.0:
                    s = 1.0
                else:
                    dot = 0.0
                    for k in range(d):
                        dot += x[i, k] * x[j, k]
                    c = dot / (norms[i] * norms[j])
                    if c > 1.0:
                        c = 1.0
                    elif c < -1.0:
                        c = -1.0
                    s = 1.0 - c
            else:
                for k in range(d):
                    t = x[i, k] - x[j, k]
                    s += t * t
                s = np.sqrt(s)
            out[i, j] = s
            out[j, i] = s
    return out


def pairwise_distances_jit(x, metric="euclidean"):
    if metric not in ("cosine", "euclidean"):
        raise ValueError(f"unknown metric {metric!r}")
    return _pairwise_loop(np.ascontiguousarray(x, dtype=np.float64), metric == "cosine")


# --- k-means assignment -------------------------------------------------------


def kmeans_assign_np(points, centroids):
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels.astype(np.int64), d2[np.arange(len(points)), labels]


@njit(cache=True)
def _kmeans_assign_loop(points, centroids):
    n, d = points.shape
    k = centroids.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    best = np.zeros(n, dtype=np.float64)
    for i in range(n):
        bd = np.inf
        bl = 0
        for c in range(k):
            s = 0.0
            for j in range(d):
                t = points[i, j] - centroids[c, j]
                s += t * t
            if s < bd:
                bd = s
                bl = c
        labels[i] = bl
        best[i] = bd
    return labels, best


def kmeans_assign_jit(points, centroids):
    return _kmeans_assign_loop(
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(centroids, dtype=np.float64),
    )


# The dense distance matrix is a single BLAS product in numpy, which beats the
# jit loop (see benchmarks/bench_kernels.py), so it is bound to numpy on both paths.
pairwise_distances = pairwise_distances_np

if USING_NUMBA:
    csr_spmm = csr_spmm_jit
    csr_spmm_sorted = csr_spmm_sorted_jit
    kmeans_assign = kmeans_assign_jit
else:
    csr_spmm = csr_spmm_np
    csr_spmm_sorted = csr_spmm_sorted_np
    kmeans_assign = kmeans_assign_np
