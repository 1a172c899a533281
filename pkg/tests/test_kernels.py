import numpy as np
import pytest

from hypertrust import kernels


def _random_csr(rng, n_rows, n_cols, nnz):
    rows = rng.integers(0, n_rows, nnz)
    cols = rng.integers(0, n_cols, nnz)
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
    data = rng.normal(size=nnz)
    dense = np.zeros((n_rows, n_cols))
    np.add.at(dense, (rows, cols), data)
    return indptr, cols.astype(np.int64), data, dense


@pytest.mark.parametrize("seed", range(3))
def test_spmm_paths_agree_with_dense(seed):
    rng = np.random.default_rng(seed)
    indptr, idx, data, dense = _random_csr(rng, 7, 5, 15)
    x = rng.normal(size=(5, 4))
    expected = dense @ x
    np.testing.assert_allclose(kernels.csr_spmm_np(indptr, idx, data, x, 7), expected, atol=1e-12)
    np.testing.assert_allclose(kernels.csr_spmm_jit(indptr, idx, data, x, 7), expected, atol=1e-12)


def test_spmm_empty():
    out = kernels.csr_spmm(np.zeros(4, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0), np.ones((2, 3)), 3)
    assert out.shape == (3, 3) and not out.any()


@pytest.mark.parametrize("metric", ["euclidean", "cosine"])
def test_pairwise_paths_agree(metric):
    x = np.random.default_rng(1).normal(size=(9, 4))
    x[3] = 0.0
    a = kernels.pairwise_distances_np(x, metric)
    b = kernels.pairwise_distances_jit(x, metric)
    np.testing.assert_allclose(a, b, atol=1e-12)
    assert np.allclose(a, a.T)


def test_pairwise_unknown_metric():
    with pytest.raises(ValueError):
        kernels.pairwise_distances(np.ones((2, 2)), "manhattan")


def test_kmeans_assign_paths_agree():
    rng = np.random.default_rng(2)
    pts, cen = rng.random((20, 2)), rng.random((4, 2))
    la, da = kernels.kmeans_assign_np(pts, cen)
    lb, db = kernels.kmeans_assign_jit(pts, cen)
    assert la.tolist() == lb.tolist()
    np.testing.assert_allclose(da, db, atol=1e-14)


@pytest.mark.parametrize("seed", range(4))
def test_sorted_spmm_paths_agree_and_match_dense(seed):
    rng = np.random.default_rng(seed)
    indptr, idx, data, dense = _random_csr(rng, 9, 6, 30)
    x = rng.normal(size=(6, 5))
    a = kernels.csr_spmm_sorted_np(indptr, idx, data, x, 9)
    b = kernels.csr_spmm_sorted_jit(indptr, idx, data, x, 9)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(a, dense @ x, atol=1e-12)


def test_sorted_spmm_ignores_storage_order():
    # same terms stored in a different order must sum to identical bits
    rng = np.random.default_rng(7)
    x = rng.normal(size=(6, 3)) * np.array([1e8, 1.0, 1e-8])
    indptr = np.array([0, 6])
    idx = np.arange(6)
    data = rng.random(6)
    perm = rng.permutation(6)
    for fn in (kernels.csr_spmm_sorted_np, kernels.csr_spmm_sorted_jit):
        base = fn(indptr, idx, data, x, 1)
        moved = fn(indptr, idx[perm], data[perm], x, 1)
        np.testing.assert_array_equal(base, moved)
