import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hypertrust import autodiff as ad
from hypertrust.objective import (
    LossWeights,
    decorrelation_loss,
    invariance_loss,
    normalize,
    normalize_embeddings,
    regularizer,
    total_loss,
)


def test_normalize_two_row_example():
    out = normalize_embeddings(np.array([[1.0], [3.0]]))
    assert out[:, 0].tolist() == pytest.approx([-0.5, 0.5], abs=1e-8)


def test_constant_column_becomes_zero():
    out = normalize_embeddings(np.full((6, 2), 3.7))
    assert np.all(np.abs(out) < 1e-12)


def test_normalize_needs_two_rows():
    with pytest.raises(ValueError):
        normalize(np.ones((1, 3)))
    with pytest.raises(ValueError):
        normalize_embeddings(np.ones((4, 2)), n=5)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 8)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_normalize_contract(x):
    n = x.shape[0]
    out = normalize_embeddings(x)
    spread = x.std(axis=0, ddof=1)
    assert np.all(np.abs(out.mean(axis=0)) < 1e-8)
    live = spread > 1e-3
    np.testing.assert_allclose(out[:, live].std(axis=0, ddof=1), 1 / np.sqrt(n), atol=1e-6)


def test_normalize_idempotent_up_to_eps():
    x = np.random.default_rng(0).normal(size=(20, 5))
    once = normalize_embeddings(x)
    twice = normalize_embeddings(once)
    np.testing.assert_allclose(twice, once, atol=1e-6)


def test_invariance_examples():
    x = np.random.default_rng(1).normal(size=(4, 3))
    assert float(invariance_loss(x, x).value) == 0.0
    assert float(invariance_loss(np.zeros((2, 2)), np.ones((2, 2))).value) == 4.0
    with pytest.raises(ad.ShapeError):
        invariance_loss(np.ones((2, 2)), np.ones((3, 2)))


def test_decorrelation_zero_for_orthonormal_columns():
    q, _ = np.linalg.qr(np.random.default_rng(2).normal(size=(8, 3)))
    assert float(decorrelation_loss(q, q).value) == pytest.approx(0.0, abs=1e-24)


def test_decorrelation_floor_when_width_exceeds_rows():
    # Gram of an n x d matrix has rank <= n, so at least d - n unit eigenvalues are missed.
    n, d = 4, 9
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = normalize_embeddings(rng.normal(size=(n, d)))
        per_view = float(decorrelation_loss(x, x).value) / 2
        assert per_view >= d - n - 1e-9


def test_decorrelation_matches_dense_formula():
    rng = np.random.default_rng(4)
    for shape in [(3, 7), (7, 3), (5, 5)]:
        x1, x2 = rng.normal(size=shape), rng.normal(size=shape)
        expect = sum(np.sum((x.T @ x - np.eye(shape[1])) ** 2) for x in (x1, x2))
        assert float(decorrelation_loss(x1, x2).value) == pytest.approx(expect, rel=1e-12)


def test_regularizer_sums_squares():
    assert float(regularizer([np.ones((2, 2)), 2 * np.ones((1, 3))]).value) == 16.0


def test_total_loss_combination():
    rng = np.random.default_rng(5)
    a1, a2 = rng.normal(size=(6, 4)), rng.normal(size=(6, 4))
    e1, e2 = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
    params = [rng.normal(size=(3, 4))]
    w = LossWeights(0.1, 0.2, 0.7, 0.05)
    total, b = total_loss((a1, a2), (e1, e2), params, w)

    def nz(x):
        x = (x - x.mean(0)) / (x.std(0, ddof=1) * np.sqrt(len(x)) + 1e-8)
        return x

    na1, na2, ne1, ne2 = map(nz, (a1, a2, e1, e2))
    gap = lambda z: np.sum((z.T @ z - np.eye(z.shape[1])) ** 2)
    inv_dev = np.sum((na1 - na2) ** 2)
    dec_dev = gap(na1) + gap(na2)
    inv_hyp = np.sum((ne1 - ne2) ** 2)
    dec_hyp = gap(ne1) + gap(ne2)
    reg = np.sum(params[0] ** 2)
    expect = inv_dev + 0.1 * dec_dev + 0.7 * (inv_hyp + 0.2 * dec_hyp) + 0.05 * reg
    assert b.total == pytest.approx(expect, rel=1e-12)
    assert float(total.value) == b.total
    assert b.inv_dev == pytest.approx(inv_dev, rel=1e-12)
    assert b.dec_hyp == pytest.approx(dec_hyp, rel=1e-12)
    assert set(b.as_dict()) == {"inv_dev", "dec_dev", "inv_hyp", "dec_hyp", "reg", "total"}
