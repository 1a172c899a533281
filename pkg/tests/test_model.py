import numpy as np
import pytest

from hypertrust import autodiff as ad
from hypertrust.augment import AugmentedView, MaskedIncidence, clean_view, make_views
from hypertrust.hypergraph import Hypergraph
from hypertrust.model import HgnnParams, forward, layer_forward
from hypertrust.rng import make_rng

from conftest import random_hypergraph


def test_single_device_identity_layer():
    g = Hypergraph(1)
    g.add_hyperedge({0}, 1.0, "phy")
    view = clean_view(g, np.array([[1.0]]))
    x_e, x_a = layer_forward(view, view.features, np.eye(1), np.eye(1))
    assert x_e.value.tolist() == [[pytest.approx(1.0, rel=1e-11)]]
    assert x_a.value.tolist() == [[pytest.approx(1.0, rel=1e-11)]]


def test_zero_features_zero_embeddings(small_graph):
    view = clean_view(small_graph, np.zeros((5, 5)))
    out = forward(view, HgnnParams.init(5, 4, 2, seed=0))
    assert not out.devices.any() and not out.hyperedges.any()


def test_zero_weight_edge_annihilates_device_stage():
    g = Hypergraph(2)
    g.add_hyperedge({0, 1}, 0.0, "his")
    view = clean_view(g, np.ones((2, 2)))
    x_e, x_a = layer_forward(view, view.features, np.eye(2), np.eye(2))
    assert x_e.value.tolist() == [[pytest.approx(1.0), pytest.approx(1.0)]]
    assert not x_a.value.any()


def test_one_layer_is_layer_forward(small_graph):
    p = HgnnParams.init(5, 3, 1, seed=2)
    view = clean_view(small_graph, np.eye(5))
    out = forward(view, p)
    x_e, x_a = layer_forward(view, view.features, *p.layers[0])
    np.testing.assert_array_equal(out.devices, x_a.value)
    np.testing.assert_array_equal(out.hyperedges, x_e.value)


def test_shared_params_distinct_views(small_graph):
    p = HgnnParams.init(5, 4, 2, seed=0, activation="tanh")
    v1, v2 = make_views(small_graph, np.eye(5), 0.5, 0.5, make_rng(3))
    a, b = forward(v1, p), forward(v2, p)
    assert not np.array_equal(a.devices, b.devices)
    np.testing.assert_array_equal(forward(v1, p).devices, a.devices)


def brute_two_hop(g, x):
    """Identity weights, no clipping: D_a^-1 H W D_e^-1 H^T x by explicit loops."""
    n, m = g.num_devices, g.num_hyperedges
    edge_emb = np.zeros((m, x.shape[1]))
    for e, he in enumerate(g.hyperedges):
        for a in he.members:
            edge_emb[e] += x[a]
        edge_emb[e] /= len(he.members) + 1e-12
    out = np.zeros_like(x)
    for a in range(n):
        deg = 0.0
        for e, he in enumerate(g.hyperedges):
            if a in he.members:
                out[a] += he.weight * edge_emb[e]
                deg += he.weight
        out[a] /= deg + 1e-12
    return out


@pytest.mark.parametrize("seed", range(5))
def test_identity_layer_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    g = random_hypergraph(rng, 5, 6)
    x = rng.random((5, 3)) + 0.1
    p = HgnnParams([(np.eye(3), np.eye(3))])
    out = forward(clean_view(g, x), p)
    np.testing.assert_allclose(out.devices, brute_two_hop(g, x), rtol=1e-12, atol=1e-12)


def permuted_view(view: AugmentedView, perm):
    """Relabel device i as perm[i]."""
    inv = np.argsort(perm)
    feats = view.features[inv]
    inc = MaskedIncidence(perm[view.incidence.devices], view.incidence.edges, view.incidence.shape)
    return AugmentedView.from_parts(feats, inc, view.weights)


@pytest.mark.parametrize("seed", range(20))
def test_permutation_equivariance_exact(seed):
    rng = np.random.default_rng(seed)
    g = random_hypergraph(rng, 5, 6, zero_weight_prob=0.2)
    x = rng.normal(size=(5, 5))
    view = make_views(g, x, 0.3, 0.3, make_rng(seed))[0]
    p = HgnnParams.init(5, 4, 2, seed=seed)
    perm = rng.permutation(5)
    base = forward(view, p)
    moved = forward(permuted_view(view, perm), p)
    np.testing.assert_array_equal(moved.devices[perm], base.devices)
    np.testing.assert_array_equal(moved.hyperedges, base.hyperedges)


@pytest.mark.parametrize("p_drop", [0.0, 0.5, 0.9, 1.0])
def test_no_nan_under_any_masking(p_drop):
    rng = np.random.default_rng(0)
    g = random_hypergraph(rng, 8, 10, zero_weight_prob=0.3)
    params = HgnnParams.init(8, 6, 2, seed=0)
    for t in range(10):
        v = make_views(g, np.eye(8), p_drop, p_drop, make_rng(t))[0]
        out = forward(v, params)
        assert np.isfinite(out.devices).all() and np.isfinite(out.hyperedges).all()


def test_param_shapes_and_validation():
    p = HgnnParams.init(10, [6, 4], seed=1)
    assert [(te.shape, ta.shape) for te, ta in p.layers] == [((10, 6), (6, 6)), ((6, 4), (4, 4))]
    p.validate()
    bad = HgnnParams([(np.ones((3, 2)), np.ones((3, 3)))])
    with pytest.raises(ad.ShapeError):
        bad.validate()
    assert HgnnParams.init(76, 512).out_dim == 512


def test_init_deterministic_and_glorot_bounded():
    a, b = HgnnParams.init(8, 4, seed=3), HgnnParams.init(8, 4, seed=3)
    for (x, y), (u, v) in zip(a.layers, b.layers):
        np.testing.assert_array_equal(x, u)
        np.testing.assert_array_equal(y, v)
    te = a.layers[0][0]
    assert np.abs(te).max() <= np.sqrt(6 / (8 + 4))
