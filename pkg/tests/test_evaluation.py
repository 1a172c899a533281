import math

import numpy as np
import pytest

from hypertrust.data import generate_synthetic
from hypertrust.evaluation import (
    node_count_experiment,
    pca_2d,
    sensitivity_sweep,
    silhouette_score,
    trust_cluster_ss,
    trust_distribution,
    trust_partition,
)
from hypertrust.relations import BuildConfig, build_all
from hypertrust.trainer import TrainConfig


def brute_silhouette(points, labels, metric="cosine"):
    """Rousseeuw's definition, one point at a time."""

    def dist(u, v):
        if metric == "euclidean":
            return math.sqrt(sum((a - b) ** 2 for a, b in zip(u, v)))
        nu = math.sqrt(sum(a * a for a in u))
        nv = math.sqrt(sum(b * b for b in v))
        if nu == 0 or nv == 0:
            return 1.0
        return 1.0 - max(-1.0, min(1.0, sum(a * b for a, b in zip(u, v)) / (nu * nv)))

    n = len(points)
    total = 0.0
    for i in range(n):
        own = [dist(points[i], points[j]) for j in range(n) if j != i and labels[j] == labels[i]]
        a = sum(own) / len(own)
        b = min(
            sum(dist(points[i], points[j]) for j in range(n) if labels[j] == c)
            / sum(1 for j in range(n) if labels[j] == c)
            for c in set(labels) - {labels[i]}
        )
        total += 0.0 if max(a, b) == 0 else (b - a) / max(a, b)
    return total / n


@pytest.mark.parametrize("metric", ["cosine", "euclidean"])
def test_silhouette_matches_brute_force(metric):
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = int(rng.integers(4, 30))
        pts = rng.normal(size=(n, 3))
        labels = np.arange(n) % int(rng.integers(2, max(3, n // 2)))
        got = silhouette_score(pts, labels, metric)
        assert abs(got - brute_silhouette(pts.tolist(), labels.tolist(), metric)) <= 1e-12


def test_silhouette_examples():
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    s = silhouette_score(pts, [0, 0, 1, 1], "euclidean")
    assert s == pytest.approx(np.mean([1 - 1 / ((10 + np.sqrt(101)) / 2)] * 4))
    with pytest.raises(ValueError):
        silhouette_score(pts, [0, 0, 0, 0])
    with pytest.raises(ValueError):
        silhouette_score(pts, [0, 1, 1, 1])


def test_silhouette_random_labels_near_zero():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(400, 8))
    assert abs(silhouette_score(pts, rng.integers(0, 2, 400))) < 0.05


def test_partition_and_cluster_ss():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 5))
    labels = trust_partition(x, 3, k=4)
    assert labels.sum() == 5 and labels[3] == 1
    with pytest.raises(ValueError):
        trust_partition(x, 3, k=19)
    assert -1 <= trust_cluster_ss(x, 3, 4) <= 1
    assert -1 <= trust_cluster_ss(x, 3, 4, space="pca") <= 1
    with pytest.raises(ValueError):
        trust_cluster_ss(x, 3, 4, space="tsne")


def test_two_tight_clusters_score_high():
    rng = np.random.default_rng(3)
    a = np.array([1.0, 0, 0]) + 0.01 * rng.normal(size=(6, 3))
    b = np.array([0, 1.0, 0]) + 0.01 * rng.normal(size=(14, 3))
    assert trust_cluster_ss(np.vstack([a, b]), 0, k=5) > 0.9


def test_trust_distribution_sums_to_one_and_bins():
    x = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    hist = trust_distribution(x, 0)
    assert len(hist) == 20
    assert sum(p for _, _, p in hist) == pytest.approx(1.0)
    by_lo = {round(lo, 2): p for lo, _, p in hist}
    assert by_lo[0.9] == 0.25  # trust 1.0 falls in (0.9, 1.0]
    assert by_lo[-1.0] == 0.25  # -1.0 is kept in the first bin
    assert by_lo[-0.1] == 0.25  # 0.0 falls in (-0.1, 0.0]
    assert by_lo[0.7] == 0.25  # 0.7071 falls in (0.7, 0.8]
    with pytest.raises(ValueError):
        trust_distribution(x, 0, [0.0, 0.0, 1.0])


def test_pca_matches_eigendecomposition():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(30, 6)) * np.array([5, 3, 1, 0.5, 0.2, 0.1])
    out = pca_2d(x)
    xc = x - x.mean(0)
    w, v = np.linalg.eigh(xc.T @ xc)
    ref = xc @ v[:, ::-1][:, :2]
    for c in range(2):
        assert abs(abs(np.dot(out[:, c], ref[:, c])) - np.dot(ref[:, c], ref[:, c])) < 1e-6 * np.dot(ref[:, c], ref[:, c])
    np.testing.assert_allclose(out.mean(0), 0, atol=1e-10)


def test_pca_degenerate_inputs():
    assert not pca_2d(np.ones((5, 3))).any()
    out = pca_2d(np.arange(10.0).reshape(5, 2)[:, :1])
    assert out.shape == (5, 2) and not out[:, 1].any()
    with pytest.raises(ValueError):
        pca_2d(np.ones((1, 3)))


@pytest.fixture(scope="module")
def tiny():
    return generate_synthetic(n=16, seed=1)


def tiny_config(**kw):
    return TrainConfig(epochs=2, dim=8, seed=3, **kw)


def test_sweep_single_cell_and_seeds(tiny):
    grid = sensitivity_sweep(tiny, tiny_config(), [0.5], initiator=2, k=3, build=BuildConfig(clusters=3))
    assert grid.ss.shape == (1, 1) and np.isfinite(grid.ss).all()
    assert grid.seeds.tolist() == [[3]]
    assert list(grid.rows()) == [(0.5, 0.5, float(grid.ss[0, 0]))]


def test_sweep_order_independent(tiny):
    g = build_all(tiny, BuildConfig(clusters=3))
    a = sensitivity_sweep(g, tiny_config(), [0.2, 0.6], initiator=2, k=3)
    b = sensitivity_sweep(g, tiny_config(), [0.2, 0.6], initiator=2, k=3, order=[3, 1, 0, 2])
    c = sensitivity_sweep(g, tiny_config(), [0.2, 0.6], initiator=2, k=3, workers=2)
    np.testing.assert_array_equal(a.ss, b.ss)
    np.testing.assert_array_equal(a.ss, c.ss)
    assert a.seeds.tolist() == [[3, 4], [5, 6]]


def test_sweep_records_failures_as_nan(tiny):
    grid = sensitivity_sweep(tiny, tiny_config(), [0.5], initiator=2, k=14, build=BuildConfig(clusters=3))
    assert np.isnan(grid.ss).all()
    with pytest.raises(ValueError):
        sensitivity_sweep(tiny, tiny_config(), [1.2])


def test_node_count_experiment(tiny):
    rows = node_count_experiment(tiny, [1, 8, 12], tiny_config(), initiator=2, build=BuildConfig(clusters=2))
    assert [r[0] for r in rows] == [8, 12]
    for size, best, value in rows:
        assert 0 <= best < size and best != 2 and -1 <= value <= 1
    with pytest.raises(ValueError):
        node_count_experiment(tiny, [40], tiny_config())
