"""Evaluation protocol: silhouette, trust histogram, masking sweep, node-count runs, 2-D projection."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .kernels import pairwise_distances
from .relations import BuildConfig, build_all
from .trainer import TrainConfig, infer_embeddings, train
from .trust import rank, trust_vector

log = logging.getLogger(__name__)


def silhouette_score(points, labels, metric: str = "cosine") -> float:
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise ValueError("silhouette needs at least 2 label classes")
    if counts.min() < 2:
        raise ValueError(f"label {classes[counts.argmin()]!r} has fewer than 2 members")
    dist = pairwise_distances(points, metric)
    n = len(points)
    idx = np.searchsorted(classes, labels)
    # per-point sum of distances to each class
    sums = np.zeros((n, len(classes)))
    for c in range(len(classes)):
        sums[:, c] = dist[:, idx == c].sum(axis=1)
    own = counts[idx]
    a = sums[np.arange(n), idx] / (own - 1)
    means = sums / counts[None, :]
    means[np.arange(n), idx] = np.inf
    b = means.min(axis=1)
    top = np.maximum(a, b)
    s = np.where(top > 0, (b - a) / np.where(top > 0, top, 1.0), 0.0)
    return float(s.mean())


def _space(x, space: str) -> np.ndarray:
    x = np.asarray(getattr(x, "devices", x), dtype=np.float64)
    if space == "embedding":
        return x
    if space == "pca":
        return pca_2d(x)
    raise ValueError(f"unknown space {space!r}")


def trust_partition(x, initiator: int, k: int = 8) -> np.ndarray:
    """1 for the initiator and its top-``k`` trusted devices, 0 elsewhere."""
    x = np.asarray(getattr(x, "devices", x), dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k < n - 1:
        raise ValueError(f"k={k} must satisfy 1 <= k < {n - 1}")
    labels = np.zeros(n, dtype=np.int64)
    labels[initiator] = 1
    labels[rank(initiator, x).ids[:k]] = 1
    return labels


def trust_cluster_ss(x, initiator: int, k: int = 8, metric: str = "cosine", space: str = "embedding") -> float:
    """Silhouette of {initiator + top-k trusted} against everyone else.

    The partition always comes from trust in the full embedding space;
    ``space`` only picks where distances are measured.
    """
    labels = trust_partition(x, initiator, k)
    return silhouette_score(_space(x, space), labels, metric)


def trust_distribution(x, initiator: int, bin_edges=None) -> list[tuple[float, float, float]]:
    """``(lo, hi, proportion)`` per bin over all non-initiator devices.

    Bins are (lo, hi]; the first bin also takes values equal to its lower
    edge, and values beyond the outer edges fall into the outermost bins.
    """
    if bin_edges is None:
        bin_edges = np.round(np.linspace(-1.0, 1.0, 21), 10)
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing with at least 2 entries")
    x = np.asarray(getattr(x, "devices", x), dtype=np.float64)
    t = np.delete(trust_vector(x, initiator), initiator)
    bins = np.clip(np.searchsorted(edges, t, side="left") - 1, 0, len(edges) - 2)
    counts = np.bincount(bins, minlength=len(edges) - 1)
    props = counts / counts.sum()
    return [(float(edges[i]), float(edges[i + 1]), float(props[i])) for i in range(len(edges) - 1)]


@dataclass
class SensitivityGrid:
    p_a: list[float]
    p_h: list[float]
    ss: np.ndarray  # [i, j] for p_a[i], p_h[j]; NaN where the run failed
    seeds: np.ndarray

    def rows(self):
        for i, pa in enumerate(self.p_a):
            for j, ph in enumerate(self.p_h):
                yield pa, ph, float(self.ss[i, j])


def evaluate_run(graph, config: TrainConfig, initiator: int, k: int = 8, space: str = "embedding") -> float:
    report = train(graph, config)
    emb = infer_embeddings(graph, report.params)
    return trust_cluster_ss(emb.devices, initiator, k, space=space)


def sensitivity_sweep(dataset, config: TrainConfig, p_values, initiator: int = 5, k: int = 8,
                      workers: int = 1, build: BuildConfig | None = None,
                      p_h_values=None, space: str = "embedding", order=None) -> SensitivityGrid:
    """One training run per (p_a, p_h) cell, seeded ``config.seed + cell index``.

    ``order`` optionally permutes the traversal of the flattened cells.
    """
    p_a = [float(p) for p in p_values]
    p_h = [float(p) for p in (p_values if p_h_values is None else p_h_values)]
    for p in p_a + p_h:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"masking probability {p} outside [0, 1]")
    graph = build_all(dataset, build) if not hasattr(dataset, "hyperedges") else dataset
    cells = [(i, j) for i in range(len(p_a)) for j in range(len(p_h))]
    seeds = np.zeros((len(p_a), len(p_h)), dtype=np.int64)
    ss = np.full((len(p_a), len(p_h)), np.nan)

    def run(cell):
        i, j = cell
        seed = config.seed + i * len(p_h) + j
        cfg = replace(config, p_a=p_a[i], p_h=p_h[j], seed=seed)
        try:
            value = evaluate_run(graph, cfg, initiator, k, space)
        except Exception as exc:  # a failed cell is recorded, the sweep goes on
            log.warning("sweep cell p_a=%s p_h=%s failed: %s", p_a[i], p_h[j], exc)
            value = np.nan
        return cell, seed, value

    todo = [cells[c] for c in order] if order is not None else cells
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, todo))
    else:
        results = [run(c) for c in todo]
    for (i, j), seed, value in results:
        seeds[i, j] = seed
        ss[i, j] = value
    return SensitivityGrid(p_a, p_h, ss, seeds)


def node_count_experiment(dataset, sizes, config: TrainConfig, initiator: int = 5,
                          build: BuildConfig | None = None) -> list[tuple[int, int, float]]:
    """``(size, selected id, trust)`` after retraining on the first ``size`` devices."""
    rows = []
    for size in sizes:
        size = int(size)
        if size < 2:
            log.warning("node-count experiment: size %d skipped", size)
            continue
        if size > dataset.num_devices:
            raise ValueError(f"size {size} exceeds the {dataset.num_devices} available devices")
        if initiator >= size:
            raise ValueError(f"initiator {initiator} is not among the first {size} devices")
        graph = build_all(dataset.subset(size), build)
        report = train(graph, config)
        emb = infer_embeddings(graph, report.params)
        best, value = rank(initiator, emb.devices).entries[0]
        rows.append((size, best, value))
    return rows


def pca_2d(x, iters: int = 1000, tol: float = 1e-13) -> np.ndarray:
    """Projection on the top two principal axes (power iteration with deflation)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValueError("PCA needs at least 2 rows")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc
    out = np.zeros((x.shape[0], 2))
    scale = np.abs(cov).max() if cov.size else 0.0
    for comp in range(2):
        if comp >= x.shape[1] or scale == 0.0:
            break
        v = np.ones(cov.shape[0]) / np.sqrt(cov.shape[0])
        v += np.linspace(0.0, 1e-3, cov.shape[0])  # break symmetry with all-ones eigenvectors
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(iters):
            w = cov @ v
            nw = np.linalg.norm(w)
            if nw <= 1e-12 * scale:
                v = None
                break
            w /= nw
            done = np.linalg.norm(w - v) < tol
            v, lam = w, nw
            if done:
                break
        if v is None:
            break
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        out[:, comp] = xc @ v
        cov = cov - lam * np.outer(v, v)
    return out
