"""Builders for the six relationship hypergraphs and their union."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .hypergraph import Hypergraph, HypergraphError, RelationKind, union
from .kernels import kmeans_assign
from .rng import make_rng

if TYPE_CHECKING:
    from .data import Dataset

log = logging.getLogger(__name__)


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    centroids: np.ndarray
    sse_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)

    def clusters(self) -> list[list[int]]:
        return [np.flatnonzero(self.labels == c).tolist() for c in range(self.k)]


def _sse(points, labels, centroids) -> float:
    return float(((points - centroids[labels]) ** 2).sum())


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # every remaining point coincides with a centroid
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rest[rng.integers(len(rest))])
        chosen.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[chosen].copy()


def _repair_empty(points, labels, centroids, k):
    """Give each empty cluster the point farthest from the largest cluster's centroid."""
    while True:
        sizes = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(sizes == 0)
        if empty.size == 0:
            return labels, centroids
        big = int(np.argmax(sizes))
        members = np.flatnonzero(labels == big)
        far = members[np.argmax(((points[members] - centroids[big]) ** 2).sum(axis=1))]
        labels[far] = empty[0]
        centroids[empty[0]] = points[far]
        centroids[big] = points[labels == big].mean(axis=0)


def kmeans(points, k: int, seed: int = 0, max_iters: int = 100) -> ClusterAssignment:
    """Lloyd iterations with k-means++ seeding; deterministic given ``seed``."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = len(points)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    rng = make_rng(seed, "kmeans")
    centroids = _kmeanspp(points, k, rng)
    labels, _ = kmeans_assign(points, centroids)
    labels, centroids = _repair_empty(points, labels.copy(), centroids, k)
    history = [_sse(points, labels, centroids)]
    for _ in range(max_iters):
        centroids = np.stack([points[labels == c].mean(axis=0) for c in range(k)])
        history.append(_sse(points, labels, centroids))
        new, _ = kmeans_assign(points, centroids)
        new, centroids = _repair_empty(points, new.copy(), centroids, k)
        history.append(_sse(points, new, centroids))
        if np.array_equal(new, labels):
            break
        labels = new
    return ClusterAssignment(labels=labels, centroids=centroids, sse_history=history)


def default_cluster_count(n: int) -> int:
    return min(n, max(2, round(math.sqrt(n))))


def build_network(links: Iterable[tuple[int, int]], n: int) -> Hypergraph:
    g = Hypergraph(n)
    skipped = 0
    for a, b in links:
        if a == b:
            skipped += 1
            continue
        g.add_hyperedge((a, b), 1.0, RelationKind.NET)
    if skipped:
        log.warning("build_network: skipped %d self-loop link(s)", skipped)
    return g


def build_proximity(positions, k: int | None = None, seed: int = 0, max_iters: int = 100) -> Hypergraph:
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    if k is None:
        k = default_cluster_count(n)
    assignment = kmeans(positions, k, seed=seed, max_iters=max_iters)
    g = Hypergraph(n)
    for members in assignment.clusters():
        g.add_hyperedge(members, 1.0, RelationKind.PHY)
    return g


def build_collaboration(records: Iterable[tuple[Iterable[int], bool]], n: int) -> Hypergraph:
    g = Hypergraph(n)
    skipped = 0
    for members, success in records:
        members = set(members)
        if len(members) < 2:
            skipped += 1
            continue
        g.add_hyperedge(members, 1.0 if success else 0.0, RelationKind.HIS)
    if skipped:
        log.warning("build_collaboration: skipped %d record(s) with fewer than 2 members", skipped)
    return g


def build_resource(types: Sequence[str]) -> Hypergraph:
    g = Hypergraph(len(types))
    groups: dict[str, list[int]] = {}
    for dev, t in enumerate(types):
        groups.setdefault(str(t), []).append(dev)
    for t in sorted(groups):
        if len(groups[t]) >= 2:
            g.add_hyperedge(groups[t], 1.0, RelationKind.RES)
    return g


def build_interest(interests: Mapping[int, Iterable[int]], b_total: int, n: int) -> Hypergraph:
    holders: dict[int, list[int]] = {}
    for dev in sorted(interests):
        for b in interests[dev]:
            if not 0 <= b < b_total:
                raise HypergraphError(f"interest id {b} of device {dev} not in [0, {b_total})")
            holders.setdefault(int(b), []).append(int(dev))
    g = Hypergraph(n)
    for b in sorted(holders):
        if len(holders[b]) >= 2:
            g.add_hyperedge(holders[b], 1.0, RelationKind.INT)
    return g


def build_common_friend(friendships: Iterable[tuple[int, int]], n: int) -> Hypergraph:
    """One 2-member hyperedge for every pair of devices sharing a friend.

    The shared friend itself is not a member.
    """
    neighbors: list[set[int]] = [set() for _ in range(n)]
    for a, b in friendships:
        if a == b:
            raise HypergraphError(f"self-loop friendship ({a}, {b})")
        if not (0 <= a < n and 0 <= b < n):
            raise HypergraphError(f"friendship ({a}, {b}) references an unknown device")
        neighbors[a].add(b)
        neighbors[b].add(a)
    g = Hypergraph(n)
    for hub in range(n):
        for j, m in combinations(sorted(neighbors[hub]), 2):
            g.add_hyperedge((j, m), 1.0, RelationKind.FRI)
    return g


@dataclass
class BuildConfig:
    clusters: int | None = None  # None: max(2, round(sqrt(n)))
    seed: int = 0
    max_iters: int = 100


def build_all(dataset: "Dataset", config: BuildConfig | None = None) -> Hypergraph:
    config = config or BuildConfig()
    n = dataset.num_devices
    parts = [
        build_network(dataset.links, n),
        build_proximity(dataset.positions, config.clusters, config.seed, config.max_iters),
        build_collaboration(dataset.collaborations, n),
        build_resource(dataset.device_types),
        build_interest(dataset.interests, dataset.interest_total, n),
        build_common_friend(dataset.friendships, n),
    ]
    return union(parts)
