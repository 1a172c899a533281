"""Weighted multi-relation hypergraph over a fixed device set."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class RelationKind(str, Enum):
    NET = "net"  # direct communication link
    PHY = "phy"  # physical proximity cluster
    HIS = "his"  # historical collaboration
    RES = "res"  # same device type
    INT = "int"  # shared interest
    FRI = "fri"  # common friend


class HypergraphError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperedge:
    members: tuple[int, ...]
    weight: float
    kind: RelationKind


@dataclass
class Hypergraph:
    """Hyperedges are kept as sorted member tuples; the incidence matrix is
    materialized on demand.

    Within one relation kind a member set appears at most once; re-adding it
    keeps the larger weight. The same member set under two kinds gives two
    hyperedges.
    """

    num_devices: int
    hyperedges: list[Hyperedge] = field(default_factory=list)
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.num_devices < 0:
            raise HypergraphError("num_devices must be non-negative")
        edges, self.hyperedges, self._index = self.hyperedges, [], {}
        for e in edges:
            self.add_hyperedge(e.members, e.weight, e.kind)

    @property
    def num_hyperedges(self) -> int:
        return len(self.hyperedges)

    def add_hyperedge(self, members: Iterable[int], weight: float, kind: RelationKind | str) -> int:
        kind = RelationKind(kind)
        key_members = tuple(sorted({int(m) for m in members}))
        if not key_members:
            raise HypergraphError("hyperedge must have at least one member")
        bad = [m for m in key_members if m < 0 or m >= self.num_devices]
        if bad:
            raise HypergraphError(
                f"device id(s) {bad} out of range for {self.num_devices} devices"
            )
        weight = float(weight)
        if not np.isfinite(weight) or weight < 0:
            raise HypergraphError(f"hyperedge weight must be finite and >= 0, got {weight}")

        key = (kind, key_members)
        idx = self._index.get(key)
        if idx is not None:
            old = self.hyperedges[idx]
            if weight > old.weight:
                self.hyperedges[idx] = Hyperedge(old.members, weight, kind)
            return idx
        self.hyperedges.append(Hyperedge(key_members, weight, kind))
        self._index[key] = len(self.hyperedges) - 1
        return len(self.hyperedges) - 1

    # -- matrices -----------------------------------------------------------

    @property
    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.hyperedges], dtype=np.float64)

    def memberships(self) -> tuple[np.ndarray, np.ndarray]:
        """(device index, hyperedge index) of every nonzero of the incidence matrix."""
        dev = [m for e in self.hyperedges for m in e.members]
        edg = [n for n, e in enumerate(self.hyperedges) for _ in e.members]
        return np.asarray(dev, dtype=np.int64), np.asarray(edg, dtype=np.int64)

    def incidence(self) -> np.ndarray:
        h = np.zeros((self.num_devices, self.num_hyperedges), dtype=np.float64)
        dev, edg = self.memberships()
        h[dev, edg] = 1.0
        return h

    def device_degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_devices, dtype=np.float64)
        for e in self.hyperedges:
            for m in e.members:
                deg[m] += e.weight
        return deg

    def hyperedge_degrees(self) -> np.ndarray:
        return np.array([len(e.members) for e in self.hyperedges], dtype=np.float64)

    def kind_counts(self) -> dict[str, int]:
        counts = {k.value: 0 for k in RelationKind}
        for e in self.hyperedges:
            counts[e.kind.value] += 1
        return counts

    def copy(self) -> "Hypergraph":
        return Hypergraph(self.num_devices, list(self.hyperedges))


def add_hyperedge(g: Hypergraph, members: Iterable[int], weight: float, kind) -> int:
    return g.add_hyperedge(members, weight, kind)


def device_degrees(g: Hypergraph) -> np.ndarray:
    return g.device_degrees()


def hyperedge_degrees(g: Hypergraph) -> np.ndarray:
    return g.hyperedge_degrees()


def union(graphs: Sequence[Hypergraph]) -> Hypergraph:
    """Concatenate hyperedge lists, merging duplicates within each kind."""
    if not graphs:
        raise HypergraphError("union of an empty list of hypergraphs")
    n = graphs[0].num_devices
    for g in graphs[1:]:
        if g.num_devices != n:
            raise HypergraphError(
                f"cannot union hypergraphs over {n} and {g.num_devices} devices"
            )
    out = Hypergraph(n)
    for g in graphs:
        for e in g.hyperedges:
            out.add_hyperedge(e.members, e.weight, e.kind)
    return out
