"""Stochastic views of a hypergraph: device masking and membership masking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import SparseMatrix, diag_inverse
from .hypergraph import Hypergraph

DEGREE_EPS = 1e-12


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"masking probability must lie in [0, 1], got {p}")
    return p


@dataclass
class MaskedIncidence:
    """Surviving memberships of an incidence matrix, as coordinate lists."""

    devices: np.ndarray
    edges: np.ndarray
    shape: tuple[int, int]

    def toarray(self) -> np.ndarray:
        h = np.zeros(self.shape)
        h[self.devices, self.edges] = 1.0
        return h


def mask_devices(x: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    """Zero each row of ``x`` independently with probability ``p``."""
    p = _check_p(p)
    x = np.asarray(x, dtype=np.float64)
    keep = rng.random(x.shape[0]) >= p
    return x * keep[:, None]


def mask_memberships(g: Hypergraph, p: float, rng: np.random.Generator) -> MaskedIncidence:
    """Drop each device-hyperedge membership independently with probability ``p``."""
    p = _check_p(p)
    dev, edg = g.memberships()
    keep = rng.random(dev.size) >= p
    return MaskedIncidence(dev[keep], edg[keep], (g.num_devices, g.num_hyperedges))


@dataclass
class AugmentedView:
    features: np.ndarray
    incidence: MaskedIncidence
    weights: np.ndarray
    device_degrees: np.ndarray
    hyperedge_degrees: np.ndarray

    @classmethod
    def from_parts(cls, features, incidence: MaskedIncidence, weights) -> "AugmentedView":
        n_dev, n_edge = incidence.shape
        weights = np.asarray(weights, dtype=np.float64)
        dev_deg = np.bincount(incidence.devices, weights=weights[incidence.edges], minlength=n_dev)
        edge_deg = np.bincount(incidence.edges, minlength=n_edge).astype(np.float64)
        return cls(np.asarray(features, dtype=np.float64), incidence, weights, dev_deg, edge_deg)

    @property
    def num_devices(self) -> int:
        return self.incidence.shape[0]

    @property
    def num_hyperedges(self) -> int:
        return self.incidence.shape[1]

    def to_hyperedges(self) -> SparseMatrix:
        """``D_e^-1 H^T`` (hyperedges x devices)."""
        inc = self.incidence
        data = diag_inverse(self.hyperedge_degrees, DEGREE_EPS)[inc.edges]
        # member sums must not depend on device labels
        return SparseMatrix(
            inc.edges, inc.devices, data, (self.num_hyperedges, self.num_devices), sorted_sums=True
        )

    def to_devices(self) -> SparseMatrix:
        """``D_a^-1 H W`` (devices x hyperedges)."""
        inc = self.incidence
        data = diag_inverse(self.device_degrees, DEGREE_EPS)[inc.devices] * self.weights[inc.edges]
        return SparseMatrix(inc.devices, inc.edges, data, (self.num_devices, self.num_hyperedges))


def clean_view(g: Hypergraph, x: np.ndarray) -> AugmentedView:
    dev, edg = g.memberships()
    return AugmentedView.from_parts(x, MaskedIncidence(dev, edg, (g.num_devices, g.num_hyperedges)), g.weights)


def make_view(g: Hypergraph, x: np.ndarray, p_a: float, p_h: float, rng: np.random.Generator) -> AugmentedView:
    feats = mask_devices(x, p_a, rng)
    inc = mask_memberships(g, p_h, rng)
    return AugmentedView.from_parts(feats, inc, g.weights)


def make_views(g: Hypergraph, x: np.ndarray, p_a: float, p_h: float, rng: np.random.Generator):
    return make_view(g, x, p_a, p_h, rng), make_view(g, x, p_a, p_h, rng)
