"""Cosine trust between device embeddings and collaborator selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class TrustRanking:
    initiator: int
    entries: list[tuple[int, float]]  # (device id, trust), best first

    def top(self, k: int) -> list[tuple[int, float]]:
        return self.entries[:k]

    @property
    def ids(self) -> list[int]:
        return [d for d, _ in self.entries]


def trust(x_i, x_j) -> float:
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    ni, nj = np.linalg.norm(x_i), np.linalg.norm(x_j)
    if ni == 0.0 or nj == 0.0:
        log.warning("zero-norm embedding; trust set to 0")
        return 0.0
    return float(np.clip(np.dot(x_i / ni, x_j / nj), -1.0, 1.0))


def trust_vector(x: np.ndarray, initiator: int) -> np.ndarray:
    """Trust of ``initiator`` in every device (its own entry included)."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    u = x / np.where(norms > 0.0, norms, 1.0)[:, None]
    t = u @ u[initiator]
    t[(norms == 0.0) | (norms[initiator] == 0.0)] = 0.0
    if norms[initiator] == 0.0 or (norms == 0.0).any():
        log.warning("zero-norm embedding(s); their trust is set to 0")
    return np.clip(t, -1.0, 1.0)


def _device_matrix(x) -> np.ndarray:
    return np.asarray(getattr(x, "devices", x), dtype=np.float64)


def rank(initiator: int, x) -> TrustRanking:
    """All other devices by descending trust; ties go to the lower id."""
    x = _device_matrix(x)
    n = x.shape[0]
    if not 0 <= initiator < n:
        raise ValueError(f"initiator {initiator} not in [0, {n})")
    t = trust_vector(x, initiator)
    others = [j for j in range(n) if j != initiator]
    order = sorted(others, key=lambda j: (-t[j], j))
    return TrustRanking(initiator, [(j, float(t[j])) for j in order])


def select_collaborator(initiator: int, x) -> int:
    x = _device_matrix(x)
    if x.shape[0] < 2:
        raise ValueError("collaborator selection needs at least 2 devices")
    return rank(initiator, x).entries[0][0]
