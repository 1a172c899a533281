"""Full-batch self-supervised training loop."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .augment import clean_view, make_views
from .hypergraph import Hypergraph
from .model import ACTIVATIONS, EmbeddingPair, HgnnParams, forward, forward_vars, one_hot_features
from .objective import LossBreakdown, LossWeights, total_loss
from .optim import AdamState, adam_step
from .rng import make_rng

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    def __init__(self, epoch: int, last: LossBreakdown | None):
        super().__init__(f"non-finite loss at epoch {epoch}; last finite breakdown: {last}")
        self.epoch = epoch
        self.last = last


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 1e-3
    p_a: float = 0.5
    p_h: float = 0.5
    lambda_dev: float = 0.0002
    lambda_hyp: float = 0.0035
    lambda1: float = 1.0
    lambda2: float = 0.05
    layers: int = 2
    dim: int = 512
    seed: int = 0
    weight_decay: float = 1e-5
    activation: str = "relu"

    def validate(self) -> None:
        for name in ("p_a", "p_h"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.dim < 1 or self.layers < 1:
            raise ValueError("dim and layers must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        for name in ("lambda_dev", "lambda_hyp", "lambda1", "lambda2", "weight_decay"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; choose from {sorted(ACTIVATIONS)}")

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.lambda_dev, self.lambda_hyp, self.lambda1, self.lambda2)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values) -> "TrainConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            default = getattr(cls(), key)
            kwargs[key] = type(default)(raw) if not isinstance(default, str) else str(raw)
        return cls(**kwargs)


@dataclass
class TrainReport:
    history: list[LossBreakdown]
    params: HgnnParams
    duration: float
    config: TrainConfig
    seed: int = field(init=False)

    def __post_init__(self):
        self.seed = self.config.seed


def init_params(g: Hypergraph, config: TrainConfig, features: np.ndarray | None = None) -> HgnnParams:
    in_dim = g.num_devices if features is None else features.shape[1]
    return HgnnParams.init(in_dim, config.dim, config.layers, seed=config.seed, activation=config.activation)


def loss_and_grads(g, x, params: dict[str, np.ndarray], config: TrainConfig, rng):
    """One stochastic evaluation: draw two views, forward both with the same
    parameters, return ``(breakdown, grads)``."""
    v1, v2 = make_views(g, x, config.p_a, config.p_h, rng)
    with ad.Tape() as tape:
        theta = {k: tape.parameter(k, v) for k, v in params.items()}
        a1, e1 = forward_vars(v1, theta, config.activation)
        a2, e2 = forward_vars(v2, theta, config.activation)
        total, breakdown = total_loss((a1, a2), (e1, e2), theta.values(), config.loss_weights)
        if not math.isfinite(breakdown.total):
            return breakdown, None
        grads = tape.backward(total)
    return breakdown, grads


def train(g: Hypergraph, config: TrainConfig | None = None, features: np.ndarray | None = None,
          params: HgnnParams | None = None, on_epoch=None) -> TrainReport:
    """Train from ``params`` (fresh init when omitted).

    ``on_epoch(epoch, breakdown, values)`` is called after each optimizer step.
    """
    config = config or TrainConfig()
    config.validate()
    if g.num_devices < 2 or g.num_hyperedges < 2:
        raise ValueError("training needs at least 2 devices and 2 hyperedges")
    x = one_hot_features(g.num_devices) if features is None else np.asarray(features, dtype=np.float64)
    params = params or init_params(g, config, x)
    values = {k: v.copy() for k, v in params.as_dict().items()}
    state = AdamState(lr=config.lr, weight_decay=config.weight_decay)
    history: list[LossBreakdown] = []

    start = time.perf_counter()
    for epoch in range(config.epochs):
        rng = make_rng(config.seed, "views", epoch)
        breakdown, grads = loss_and_grads(g, x, values, config, rng)
        if grads is None or not all(np.isfinite(gr).all() for gr in grads.values()):
            raise TrainingError(epoch, history[-1] if history else None)
        history.append(breakdown)
        values = adam_step(values, grads, state)
        if on_epoch is not None:
            on_epoch(epoch, breakdown, values)
        if epoch % 50 == 0 or epoch == config.epochs - 1:
            log.info("epoch %d total %.6g", epoch, breakdown.total)
    duration = time.perf_counter() - start
    return TrainReport(history, HgnnParams.from_dict(values, config.activation), duration, config)


def infer_embeddings(g: Hypergraph, params: HgnnParams, features: np.ndarray | None = None) -> EmbeddingPair:
    """Forward pass on the un-masked graph."""
    x = one_hot_features(g.num_devices) if features is None else features
    return forward(clean_view(g, x), params)
