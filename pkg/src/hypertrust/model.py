"""Parameter-sharing hypergraph network: device -> hyperedge -> device per layer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .augment import AugmentedView
from .rng import make_rng

ACTIVATIONS = {
    "relu": ad.relu,
    "leaky_relu": ad.leaky_relu,
    "tanh": ad.tanh,
    "identity": lambda v: v,
}


@dataclass
class EmbeddingPair:
    devices: np.ndarray  # |A| x d
    hyperedges: np.ndarray  # |E| x d


@dataclass
class HgnnParams:
    """Per layer a (theta_e, theta_a) pair; theta_e is d_in x d_out, theta_a d_out x d_out."""

    layers: list[tuple[np.ndarray, np.ndarray]]
    activation: str = "relu"

    @classmethod
    def init(cls, in_dim: int, dims: list[int] | int, num_layers: int = 2, seed: int = 0,
             activation: str = "relu") -> "HgnnParams":
        if isinstance(dims, int):
            dims = [dims] * num_layers
        if not dims or min(dims) < 1:
            raise ValueError("layer widths must be >= 1")
        rng = make_rng(seed, "hgnn-init")
        layers = []
        fan_in = in_dim
        for width in dims:
            layers.append((_glorot(rng, fan_in, width), _glorot(rng, width, width)))
            fan_in = width
        return cls(layers, activation)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def out_dim(self) -> int:
        return self.layers[-1][1].shape[1]

    def as_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (te, ta) in enumerate(self.layers):
            out[f"layer{i}.theta_e"] = te
            out[f"layer{i}.theta_a"] = ta
        return out

    @classmethod
    def from_dict(cls, values: Mapping[str, np.ndarray], activation: str = "relu") -> "HgnnParams":
        n = len(values) // 2
        layers = [
            (np.asarray(values[f"layer{i}.theta_e"]), np.asarray(values[f"layer{i}.theta_a"]))
            for i in range(n)
        ]
        return cls(layers, activation)

    def validate(self) -> None:
        for i, (te, ta) in enumerate(self.layers):
            if ta.shape != (te.shape[1], te.shape[1]):
                raise ad.ShapeError(f"layer {i}: theta_a {ta.shape} does not match theta_e {te.shape}")
            if i and te.shape[0] != self.layers[i - 1][1].shape[1]:
                raise ad.ShapeError(f"layer {i}: input width {te.shape[0]} breaks the layer chain")


def _glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def layer_forward(view: AugmentedView, x_a, theta_e, theta_a, activation: str = "relu",
                  to_edges: ad.SparseMatrix | None = None, to_devices: ad.SparseMatrix | None = None):
    """One layer. Returns ``(x_e, x_a)`` as Vars.

    x_e = act(D_e^-1 H^T x_a theta_e);  x_a' = act(D_a^-1 H W x_e theta_a)
    """
    act = ACTIVATIONS[activation]
    to_edges = to_edges or view.to_hyperedges()
    to_devices = to_devices or view.to_devices()
    # multiply before aggregating on the device side and after on the
    # hyperedge side; both keep the dense product on the |A|-row matrix
    x_e = act(ad.spmm(to_edges, ad.matmul(x_a, theta_e)))
    x_a_next = act(ad.matmul(ad.spmm(to_devices, x_e), theta_a))
    return x_e, x_a_next


def forward_vars(view: AugmentedView, params: Mapping[str, ad.Var], activation: str = "relu"):
    """Forward pass on Vars (recorded when a tape is active)."""
    to_edges, to_devices = view.to_hyperedges(), view.to_devices()
    x_a = ad.as_var(view.features)
    x_e = None
    n_layers = len(params) // 2
    for i in range(n_layers):
        x_e, x_a = layer_forward(
            view, x_a, params[f"layer{i}.theta_e"], params[f"layer{i}.theta_a"], activation,
            to_edges, to_devices,
        )
    return x_a, x_e


def forward(view: AugmentedView, params: HgnnParams) -> EmbeddingPair:
    params.validate()
    if view.features.shape[1] != params.layers[0][0].shape[0]:
        raise ad.ShapeError(
            f"feature width {view.features.shape[1]} != input width {params.layers[0][0].shape[0]}"
        )
    x_a, x_e = forward_vars(view, {k: ad.Var(v) for k, v in params.as_dict().items()}, params.activation)
    return EmbeddingPair(x_a.value, x_e.value)


def one_hot_features(num_devices: int) -> np.ndarray:
    return np.eye(num_devices)
