"""Dense layers and MLPs whose parameters live in a :class:`ParamStore`.

Networks are descriptions (names, shapes, activations); the numbers are
looked up in a parameter mapping at call time.  That mapping can be the
store itself (plain evaluation) or the leaves bound on a tape (training,
gradient checks).
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from . import diffcore as dc

ACTIVATIONS = ("linear", "relu", "leaky-relu", "tanh")


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class DenseLayer:
    name: str
    n_in: int
    n_out: int
    activation: str = "linear"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.n_in < 1 or self.n_out < 1:
            raise ValueError("layer dimensions must be positive")

    @property
    def weight(self) -> str:
        return f"{self.name}.W"

    @property
    def bias(self) -> str:
        return f"{self.name}.b"


@dataclass(frozen=True)
class Mlp:
    layers: tuple[DenseLayer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("an Mlp needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise ShapeError(f"{a.name} outputs {a.n_out} but {b.name} takes {b.n_in}")

    @classmethod
    def build(cls, prefix: str, sizes: Sequence[int], hidden: str = "relu", output: str = "linear") -> "Mlp":
        """Chain of dense layers ``sizes[0] -> ... -> sizes[-1]``."""
        n = len(sizes) - 1
        layers = tuple(
            DenseLayer(f"{prefix}.{i}", sizes[i], sizes[i + 1], output if i == n - 1 else hidden)
            for i in range(n)
        )
        return cls(layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def param_names(self) -> list[str]:
        return [n for layer in self.layers for n in (layer.weight, layer.bias)]


def _activate(h, activation: str):
    if activation == "relu":
        return dc.relu(h)
    if activation == "leaky-relu":
        return dc.leaky_relu(h)
    if activation == "tanh":
        return dc.tanh(h)
    return h


def mlp_forward(net: Mlp, params: Mapping, x):
    """Apply ``net`` to a vector or a batch of row vectors.

    Each layer computes ``act(x @ W.T + b)`` with ``W`` stored out x in.
    """
    xv = dc.value_of(x)
    single = xv.ndim == 1
    if xv.shape[-1] != net.n_in:
        raise ShapeError(f"input has {xv.shape[-1]} features, network expects {net.n_in}")
    h = dc.reshape(x, (1, -1)) if single else x
    for layer in net.layers:
        h = dc.dense(h, params[layer.weight], params[layer.bias])
        h = _activate(h, layer.activation)
    return dc.reshape(h, (net.n_out,)) if single else h


def init_params(net: Mlp, store: dc.ParamStore, seed: int) -> dc.ParamStore:
    """Add ``net``'s parameters to ``store``: uniform fan-sum weights, zero biases."""
    rng = np.random.default_rng(seed)
    for layer in net.layers:
        a = np.sqrt(6.0 / (layer.n_in + layer.n_out))
        store.add(layer.weight, rng.uniform(-a, a, size=(layer.n_out, layer.n_in)))
        store.add(layer.bias, np.zeros(layer.n_out))
    return store


def zero_params(net: Mlp, store: dc.ParamStore) -> None:
    for name in net.param_names():
        store[name] = 0.0
