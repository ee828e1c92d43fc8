"""Affine coupling flow mapping representation space z to generation space z0.

Block k acts as

    y = b*z + (1-b) * (z * exp(s(b*z)) + t(b*z))

so the masked coordinates pass through and the others are scaled and
shifted by functions of the masked ones.  The Jacobian is triangular and its
log-determinant is the sum of ``s`` over the transformed ``(1-b)``
coordinates.  The forward map applies the last block first:
``g(z) = g_1(g_2(...g_K(z)))``.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from . import diffcore as dc
from .netlib import Mlp, ShapeError, init_params, mlp_forward, zero_params

LOG_2PI = float(np.log(2.0 * np.pi))


def checkerboard(latent_dim: int, parity: int) -> np.ndarray:
    """Mask (1,0,1,...) for parity 0 and (0,1,0,...) for parity 1."""
    return ((np.arange(latent_dim) + parity) % 2 == 0).astype(np.float64)


@dataclass(frozen=True)
class CouplingBlock:
    mask: np.ndarray
    scale_net: Mlp
    translate_net: Mlp
    s_max: float = 2.0

    def __post_init__(self):
        m = np.asarray(self.mask)
        if not np.all((m == 0) | (m == 1)) or m.min() != 0 or m.max() != 1:
            raise ValueError("mask needs both a 0 and a 1 entry and nothing else")

    @property
    def latent_dim(self) -> int:
        return len(self.mask)

    def param_names(self) -> list[str]:
        return self.scale_net.param_names() + self.translate_net.param_names()


@dataclass(frozen=True)
class DecoupledPrior:
    """Ordered blocks g_1..g_K; an empty stack is the identity map."""

    latent_dim: int
    blocks: tuple[CouplingBlock, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for blk in self.blocks:
            if blk.latent_dim != self.latent_dim:
                raise ShapeError("every block must act on the prior's latent dimension")

    @classmethod
    def build(
        cls,
        latent_dim: int,
        n_blocks: int = 4,
        width: int = 64,
        s_max: float = 2.0,
        prefix: str = "flow",
    ) -> "DecoupledPrior":
        if latent_dim < 2 and n_blocks > 0:
            raise ValueError("coupling layers need at least two latent dimensions")
        blocks = []
        for k in range(n_blocks):
            sizes = (latent_dim, width, width, latent_dim)
            blocks.append(
                CouplingBlock(
                    mask=checkerboard(latent_dim, k % 2),
                    scale_net=Mlp.build(f"{prefix}.{k}.s", sizes, hidden="leaky-relu"),
                    translate_net=Mlp.build(f"{prefix}.{k}.t", sizes, hidden="leaky-relu"),
                    s_max=s_max,
                )
            )
        return cls(latent_dim, tuple(blocks))

    def init_params(self, store: dc.ParamStore, seed: int) -> dc.ParamStore:
        for k, blk in enumerate(self.blocks):
            init_params(blk.scale_net, store, seed * 1000 + 2 * k)
            init_params(blk.translate_net, store, seed * 1000 + 2 * k + 1)
        return store

    def set_identity(self, store: dc.ParamStore) -> None:
        """Zero every block's networks so that s = t = 0."""
        for blk in self.blocks:
            zero_params(blk.scale_net, store)
            zero_params(blk.translate_net, store)

    def param_names(self) -> list[str]:
        return [n for blk in self.blocks for n in blk.param_names()]


def _nets(block: CouplingBlock, params: Mapping, masked):
    s = block.s_max * dc.tanh(mlp_forward(block.scale_net, params, masked))
    t = mlp_forward(block.translate_net, params, masked)
    return s, t


def _check_dim(x, latent_dim: int) -> None:
    if dc.value_of(x).shape[-1] != latent_dim:
        raise ShapeError(f"expected latent dimension {latent_dim}, got {dc.value_of(x).shape}")


def coupling_forward(block: CouplingBlock, params: Mapping, z, with_log_det: bool = False):
    """One block z_k -> z_{k-1}; optionally also its log-determinant."""
    _check_dim(z, block.latent_dim)
    b = block.mask
    s, t = _nets(block, params, z * b)
    out = z * b + (1.0 - b) * (z * dc.exp(s) + t)
    if not with_log_det:
        return out
    return out, dc.sum_(s * (1.0 - b), axis=-1)


def coupling_inverse(block: CouplingBlock, params: Mapping, y):
    _check_dim(y, block.latent_dim)
    b = block.mask
    s, t = _nets(block, params, y * b)
    return y * b + (1.0 - b) * ((y - t) * dc.exp(-s))


def flow_forward(prior: DecoupledPrior, params: Mapping, z):
    """Map z to (z0, log|det dz0/dz|); batches map row-wise."""
    _check_dim(z, prior.latent_dim)
    zv = dc.value_of(z)
    log_det = np.zeros(zv.shape[:-1])
    h = z
    for blk in reversed(prior.blocks):
        h, ld = coupling_forward(blk, params, h, with_log_det=True)
        log_det = log_det + ld
    return h, log_det


def flow_inverse(prior: DecoupledPrior, params: Mapping, z0):
    """Map z0 back to z by inverting blocks 1..K in turn."""
    _check_dim(z0, prior.latent_dim)
    h = z0
    for blk in prior.blocks:
        h = coupling_inverse(blk, params, h)
    return h


def std_normal_log_density(z):
    """Row-wise log N(z; 0, I)."""
    d = dc.value_of(z).shape[-1]
    return -0.5 * d * LOG_2PI - 0.5 * dc.sum_(dc.square(z), axis=-1)


def prior_log_density(prior: DecoupledPrior, params: Mapping, z):
    """log p(z) = log N(g(z); 0, I) + log|det dg/dz|."""
    z0, log_det = flow_forward(prior, params, z)
    return std_normal_log_density(z0) + log_det
