"""Training objectives (negative ELBOs) for the vanilla and regularized VAEs.

Every objective returns a :class:`LossBreakdown` whose ``total`` is the
quantity to minimize.  ``recon`` is the batch-mean reconstruction
log-likelihood (so it enters the total with a minus sign) and ``kl`` the
batch-mean KL(q(z|x) || p(z)) for the model's prior mode.  ``extra`` holds
the regularizer-specific weighted term:

=========  ===============================================  ==================
kind       total                                            extra
=========  ===============================================  ==================
vanilla    -recon + kl                                      0
beta-H     -recon + beta*kl                                 0
beta-B     -recon + gamma*|kl - C(step)|                    gamma*|kl - C|
factor     -recon + kl + gamma*TC                           gamma*TC
beta-tc    -recon + alpha*MI + beta*TC + gamma*DWKL         beta*TC
info       -recon + (1-alpha)*kl + (alpha+lambda-1)*MMD     (alpha+lambda-1)*MMD
=========  ===============================================  ==================

For beta-tc, ``kl`` is the minibatch-weighted estimate MI + TC + DWKL.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field, fields

import numpy as np

from . import diffcore as dc
from .flow import LOG_2PI
from .netlib import Mlp, mlp_forward
from .vae import PRIOR_MODES, VaeModel, decode, encode, from_generation_space, kl_term, log_prior, recon_log_likelihood, reparameterize

KINDS = ("vanilla", "beta-H", "beta-B", "factor", "beta-tc", "info")

# Regularizer hyperparameters used for the image experiments, kept for all runs.
DEFAULTS = {
    "vanilla": {},
    "beta-H": {"beta": 4.0},
    "beta-B": {"gamma": 15.0, "c_max": 25.0, "c_stop": 100000},
    "factor": {"gamma": 1000.0},
    "beta-tc": {"alpha": 1.0, "beta": 4.0, "gamma": 15.0},
    "info": {"alpha": 0.0, "lam": 1000.0},
}


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str = "vanilla"
    beta: float | None = None
    gamma: float | None = None
    alpha: float | None = None
    lam: float | None = None
    c_max: float | None = None
    c_stop: int | None = None
    prior_mode: str = "standard"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}; expected one of {KINDS}")
        if self.prior_mode not in PRIOR_MODES:
            raise ValueError(f"unknown prior mode {self.prior_mode!r}")
        for key, val in DEFAULTS[self.kind].items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, val)
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not np.isfinite(v):
                raise ValueError(f"{f.name} must be finite")
        if self.kind == "beta-B" and self.c_stop < 1:
            raise ValueError("c_stop must be a positive integer")


@dataclass
class LossBreakdown:
    total: object
    recon: object
    kl: object
    extra: object = 0.0
    terms: dict = field(default_factory=dict)

    def values(self) -> dict[str, float]:
        out = {k: float(dc.value_of(getattr(self, k))) for k in ("total", "recon", "kl", "extra")}
        out.update({k: float(dc.value_of(v)) for k, v in self.terms.items()})
        return out


def _check_batch(batch, minimum: int = 1) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[0] < minimum:
        raise ValueError(f"need a batch of at least {minimum} row(s), got shape {batch.shape}")
    return batch


def _forward(model: VaeModel, params: Mapping, batch, eps):
    post = encode(model, params, batch)
    z = reparameterize(post, eps)
    recon = dc.mean(recon_log_likelihood(decode(model, params, z), batch, model.obs_std))
    return post, z, recon


def elbo_vanilla(model: VaeModel, params: Mapping, batch, eps) -> LossBreakdown:
    batch = _check_batch(batch)
    post, z, recon = _forward(model, params, batch, eps)
    kl = dc.mean(kl_term(model, params, post, eps))
    return LossBreakdown(-recon + kl, recon, kl)


def elbo_beta_h(model, params, batch, eps, cfg: ObjectiveConfig) -> LossBreakdown:
    base = elbo_vanilla(model, params, batch, eps)
    return LossBreakdown(-base.recon + cfg.beta * base.kl, base.recon, base.kl)


def capacity(cfg: ObjectiveConfig, step: int) -> float:
    """Linearly annealed KL target C(step) = C_max * min(1, step / C_stop)."""
    return cfg.c_max * min(1.0, step / cfg.c_stop)


def elbo_beta_b(model, params, batch, eps, cfg: ObjectiveConfig, step: int) -> LossBreakdown:
    base = elbo_vanilla(model, params, batch, eps)
    c = capacity(cfg, step)
    extra = cfg.gamma * dc.abs_(base.kl - c)
    return LossBreakdown(-base.recon + extra, base.recon, base.kl, extra, {"capacity": c})


# --- FactorVAE ---------------------------------------------------------------


def discriminator(latent_dim: int, width: int = 1000, depth: int = 5) -> Mlp:
    """``depth`` leaky-ReLU layers of ``width`` units, then two logits."""
    return Mlp.build("disc", (latent_dim, *([width] * depth), 2), hidden="leaky-relu")


def permute_dims(z, rng: np.random.Generator) -> np.ndarray:
    """Shuffle each latent coordinate independently across the batch."""
    z = np.asarray(dc.value_of(z))
    out = np.empty_like(z)
    for d in range(z.shape[1]):
        out[:, d] = z[rng.permutation(z.shape[0]), d]
    return out


def tc_estimate(disc: Mlp, disc_params: Mapping, z):
    """Density-ratio estimate of total correlation: mean(logit_joint - logit_perm)."""
    logits = mlp_forward(disc, disc_params, z)
    return dc.mean(logits[:, 1] - logits[:, 0])


def discriminator_step(disc: Mlp, disc_params: Mapping, z_joint, z_perm):
    """Softmax cross-entropy with joint samples labeled 1, permuted ones 0."""
    if len(dc.value_of(z_joint)) < 2 or len(dc.value_of(z_perm)) < 2:
        raise ValueError("the discriminator needs batches of at least two samples")
    lj = mlp_forward(disc, disc_params, z_joint)
    lp = mlp_forward(disc, disc_params, z_perm)
    nll_joint = dc.logsumexp(lj, axis=1) - lj[:, 1]
    nll_perm = dc.logsumexp(lp, axis=1) - lp[:, 0]
    return dc.mean(dc.concat([nll_joint, nll_perm], axis=0))


def elbo_factor(model, params, batch, eps, cfg: ObjectiveConfig, disc: Mlp | None, disc_params: Mapping | None) -> LossBreakdown:
    if disc is None or disc_params is None:
        raise ValueError("the factor objective needs a discriminator")
    batch = _check_batch(batch)
    post, z, recon = _forward(model, params, batch, eps)
    kl = dc.mean(kl_term(model, params, post, eps))
    tc = tc_estimate(disc, disc_params, z)
    extra = cfg.gamma * tc
    return LossBreakdown(-recon + kl + extra, recon, kl, extra, {"tc": tc})


# --- beta-TCVAE --------------------------------------------------------------


def _pairwise_log_q(z, post):
    """log q(z_i[d] | x_j) for every sample i, datum j and coordinate d."""
    B, L = dc.value_of(z).shape
    zi = dc.reshape(z, (B, 1, L))
    mu = dc.reshape(post.mu, (1, B, L))
    lv = dc.reshape(post.log_var, (1, B, L))
    return -0.5 * (LOG_2PI + lv + dc.square(zi - mu) * dc.exp(-lv))


def mws_terms(model, params, post, z, dataset_size: int):
    """Minibatch-weighted-sampling estimates of (MI, TC, DWKL).

    The three terms telescope: their sum is the single-sample estimate of
    E[log q(z|x) - log p(z)].  The dimension-wise term is
    E[log prod_j q(z_j) - log p(z)] with the prior evaluated on the whole
    vector, which is what a coupled flow prior allows.
    """
    B = dc.value_of(z).shape[0]
    log_nm = np.log(dataset_size * B)
    lq = _pairwise_log_q(z, post)
    log_qzx = dc.sum_(-0.5 * (LOG_2PI + post.log_var + dc.square(z - post.mu) * dc.exp(-post.log_var)), axis=1)
    log_qz = dc.logsumexp(dc.sum_(lq, axis=2), axis=1) - log_nm
    log_prod = dc.sum_(dc.logsumexp(lq, axis=1) - log_nm, axis=1)
    log_pz = log_prior(model, params, z)
    mi = dc.mean(log_qzx - log_qz)
    tc = dc.mean(log_qz - log_prod)
    dwkl = dc.mean(log_prod - log_pz)
    return mi, tc, dwkl


def elbo_beta_tc(model, params, batch, eps, cfg: ObjectiveConfig, dataset_size: int) -> LossBreakdown:
    batch = _check_batch(batch, minimum=2)
    if dataset_size < len(batch):
        raise ValueError("dataset_size must be at least the batch size")
    post, z, recon = _forward(model, params, batch, eps)
    mi, tc, dwkl = mws_terms(model, params, post, z, dataset_size)
    total = -recon + cfg.alpha * mi + cfg.beta * tc + cfg.gamma * dwkl
    return LossBreakdown(total, recon, mi + tc + dwkl, cfg.beta * tc, {"mi": mi, "tc": tc, "dwkl": dwkl})


# --- InfoVAE (MMD) -----------------------------------------------------------


def _sqdist(a, b):
    n, d = dc.value_of(a).shape
    m = dc.value_of(b).shape[0]
    diff = dc.reshape(a, (n, 1, d)) - dc.reshape(b, (1, m, d))
    return dc.sum_(dc.square(diff), axis=2)


def median_bandwidth(a, b) -> float:
    """Median squared distance over distinct pairs of the pooled sample."""
    pooled = np.concatenate([dc.value_of(a), dc.value_of(b)], axis=0)
    sq = np.sum((pooled[:, None, :] - pooled[None, :, :]) ** 2, axis=-1)
    iu = np.triu_indices(len(pooled), k=1)
    h = float(np.median(sq[iu])) if len(iu[0]) else 0.0
    return h if h > 0 else 1.0


def mmd(a, b, bandwidth: float | None = None):
    """Biased (V-statistic) squared MMD with a Gaussian kernel exp(-|x-y|^2 / h).

    ``h`` defaults to the pooled median squared distance and is treated as a
    constant for differentiation.
    """
    va, vb = dc.value_of(a), dc.value_of(b)
    if va.ndim != 2 or vb.ndim != 2 or va.shape[1] != vb.shape[1]:
        raise ValueError(f"mmd needs two batches of equal dimension, got {va.shape} and {vb.shape}")
    if len(va) == 0 or len(vb) == 0:
        raise ValueError("mmd needs non-empty batches")
    h = median_bandwidth(va, vb) if bandwidth is None else bandwidth

    def k(x, y):
        return dc.mean(dc.exp(-1.0 * _sqdist(x, y) / h))

    return k(a, a) + k(b, b) - 2.0 * k(a, b)


def elbo_info(model, params, batch, eps, cfg: ObjectiveConfig, prior_noise, bandwidth: float | None = None) -> LossBreakdown:
    """``prior_noise`` are z0 draws; decoupled models map them through g^-1."""
    batch = _check_batch(batch)
    post, z, recon = _forward(model, params, batch, eps)
    kl = dc.mean(kl_term(model, params, post, eps))
    z_prior = from_generation_space(model, params, np.asarray(prior_noise, dtype=np.float64))
    div = mmd(z, z_prior, bandwidth)
    extra = (cfg.alpha + cfg.lam - 1.0) * div
    return LossBreakdown(-recon + (1.0 - cfg.alpha) * kl + extra, recon, kl, extra, {"mmd": div})


def objective(
    cfg: ObjectiveConfig,
    model: VaeModel,
    params: Mapping,
    batch,
    eps,
    *,
    step: int = 0,
    dataset_size: int | None = None,
    disc: Mlp | None = None,
    disc_params: Mapping | None = None,
    prior_noise=None,
    bandwidth: float | None = None,
) -> LossBreakdown:
    """Dispatch on ``cfg.kind`` with the extra inputs each objective needs."""
    if cfg.kind == "vanilla":
        return elbo_vanilla(model, params, batch, eps)
    if cfg.kind == "beta-H":
        return elbo_beta_h(model, params, batch, eps, cfg)
    if cfg.kind == "beta-B":
        return elbo_beta_b(model, params, batch, eps, cfg, step)
    if cfg.kind == "factor":
        return elbo_factor(model, params, batch, eps, cfg, disc, disc_params)
    if cfg.kind == "beta-tc":
        return elbo_beta_tc(model, params, batch, eps, cfg, dataset_size or len(batch))
    if prior_noise is None:
        raise ValueError("the info objective needs prior_noise")
    return elbo_info(model, params, batch, eps, cfg, prior_noise, bandwidth)
