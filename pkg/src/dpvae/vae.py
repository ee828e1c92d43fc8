"""Gaussian encoder/decoder pair and the two KL terms."""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .flow import LOG_2PI, DecoupledPrior, flow_forward, flow_inverse, prior_log_density, std_normal_log_density
from .netlib import Mlp, ShapeError, init_params, mlp_forward

PRIOR_MODES = ("standard", "decoupled")


@dataclass
class GaussianPosterior:
    """Diagonal Gaussian q(z|x); rows index data points when batched."""

    mu: object
    log_var: object

    @property
    def latent_dim(self) -> int:
        return dc.value_of(self.mu).shape[-1]


@dataclass(frozen=True)
class MonteCarloSpec:
    n_samples: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")

    def draw(self, shape: tuple) -> np.ndarray:
        """Standard-normal noise of shape ``(n_samples, *shape)``."""
        return np.random.default_rng(self.seed).standard_normal((self.n_samples, *shape))


@dataclass(frozen=True)
class VaeModel:
    encoder: Mlp
    decoder: Mlp
    prior_mode: str = "standard"
    prior: DecoupledPrior | None = None
    obs_std: float = 1.0

    def __post_init__(self):
        if self.prior_mode not in PRIOR_MODES:
            raise ValueError(f"prior_mode must be one of {PRIOR_MODES}")
        if self.encoder.n_out != 2 * self.decoder.n_in:
            raise ShapeError("encoder must output mean and log-variance for each latent")
        if self.prior_mode == "decoupled":
            if self.prior is None or self.prior.latent_dim != self.latent_dim:
                raise ShapeError("decoupled mode needs a prior over the model's latent space")
        if self.obs_std <= 0:
            raise ValueError("obs_std must be positive")

    @property
    def latent_dim(self) -> int:
        return self.decoder.n_in

    @property
    def data_dim(self) -> int:
        return self.encoder.n_in

    @property
    def decoupled(self) -> bool:
        return self.prior_mode == "decoupled"

    @classmethod
    def build(
        cls,
        data_dim: int = 2,
        latent_dim: int = 2,
        hidden: Sequence[int] = (100, 50),
        prior_mode: str = "standard",
        flow_blocks: int = 4,
        flow_width: int = 64,
        s_max: float = 2.0,
        obs_std: float = 1.0,
    ) -> "VaeModel":
        """Encoder data->hidden->(mu, log_var); the decoder mirrors it."""
        enc = Mlp.build("enc", (data_dim, *hidden, 2 * latent_dim))
        dec = Mlp.build("dec", (latent_dim, *reversed(hidden), data_dim))
        prior = None
        if prior_mode == "decoupled":
            prior = DecoupledPrior.build(latent_dim, flow_blocks, flow_width, s_max)
        return cls(enc, dec, prior_mode, prior, obs_std)

    def init_params(self, seed: int) -> dc.ParamStore:
        store = dc.ParamStore()
        init_params(self.encoder, store, seed * 1000 + 1)
        init_params(self.decoder, store, seed * 1000 + 2)
        if self.prior is not None:
            self.prior.init_params(store, seed + 7919)
        return store


def encode(model: VaeModel, params: Mapping, x) -> GaussianPosterior:
    h = mlp_forward(model.encoder, params, x)
    L = model.latent_dim
    return GaussianPosterior(h[..., :L], h[..., L:])


def reparameterize(post: GaussianPosterior, eps):
    """z = mu + exp(log_var / 2) * eps; eps may carry leading sample axes."""
    return post.mu + dc.exp(0.5 * post.log_var) * eps


def decode(model: VaeModel, params: Mapping, z):
    if dc.value_of(z).shape[-1] != model.latent_dim:
        raise ShapeError(f"latent has {dc.value_of(z).shape[-1]} dims, model expects {model.latent_dim}")
    return mlp_forward(model.decoder, params, z)


def recon_log_likelihood(x_mean, x, obs_std: float = 1.0):
    """Row-wise log N(x; x_mean, obs_std^2 I)."""
    d = dc.value_of(x).shape[-1]
    if dc.value_of(x_mean).shape[-1] != d:
        raise ShapeError("x and x_mean differ in length")
    var = obs_std * obs_std
    const = -0.5 * d * (LOG_2PI + np.log(var))
    return const - 0.5 * dc.sum_(dc.square(x - x_mean), axis=-1) / var


def kl_standard(post: GaussianPosterior):
    """Closed-form KL(q || N(0, I)), one value per row."""
    terms = dc.square(post.mu) + dc.exp(post.log_var) - post.log_var - 1.0
    return 0.5 * dc.sum_(terms, axis=-1)


def _flat_samples(post: GaussianPosterior, eps):
    """Draws of shape (S, B, L), flattened for the flow."""
    eps = np.asarray(eps, dtype=np.float64)
    mu = dc.value_of(post.mu)
    if eps.shape == mu.shape:
        eps = eps[None]
    z = reparameterize(post, eps)
    S = eps.shape[0]
    return dc.reshape(z, (-1, mu.shape[-1])), S, mu.shape[:-1]


def as_noise(mc, shape: tuple) -> np.ndarray:
    """Accept either a MonteCarloSpec or pre-drawn noise."""
    if isinstance(mc, MonteCarloSpec):
        return mc.draw(shape)
    return np.asarray(mc, dtype=np.float64)


def kl_decoupled(post: GaussianPosterior, prior: DecoupledPrior, params: Mapping, mc):
    """Monte-Carlo KL(q(z|x) || p(z)) under the flow prior.

    -L/2 - 1/2 log|Sigma| + 1/2 E[g(z)^T g(z)] - E[log det], with the
    expectations averaged over the supplied draws (``mc`` is a
    :class:`MonteCarloSpec` or noise of shape (S, *mu.shape) / mu.shape).
    """
    mu = dc.value_of(post.mu)
    eps = as_noise(mc, mu.shape)
    z, S, batch = _flat_samples(post, eps)
    z0, log_det = flow_forward(prior, params, z)
    half_sq = dc.reshape(0.5 * dc.sum_(dc.square(z0), axis=-1), (S, *batch))
    log_det = dc.reshape(log_det, (S, *batch))
    L = mu.shape[-1]
    return -0.5 * L - 0.5 * dc.sum_(post.log_var, axis=-1) + dc.mean(half_sq - log_det, axis=0)


def kl_decoupled_entropy_form(post: GaussianPosterior, prior: DecoupledPrior, params: Mapping, mc):
    """Same KL written as -H(q) - E[log p(z)]; shares draws with kl_decoupled."""
    mu = dc.value_of(post.mu)
    eps = as_noise(mc, mu.shape)
    z, S, batch = _flat_samples(post, eps)
    L = mu.shape[-1]
    entropy = 0.5 * L * (1.0 + LOG_2PI) + 0.5 * dc.sum_(post.log_var, axis=-1)
    log_p = dc.reshape(prior_log_density(prior, params, z), (S, *batch))
    return -entropy - dc.mean(log_p, axis=0)


def kl_term(model: VaeModel, params: Mapping, post: GaussianPosterior, eps):
    """Per-row KL against the model's prior (closed form when standard)."""
    if model.decoupled:
        return kl_decoupled(post, model.prior, params, eps)
    return kl_standard(post)


def log_prior(model: VaeModel, params: Mapping, z):
    """Row-wise log p(z) for the model's prior."""
    if model.decoupled:
        return prior_log_density(model.prior, params, z)
    return std_normal_log_density(z)


def to_generation_space(model: VaeModel, params: Mapping, z):
    """h(z): identity for a standard prior, the flow for a decoupled one."""
    if model.decoupled:
        return flow_forward(model.prior, params, z)[0]
    return z


def from_generation_space(model: VaeModel, params: Mapping, z0):
    if model.decoupled:
        return flow_inverse(model.prior, params, z0)
    return z0


def gaussian_log_density(z, mu, log_var):
    """Row-wise log N(z; mu, diag(exp(log_var))) on plain arrays."""
    z, mu, log_var = (np.asarray(a, dtype=np.float64) for a in (z, mu, log_var))
    return -0.5 * np.sum(LOG_2PI + log_var + (z - mu) ** 2 * np.exp(-log_var), axis=-1)
