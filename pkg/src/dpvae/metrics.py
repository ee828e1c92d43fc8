"""Diagnostics of prior / aggregate-posterior mismatch.

All estimators are deterministic in their ``seed``.  Each purpose draws
from its own stream ``default_rng([seed, tag])`` so that, for example, the
prior draws of :func:`skl` do not shift when the posterior draws change.
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import diffcore as dc
from .flow import std_normal_log_density
from .objectives import mmd
from .vae import (
    VaeModel,
    decode,
    encode,
    from_generation_space,
    gaussian_log_density,
    log_prior,
    recon_log_likelihood,
    to_generation_space,
)

_TAGS = {"prior": 11, "posterior": 12, "nll": 13, "leak": 14, "lp": 15, "hp": 16, "gen": 17}


def _rng(seed: int, tag: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng([seed, _TAGS[tag], *extra])


def _values(x) -> np.ndarray:
    return np.asarray(dc.value_of(x))


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n: int
    seed: int

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class AggregatePosterior:
    """Uniform mixture of the per-datum Gaussian posteriors."""

    mu: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        if len(self.mu) < 1:
            raise ValueError("an aggregate posterior needs at least one component")

    @classmethod
    def from_model(cls, model: VaeModel, params: Mapping, data) -> "AggregatePosterior":
        with dc.no_tape():
            post = encode(model, params, as_points(data))
        return cls(_values(post.mu), _values(post.log_var))

    def __len__(self) -> int:
        return len(self.mu)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Pick a component uniformly, then draw from it."""
        idx = rng.integers(len(self.mu), size=n)
        eps = rng.standard_normal((n, self.mu.shape[1]))
        return self.mu[idx] + np.exp(0.5 * self.log_var[idx]) * eps

    def std(self) -> np.ndarray:
        """Per-coordinate standard deviation of the mixture."""
        second = np.mean(self.mu**2 + np.exp(self.log_var), axis=0)
        return np.sqrt(second - np.mean(self.mu, axis=0) ** 2)


def aggregate_posterior_log_density(agg: AggregatePosterior, z, chunk: int = 2_000_000) -> np.ndarray:
    """log q(z) = logsumexp_n log N(z; mu_n, Sigma_n) - log N, row-wise."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[1] != agg.mu.shape[1]:
        raise ValueError(f"z has {z.shape[1]} dims, posterior has {agg.mu.shape[1]}")
    rows = max(1, chunk // (len(agg) * z.shape[1]))
    out = np.empty(len(z))
    for start in range(0, len(z), rows):
        zc = z[start : start + rows, None, :]
        lq = gaussian_log_density(zc, agg.mu[None], agg.log_var[None])
        out[start : start + rows] = logsumexp(lq, axis=1) - np.log(len(agg))
    return out[0] if single else out


def as_points(data) -> np.ndarray:
    return np.asarray(getattr(data, "points", data), dtype=np.float64)


def log_prior_values(model, params, z) -> np.ndarray:
    with dc.no_tape():
        return _values(log_prior(model, params, z))


def log_base_values(model, params, z) -> np.ndarray:
    with dc.no_tape():
        return _values(std_normal_log_density(to_generation_space(model, params, z)))


def sample_prior(model: VaeModel, params: Mapping, n: int, rng: np.random.Generator) -> np.ndarray:
    """z0 ~ N(0, I) mapped into representation space."""
    z0 = rng.standard_normal((n, model.latent_dim))
    with dc.no_tape():
        return _values(from_generation_space(model, params, z0))


def skl(model: VaeModel, params: Mapping, dataset, n: int = 5000, seed: int = 0, agg: AggregatePosterior | None = None) -> Estimate:
    """KL(p || q) + KL(q || p) between prior and aggregate posterior, by sampling."""
    agg = agg or AggregatePosterior.from_model(model, params, dataset)
    zp = sample_prior(model, params, n, _rng(seed, "prior"))
    zq = agg.sample(n, _rng(seed, "posterior"))
    a = log_prior_values(model, params, zp) - aggregate_posterior_log_density(agg, zp)
    b = aggregate_posterior_log_density(agg, zq) - log_prior_values(model, params, zq)
    stderr = np.sqrt(a.var(ddof=1) / n + b.var(ddof=1) / n) if n > 1 else float("inf")
    return Estimate(float(a.mean() + b.mean()), float(stderr), n, seed)


def importance_log_weights(model: VaeModel, params: Mapping, x, n: int, rng: np.random.Generator) -> np.ndarray:
    """log p(x|z_i) + log p(z_i) - log q(z_i|x) for n draws z_i ~ q(z|x)."""
    x = np.asarray(x, dtype=np.float64)
    with dc.no_tape():
        post = encode(model, params, x)
        mu, lv = _values(post.mu), _values(post.log_var)
        z = mu + np.exp(0.5 * lv) * rng.standard_normal((n, len(mu)))
        log_px = _values(recon_log_likelihood(decode(model, params, z), x, model.obs_std))
        return log_px + _values(log_prior(model, params, z)) - gaussian_log_density(z, mu, lv)


def log_marginal_importance(model: VaeModel, params: Mapping, x, n: int, rng: np.random.Generator) -> float:
    """log (1/n) sum_i p(x|z_i) p(z_i) / q(z_i|x) with z_i ~ q(z|x)."""
    return float(logsumexp(importance_log_weights(model, params, x, n, rng)) - np.log(n))


def nll_importance(model: VaeModel, params: Mapping, dataset, n: int = 21000, seed: int = 0) -> Estimate:
    """Mean importance-sampled negative log-likelihood over ``dataset``.

    Datum i uses its own stream, so the result does not depend on how the
    data are chunked.  ``stderr`` is the spread across data points.
    """
    pts = as_points(dataset)
    if len(pts) == 0:
        raise ValueError("nll_importance needs a non-empty dataset")
    nll = np.array([-log_marginal_importance(model, params, x, n, _rng(seed, "nll", i)) for i, x in enumerate(pts)])
    stderr = nll.std(ddof=1) / np.sqrt(len(nll)) if len(nll) > 1 else 0.0
    return Estimate(float(nll.mean()), float(stderr), n, seed)


@dataclass(frozen=True)
class LeakageDraws:
    """Shared posterior draws for evaluating leakage at several thresholds."""

    z: np.ndarray
    log_q: np.ndarray
    log_base: np.ndarray
    log_prior: np.ndarray
    seed: int

    def flagged(self, tau: float, flag: str = "base") -> np.ndarray:
        if flag == "base":
            return self.log_base < tau
        if flag == "prior":
            return self.log_prior < tau
        raise ValueError("flag must be 'base' or 'prior'")

    def score(self, tau: float, flag: str = "base") -> Estimate:
        s = np.where(self.flagged(tau, flag), self.log_q - self.log_base, 0.0)
        n = len(s)
        stderr = s.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
        return Estimate(float(s.mean()), float(stderr), n, self.seed)


def leakage_draws(model: VaeModel, params: Mapping, dataset, n: int, seed: int = 0, agg: AggregatePosterior | None = None) -> LeakageDraws:
    if n < 1:
        raise ValueError("n must be at least 1")
    agg = agg or AggregatePosterior.from_model(model, params, dataset)
    z = agg.sample(n, _rng(seed, "leak"))
    return LeakageDraws(
        z,
        aggregate_posterior_log_density(agg, z),
        log_base_values(model, params, z),
        log_prior_values(model, params, z),
        seed,
    )


def leakage_score(model: VaeModel, params: Mapping, dataset, tau: float, n: int = 5000, seed: int = 0, flag: str = "base") -> Estimate:
    """Mean over q(z) draws of log(q(z) / N(h(z))) where N(h(z)) falls below ``tau``.

    ``flag="prior"`` flags by the change-of-variables prior density instead
    of the base density at h(z); the ratio is unchanged.
    """
    return leakage_draws(model, params, dataset, n, seed).score(tau, flag)


def leakage_curve(model, params, dataset, taus: Sequence[float], n: int = 5000, seed: int = 0, flag: str = "base") -> dict[float, Estimate]:
    draws = leakage_draws(model, params, dataset, n, seed)
    return {float(t): draws.score(t, flag) for t in taus}


@dataclass(frozen=True)
class RankedSamples:
    points: np.ndarray
    scores: np.ndarray
    kind: str


def _lowest(points, scores, k: int, kind: str) -> RankedSamples:
    order = np.argsort(scores, kind="stable")[:k]
    return RankedSamples(points[order], scores[order], kind)


def low_posterior_samples(model: VaeModel, params: Mapping, dataset, pool: int, k: int, seed: int = 0, agg: AggregatePosterior | None = None) -> RankedSamples:
    """The ``k`` prior draws (out of ``pool``) least supported by q(z)."""
    if k > pool:
        raise ValueError(f"k={k} exceeds pool={pool}")
    agg = agg or AggregatePosterior.from_model(model, params, dataset)
    z = sample_prior(model, params, pool, _rng(seed, "lp"))
    return _lowest(z, aggregate_posterior_log_density(agg, z), k, "low-posterior")


def high_posterior_samples(model: VaeModel, params: Mapping, dataset, pool: int, k: int, seed: int = 0, agg: AggregatePosterior | None = None) -> RankedSamples:
    """The ``k`` aggregate-posterior draws least supported by N(h(z); 0, I)."""
    if k > pool:
        raise ValueError(f"k={k} exceeds pool={pool}")
    agg = agg or AggregatePosterior.from_model(model, params, dataset)
    z = agg.sample(pool, _rng(seed, "hp"))
    return _lowest(z, log_base_values(model, params, z), k, "high-posterior")


def decode_points(model: VaeModel, params: Mapping, z) -> np.ndarray:
    with dc.no_tape():
        return _values(decode(model, params, np.asarray(z, dtype=np.float64)))


def sample_quality_mmd(model: VaeModel, params: Mapping, heldout, n: int = 1000, seed: int = 0) -> float:
    """MMD between decoded prior samples (decoder means) and held-out data."""
    ref = as_points(heldout)
    if len(ref) == 0:
        raise ValueError("heldout must be non-empty")
    x = decode_points(model, params, sample_prior(model, params, n, _rng(seed, "gen")))
    with dc.no_tape():
        return float(_values(mmd(x, ref)))


def nearest_distance(points, reference) -> np.ndarray:
    """Euclidean distance from each point to its nearest reference point."""
    p = np.asarray(points, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    out = np.empty(len(p))
    step = max(1, 2_000_000 // max(1, len(r)))
    for s in range(0, len(p), step):
        d = np.sum((p[s : s + step, None, :] - r[None]) ** 2, axis=-1)
        out[s : s + step] = np.sqrt(d.min(axis=1))
    return out
