"""Evaluation, sample generation and latent traversals for checkpoints."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import diffcore as dc
from .. import metrics as M
from ..flow import flow_forward, flow_inverse
from ..vae import encode, log_prior
from .checkpoint import Checkpoint, CheckpointError
from .config import load_data

DEFAULT_TAUS = (-10.0, -8.0, -6.0, -4.0, -2.0)
METRICS = ("skl", "nll", "leakage", "mmd")


@dataclass(frozen=True)
class MetricSpec:
    metrics: tuple = METRICS
    skl_n: int = 5000
    nll_n: int = 21000
    leak_n: int = 5000
    mmd_n: int = 1000
    taus: tuple = DEFAULT_TAUS
    flag: str = "base"
    seed: int = 0


@dataclass
class MetricReport:
    rows: list = field(default_factory=list)  # (name, value, stderr, n, seed)

    def add(self, name: str, est: M.Estimate) -> None:
        self.rows.append((name, est.value, est.stderr, est.n, est.seed))

    def __getitem__(self, name: str) -> float:
        for row in self.rows:
            if row[0] == name:
                return row[1]
        raise KeyError(name)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "value", "stderr", "n", "seed"])
            for name, value, stderr, n, seed in self.rows:
                w.writerow([name, repr(float(value)), repr(float(stderr)), n, seed])
        return path


def _context(ckpt: Checkpoint):
    model, _ = ckpt.model()
    train_set, heldout = load_data(ckpt.config)
    return model, train_set, heldout


def evaluate(ckpt: Checkpoint, dataset=None, spec: MetricSpec = MetricSpec()) -> MetricReport:
    """Run the metric suite; ``dataset`` (held-out points) defaults to the config's split.

    sKL, leakage and the ranking metrics use the training set as the
    aggregate-posterior mixture.
    """
    model, train_set, heldout = _context(ckpt)
    held = M.as_points(heldout if dataset is None else dataset)
    if held.ndim != 2 or held.shape[1] != model.data_dim:
        raise CheckpointError(f"data of shape {held.shape} does not fit a {model.data_dim}-D model")
    params = ckpt.params
    report = MetricReport()
    agg = M.AggregatePosterior.from_model(model, params, train_set)
    if "skl" in spec.metrics:
        report.add("skl", M.skl(model, params, train_set, spec.skl_n, spec.seed, agg=agg))
    if "nll" in spec.metrics:
        report.add("nll", M.nll_importance(model, params, held, spec.nll_n, spec.seed))
    if "leakage" in spec.metrics:
        draws = M.leakage_draws(model, params, train_set, spec.leak_n, spec.seed, agg=agg)
        for tau in spec.taus:
            report.add(f"leakage[{tau:g}]", draws.score(tau, spec.flag))
    if "mmd" in spec.metrics:
        value = M.sample_quality_mmd(model, params, held, spec.mmd_n, spec.seed)
        report.add("sample_mmd", M.Estimate(value, float("nan"), spec.mmd_n, spec.seed))
    return report


@dataclass
class Samples:
    x: np.ndarray
    z: np.ndarray
    log_q: np.ndarray
    log_p: np.ndarray
    mode: str
    score: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.x)

    def to_csv(self, directory) -> tuple[Path, Path]:
        """Write samples.csv (x1,x2,log_q,log_p) and latents.csv (z..., score)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        s_path, z_path = directory / "samples.csv", directory / "latents.csv"
        with s_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(self.x.shape[1])] + ["log_q", "log_p"])
            for x, lq, lp in zip(self.x, self.log_q, self.log_p):
                w.writerow([repr(float(v)) for v in (*x, lq, lp)])
        with z_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            score = self.score if self.score is not None else np.full(len(self.z), np.nan)
            w.writerow([f"z{i + 1}" for i in range(self.z.shape[1])] + ["score"])
            for z, s in zip(self.z, score):
                w.writerow([repr(float(v)) for v in (*z, s)])
        return s_path, z_path


def generate(ckpt: Checkpoint, n: int, mode: str = "random", seed: int = 0, k: int | None = None) -> Samples:
    """Decode prior samples.

    ``random`` draws ``n`` latents z0 ~ N(0, I) (through g^-1 when decoupled).
    ``lp``/``hp`` draw a pool of ``n`` and keep the ``k`` lowest-ranked
    low-posterior / high-posterior samples.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    model, train_set, _ = _context(ckpt)
    params = ckpt.params
    agg = M.AggregatePosterior.from_model(model, params, train_set)
    score = None
    if mode == "random":
        z = M.sample_prior(model, params, n, np.random.default_rng([seed, 21]))
    elif mode in ("lp", "low-posterior"):
        ranked = M.low_posterior_samples(model, params, train_set, n, k or n, seed, agg=agg)
        z, score, mode = ranked.points, ranked.scores, "low-posterior"
    elif mode in ("hp", "high-posterior"):
        ranked = M.high_posterior_samples(model, params, train_set, n, k or n, seed, agg=agg)
        z, score, mode = ranked.points, ranked.scores, "high-posterior"
    else:
        raise ValueError(f"unknown generation mode {mode!r}")
    x = M.decode_points(model, params, z)
    return Samples(x, z, M.aggregate_posterior_log_density(agg, z), M.log_prior_values(model, params, z), mode, score)


@dataclass
class Traversal:
    z: np.ndarray
    x: np.ndarray

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            L, D = self.z.shape[1], self.x.shape[1]
            w.writerow(["step"] + [f"z{i + 1}" for i in range(L)] + [f"x{i + 1}" for i in range(D)])
            for i, (z, x) in enumerate(zip(self.z, self.x)):
                w.writerow([i] + [repr(float(v)) for v in (*z, *x)])
        return path


def traversal_path(model, params, z_a, z_b, steps: int) -> np.ndarray:
    """Latent path between two points.

    Decoupled models interpolate linearly between g(z_a) and g(z_b) and map
    each step back with g^-1; standard models interpolate in z.  The
    endpoints are returned exactly as given.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    z_a = np.asarray(z_a, dtype=np.float64)
    z_b = np.asarray(z_b, dtype=np.float64)
    if z_a.shape != (model.latent_dim,) or z_b.shape != (model.latent_dim,):
        raise ValueError(f"endpoints must be {model.latent_dim}-vectors")
    t = np.linspace(0.0, 1.0, steps)[:, None]
    with dc.no_tape():
        if model.decoupled:
            ends = dc.value_of(flow_forward(model.prior, params, np.stack([z_a, z_b]))[0])
            path = dc.value_of(flow_inverse(model.prior, params, (1 - t) * ends[0] + t * ends[1]))
        else:
            path = (1 - t) * z_a + t * z_b
    path = np.array(path)
    path[0], path[-1] = z_a, z_b
    return path


def latent_traverse(ckpt: Checkpoint, z_a, z_b, steps: int = 11) -> Traversal:
    model, _ = ckpt.model()
    path = traversal_path(model, ckpt.params, z_a, z_b, steps)
    return Traversal(path, M.decode_points(model, ckpt.params, path))


def path_min_log_prior(model, params, path) -> float:
    """Smallest prior log-density along a latent path."""
    with dc.no_tape():
        return float(np.min(dc.value_of(log_prior(model, params, np.asarray(path)))))


def factor_traverse(ckpt: Checkpoint, x, dim: int, sigmas: float = 5.0, steps: int = 11, ranked: bool = True) -> Traversal:
    """Vary one latent coordinate of x's posterior mean by +/- sigmas standard deviations.

    Standard deviations are those of the aggregate posterior.  With
    ``ranked`` the ``dim``-th coordinate in order of decreasing standard
    deviation is varied, otherwise coordinate ``dim`` itself.
    """
    model, train_set, _ = _context(ckpt)
    if not 0 <= dim < model.latent_dim:
        raise ValueError(f"dim must lie in [0, {model.latent_dim})")
    params = ckpt.params
    agg = M.AggregatePosterior.from_model(model, params, train_set)
    std = agg.std()
    coord = int(np.argsort(-std, kind="stable")[dim]) if ranked else dim
    with dc.no_tape():
        mu = dc.value_of(encode(model, params, np.asarray(x, dtype=np.float64)).mu)
    offsets = np.linspace(-sigmas, sigmas, steps) * std[coord]
    if steps % 2:
        offsets[steps // 2] = 0.0
    z = np.repeat(mu[None], steps, axis=0)
    z[:, coord] += offsets
    return Traversal(z, M.decode_points(model, params, z))
