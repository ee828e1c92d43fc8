"""The training loop."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import diffcore as dc
from ..netlib import init_params
from ..objectives import discriminator_step, objective, permute_dims
from ..vae import encode, reparameterize
from .checkpoint import Checkpoint
from .config import NumericAbort, TrainConfig, build_model, load_data, stream
from .optim import Adam

log = logging.getLogger(__name__)

RUNLOG_COLUMNS = ("iter", "total", "recon", "kl", "extra")


@dataclass
class RunLog:
    rows: np.ndarray  # (iterations, 5) in RUNLOG_COLUMNS order

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, RUNLOG_COLUMNS.index(name)]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RUNLOG_COLUMNS)
            for row in self.rows:
                w.writerow([int(row[0])] + ["%.17g" % v for v in row[1:]])
        return path

    @classmethod
    def from_csv(cls, path) -> "RunLog":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        return cls(np.array([[float(v) for v in r] for r in rows]).reshape(-1, len(RUNLOG_COLUMNS)))


def init_disc_params(cfg: TrainConfig, disc):
    return init_params(disc, dc.ParamStore(), cfg.seed * 1000 + 3)


def train(cfg: TrainConfig, log_every: int = 0) -> tuple[Checkpoint, RunLog]:
    """Minimize the configured objective with Adam; deterministic in ``cfg.seed``.

    Decoupled models train the flow jointly with encoder and decoder.  The
    factor objective alternates one discriminator update per VAE update.
    Raises :class:`NumericAbort` on a non-finite loss or gradient.
    """
    model, disc = build_model(cfg)
    train_set, _ = load_data(cfg)
    data = train_set.points
    N, B, L = len(data), cfg.batch_size, cfg.latent_dim
    ocfg = cfg.objective

    params = model.init_params(cfg.seed)
    opt = Adam(params, cfg.learning_rate)
    disc_params = disc_opt = None
    if disc is not None:
        disc_params = init_disc_params(cfg, disc)
        disc_opt = Adam(disc_params, cfg.disc_learning_rate)

    batch_rng = stream(cfg.seed, "batches")
    noise_rng = stream(cfg.seed, "reparam")
    prior_rng = stream(cfg.seed, "prior-samples")
    perm_rng = stream(cfg.seed, "permutations")

    rows = np.zeros((cfg.iterations, len(RUNLOG_COLUMNS)))
    for it in range(cfg.iterations):
        batch = data[batch_rng.choice(N, B, replace=False)]
        eps = noise_rng.standard_normal((B, L))
        prior_noise = prior_rng.standard_normal((B, L)) if ocfg.kind == "info" else None

        with dc.Tape():
            leaves = params.leaves()
            loss = objective(
                ocfg, model, leaves, batch, eps,
                step=it, dataset_size=N, disc=disc, disc_params=disc_params, prior_noise=prior_noise,
            )
            dc.backward(loss.total)
        vals = loss.values()
        grads = opt.flatten({n: leaf.adjoint for n, leaf in leaves.items()})
        if not np.isfinite(vals["total"]) or not np.all(np.isfinite(grads)):
            raise NumericAbort(it, vals)
        if disc is not None:
            with dc.no_tape():
                z = dc.value_of(reparameterize(encode(model, params, batch), eps))
        opt.step(grads)

        if disc is not None:
            z_perm = permute_dims(z, perm_rng)
            with dc.Tape():
                dleaves = disc_params.leaves()
                dloss = discriminator_step(disc, dleaves, z, z_perm)
                dc.backward(dloss)
            if not np.isfinite(float(dloss.value)):
                raise NumericAbort(it, {"discriminator": float(dloss.value)})
            disc_opt.step({n: leaf.adjoint for n, leaf in dleaves.items()})

        rows[it] = (it, vals["total"], vals["recon"], vals["kl"], vals["extra"])
        if log_every and (it % log_every == 0 or it == cfg.iterations - 1):
            log.info("iter %d total %.4f recon %.4f kl %.4f extra %.4f", it, *rows[it, 1:])

    ckpt = Checkpoint(cfg, cfg.iterations, params, disc_params)
    runlog = RunLog(rows)
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        ckpt.save(out / "checkpoint.json")
        runlog.to_csv(out / "runlog.csv")
    return ckpt, runlog
