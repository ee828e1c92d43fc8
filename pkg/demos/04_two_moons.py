"""Two moons: a beta-VAE with and without the learned flow prior.

Both runs share seed, data, batches and noise; only the prior differs.  We
then look for latent pockets (prior mass the encoder never uses), leaks
(encoder mass the prior rarely samples) and the effect on generated points.

    python3 demos/04_two_moons.py                   # short run, about a minute
    python3 demos/04_two_moons.py --iterations 20000  # the full-length setting
"""
import argparse
import logging
import time
from pathlib import Path

import numpy as np

from dpvae import metrics as M
from dpvae.datagen import moon_arc_distance
from dpvae.harness import TrainConfig, generate, load_data, train, traversal_path
from dpvae.harness.reporting import DEFAULT_TAUS, path_min_log_prior

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--iterations", type=int, default=4000)
parser.add_argument("--seed", type=int, default=0)
parser.add_argument("--out", default="demo_runs/two_moons")
args = parser.parse_args()
logging.basicConfig(level=logging.INFO, format="%(message)s")

results = {}
for mode in ("standard", "decoupled"):
    cfg = TrainConfig(
        kind="beta-H", prior_mode=mode, obs_std=0.1, iterations=args.iterations, seed=args.seed,
        output_dir=str(Path(args.out) / mode),
    )
    start = time.perf_counter()
    ckpt, log = train(cfg, log_every=max(1, args.iterations // 4))
    print(f"{mode}: {args.iterations} iterations in {time.perf_counter() - start:.0f}s, written to {cfg.output_dir}\n")
    results[mode] = ckpt

train_set, heldout = load_data(results["standard"].config)
print(f"{'':34s}{'standard':>12s}{'decoupled':>12s}")


def row(label, values):
    print(f"{label:34s}" + "".join(f"{v:12.4f}" if isinstance(v, float) else f"{v!s:>12s}" for v in values))


stats = {}
for mode, ckpt in results.items():
    model, _ = ckpt.model()
    p = ckpt.params
    agg = M.AggregatePosterior.from_model(model, p, train_set)
    lp = M.low_posterior_samples(model, p, train_set, pool=5000, k=100, seed=0, agg=agg)
    lp_x = M.decode_points(model, p, lp.points)
    random_x = generate(ckpt, 1000, "random", seed=0).x
    draws = M.leakage_draws(model, p, train_set, 5000, seed=0, agg=agg)
    # a standard prior maps paths to themselves, so the comparison only means something for the flow
    wins = "-"
    if model.decoupled:
        rng = np.random.default_rng(7)
        wins = 0
        for _ in range(50):
            za, zb = agg.sample(2, rng)
            mapped = traversal_path(model, p, za, zb, 50)
            wins += int(path_min_log_prior(model, p, mapped) >= path_min_log_prior(model, p, np.linspace(za, zb, 50)))
    stats[mode] = {
        "sKL(prior, aggregate posterior)": M.skl(model, p, train_set, 5000, agg=agg).value,
        "LP samples: dist to data": float(M.nearest_distance(lp_x, train_set.points).mean()),
        "LP samples: dist to moons": float(moon_arc_distance(lp_x).mean()),
        "random samples: dist to moons": float(moon_arc_distance(random_x).mean()),
        "sample MMD vs held-out": M.sample_quality_mmd(model, p, heldout, 1000),
        **{f"leakage LS({t:g})": draws.score(t).value for t in DEFAULT_TAUS},
        "traversal wins (of 50)": wins,
    }

for label in stats["standard"]:
    row(label, [stats[m][label] for m in ("standard", "decoupled")])

print(
    "\nLower sKL means the prior and the aggregate posterior overlap better.  Low-posterior (LP)"
    "\nsamples are the prior draws the encoder supports least, so their distance to the data"
    "\nmeasures how far latent pockets decode off the moons.  Leakage sums log(q / N(h(z))) over"
    "\nencoder draws whose generation-space density falls below each threshold.  The traversal"
    "\nrow counts flow-mapped paths whose lowest prior density is at least that of the straight"
    "\nline between the same endpoints.  Short runs are noisy; compare at --iterations 20000."
)
