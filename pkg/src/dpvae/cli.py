"""Command-line entry point: ``dpvae {train,eval,generate,traverse,data}``.

Exit status is 0 on success, 2 for a bad configuration or unusable input
files, and 3 when training aborts on a non-finite loss.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .datagen import GENERATORS, Dataset2D
from .harness import Checkpoint, CheckpointError, ConfigError, NumericAbort, TrainConfig, train
from .harness.reporting import DEFAULT_TAUS, METRICS, MetricSpec, evaluate, factor_traverse, generate, latent_traverse

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
VECTOR_OPTIONS = ("--za", "--zb", "--x")


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _cmd_train(args) -> int:
    cfg = TrainConfig.load(args.config)
    if args.out:
        cfg.output_dir = args.out
    if not cfg.output_dir:
        raise ConfigError("no output directory: set output_dir in the config or pass --out")
    ckpt, log = train(cfg, log_every=args.log_every)
    total = log.column("total")
    final = total[-1] if len(total) else float("nan")
    print(f"trained {cfg.iterations} iterations, final loss {final:.6g}; wrote {cfg.output_dir}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    ckpt = Checkpoint.load(args.ckpt)
    data = Dataset2D.from_csv(args.data) if args.data else None
    spec = MetricSpec(
        metrics=tuple(args.metrics),
        skl_n=args.skl_n,
        nll_n=args.nll_n,
        leak_n=args.leak_n,
        mmd_n=args.mmd_n,
        taus=tuple(args.tau),
        flag=args.flag,
        seed=args.seed,
    )
    report = evaluate(ckpt, data, spec)
    out = Path(args.out or Path(args.ckpt).with_name("metrics.csv"))
    report.to_csv(out)
    for name, value, stderr, n, seed in report.rows:
        print(f"{name:>14s} {value: .6g} +/- {stderr:.3g}  (n={n}, seed={seed})")
    return EXIT_OK


def _cmd_generate(args) -> int:
    ckpt = Checkpoint.load(args.ckpt)
    samples = generate(ckpt, args.n, args.mode, args.seed, args.k)
    out = Path(args.out or Path(args.ckpt).parent)
    s_path, _ = samples.to_csv(out)
    print(f"{len(samples)} {samples.mode} samples -> {s_path}")
    return EXIT_OK


def _cmd_traverse(args) -> int:
    ckpt = Checkpoint.load(args.ckpt)
    if args.mode == "pair":
        if args.za is None or args.zb is None:
            raise ConfigError("pair traversal needs --za and --zb")
        trav = latent_traverse(ckpt, args.za, args.zb, args.steps)
    else:
        if args.x is None:
            raise ConfigError("factor traversal needs --x")
        trav = factor_traverse(ckpt, args.x, args.dim, args.sigmas, args.steps)
    out = Path(args.out or Path(args.ckpt).with_name(f"traverse_{args.mode}.csv"))
    trav.to_csv(out)
    print(f"{len(trav.z)} steps -> {out}")
    return EXIT_OK


def _cmd_data(args) -> int:
    kwargs = {"noise": args.noise} if args.noise is not None else {}
    ds = GENERATORS[args.name](args.n, seed=args.seed, **kwargs)
    ds.to_csv(args.out)
    print(f"{len(ds)} {args.name} points -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpvae", description="VAEs with a learned flow prior on 2-D toy data.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--out", help="output directory (overrides output_dir)")
    t.add_argument("--log-every", type=int, default=0)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="run the metric suite on a checkpoint")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", help="held-out CSV (x1,x2); defaults to the config's split")
    e.add_argument("--metrics", nargs="+", choices=METRICS, default=list(METRICS))
    e.add_argument("--skl-n", type=int, default=5000)
    e.add_argument("--nll-n", type=int, default=21000)
    e.add_argument("--leak-n", type=int, default=5000)
    e.add_argument("--mmd-n", type=int, default=1000)
    e.add_argument("--tau", type=float, nargs="+", default=list(DEFAULT_TAUS))
    e.add_argument("--flag", choices=("base", "prior"), default="base")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="metrics CSV path (default: next to the checkpoint)")
    e.set_defaults(func=_cmd_eval)

    g = sub.add_parser("generate", help="decode prior samples")
    g.add_argument("--ckpt", required=True)
    g.add_argument("--mode", choices=("random", "lp", "hp"), default="random")
    g.add_argument("--n", type=int, default=1000, help="samples (random) or pool size (lp/hp)")
    g.add_argument("--k", type=int, help="samples kept in lp/hp mode (default: all)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output directory for samples.csv and latents.csv")
    g.set_defaults(func=_cmd_generate)

    v = sub.add_parser("traverse", help="decode a latent path")
    v.add_argument("--ckpt", required=True)
    v.add_argument("--mode", choices=("pair", "factor"), default="pair")
    v.add_argument("--za", type=_floats, help="start latent, comma separated")
    v.add_argument("--zb", type=_floats, help="end latent, comma separated")
    v.add_argument("--x", type=_floats, help="data point to encode (factor mode)")
    v.add_argument("--dim", type=int, default=0, help="rank of the varied coordinate (factor mode)")
    v.add_argument("--sigmas", type=float, default=5.0)
    v.add_argument("--steps", type=int, default=11)
    v.add_argument("--out")
    v.set_defaults(func=_cmd_traverse)

    d = sub.add_parser("data", help="write a synthetic dataset to CSV")
    d.add_argument("--name", choices=sorted(GENERATORS), default="two_moons")
    d.add_argument("--n", type=int, default=2048)
    d.add_argument("--noise", type=float)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=_cmd_data)
    return p


def _join_vectors(argv: list[str]) -> list[str]:
    """Glue vector options to their value so "--za -1,0.5" is not read as a flag."""
    out: list[str] = []
    it = iter(argv)
    for arg in it:
        if arg in VECTOR_OPTIONS:
            value = next(it, None)
            out.append(arg if value is None else f"{arg}={value}")
        else:
            out.append(arg)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_vectors(argv))
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except NumericAbort as exc:
        print(f"dpvae: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, CheckpointError, ValueError, OSError) as exc:
        print(f"dpvae: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
