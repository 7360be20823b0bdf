"""Command-line interface.

Subcommands: generate (cache a problem), solve (one solver, one noise level),
sweep (full solver x noise grid) and verify (built-in self checks).  Flags
override the corresponding config values.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import selfcheck
from .config import SOLVER_NAMES, ConfigError, parse_config
from .experiment import SUMMARY_HEADER, noise_seed_for, run_experiment
from .tomo import NoiseModel, make_instance, save_instance, write_pgm


def _add_common(parser):
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="base seed (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsenewton",
        description="l1-sparse tomography reconstruction benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build and cache a tomography problem")
    _add_common(p)
    p.add_argument("--noise", type=float, help="relative noise level (default: first configured)")

    p = sub.add_parser("solve", help="run one solver at one noise level")
    _add_common(p)
    p.add_argument("--solver", required=True, choices=SOLVER_NAMES)
    p.add_argument("--noise", type=float, help="relative noise level (default: first configured)")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("sweep", help="run the full solver x noise sweep")
    _add_common(p)
    p.add_argument("--solver", choices=SOLVER_NAMES, help="restrict to one solver")
    p.add_argument("--noise", type=float, help="restrict to one noise level")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--timing", choices=("wall", "off"),
                   help="wall-clock columns or zeros (byte-reproducible)")

    p = sub.add_parser("verify", help="run the built-in self checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args, restrict_solver=None, restrict_noise=None):
    config = parse_config(args.config)
    if args.out is not None:
        config.out = args.out
    if args.seed is not None:
        config.seed = args.seed
    if restrict_solver is not None:
        config.solvers = [restrict_solver]
    if restrict_noise is not None:
        config.noise_levels = [restrict_noise]
    if getattr(args, "timing", None):
        config.timing = args.timing
    return config


def _cmd_generate(args) -> int:
    config = _load_config(args, restrict_noise=getattr(args, "noise", None))
    noise = config.noise_levels[0]
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = noise_seed_for(config.seed, 0, 0)
    inst = make_instance(config.geometry, NoiseModel(noise, seed))
    save_instance(out / f"problem_{noise:g}.npz", inst)
    write_pgm(out / "phantom.pgm", inst.x_true, config.geometry.m)
    print(f"matrix {inst.A.n_rows} x {inst.A.n_cols} with {inst.A.nnz} nonzeros")
    print(f"noise level {noise:g} -> delta = {inst.delta:.6g}")
    print(f"cached problem in {out}")
    return 0


def _cmd_run(args, restrict_solver) -> int:
    config = _load_config(args, restrict_solver=restrict_solver,
                          restrict_noise=getattr(args, "noise", None))
    rows = run_experiment(config, threads=args.threads)
    print(SUMMARY_HEADER)
    for row in rows:
        print(row)
    print(f"results written to {config.out}")
    return 1 if any(",error," in row for row in rows) else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "solve":
            return _cmd_run(args, restrict_solver=args.solver)
        if args.command == "sweep":
            return _cmd_run(args, restrict_solver=getattr(args, "solver", None))
        if args.command == "verify":
            return 0 if selfcheck.run_all(args.seed) else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
