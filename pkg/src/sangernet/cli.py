"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateIterateError,
    DegenerateSpectrumError,
    SangerNetError,
)
from .harness import compare, parse_config, run_experiment, validate_config

_NUMERICAL = (
    ConvergenceError,
    DegenerateIterateError,
    DegenerateSpectrumError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sangernet",
        description="Deterministic simulation of sample-wise distributed PCA over graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment (all trials) and write CSVs")
    run.add_argument("config")
    run.add_argument("--alpha", type=float, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", default=None)

    cmp_ = sub.add_parser("compare", help="run several configs, merge mean errors by comm_units")
    cmp_.add_argument("configs", nargs="+")
    cmp_.add_argument("--jobs", type=int, default=1)
    cmp_.add_argument("--out", default="compare.csv")

    val = sub.add_parser("validate", help="check a config and print an advisory report")
    val.add_argument("config")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            overrides = {
                "alpha": args.alpha,
                "seed": args.seed,
                "trials": args.trials,
                "out": args.out,
            }
            cfg = parse_config(args.config, overrides)
            written = run_experiment(cfg, jobs=args.jobs)
            print(f"wrote {len(written)} files; aggregate: {written['aggregate']}")
        elif args.command == "compare":
            cfgs = [parse_config(p) for p in args.configs]
            path = compare(cfgs, args.out, jobs=args.jobs)
            print(f"wrote {path}")
        else:
            cfg = parse_config(args.config)
            for line in validate_config(cfg):
                print(line)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except SangerNetError as exc:
        # remaining domain failures are config-shaped (bad graph, bad data)
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
