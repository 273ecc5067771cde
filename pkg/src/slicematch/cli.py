"""Command-line entry point: `slicematch run|check`."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import __version__
from .experiments import (
    EXPERIMENTS,
    THEOREM_CHECKS,
    ConfigError,
    ExperimentConfig,
    parse_config_file,
    run_check_campaign,
    run_experiment,
)
from . import diagnostics as diag


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicematch",
        description="Slice-matching experiments and theorem-backed diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="run an experiment grid and write CSV logs")
    run_p.add_argument("--config", help="flat key = value config file")
    run_p.add_argument("--experiment", choices=EXPERIMENTS)
    run_p.add_argument("--dims", help="comma-separated dimensions, e.g. 5,20,100")
    run_p.add_argument("--alphas", help="comma-separated step exponents in [0,1)")
    run_p.add_argument("--K", type=int, help="iteration budget")
    run_p.add_argument("--seed", type=int, help="master seed")
    run_p.add_argument("--out", help="output directory")
    run_p.add_argument("--workers", type=int, help="parallel workers (default: all cores)")

    check_p = sub.add_parser("check", help="run the theorem-backed diagnostic checks")
    check_p.add_argument("--seed", type=int, default=20240601)
    check_p.add_argument("--quick", action="store_true", help="reduced sizes for smoke testing")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = parse_config_file(args.config)
    elif args.experiment:
        cfg = ExperimentConfig(experiment=args.experiment)
    else:
        raise ConfigError("either --config or --experiment is required")
    overrides = {}
    if args.experiment:
        overrides["experiment"] = args.experiment
    if args.dims:
        try:
            overrides["dims"] = [int(v) for v in args.dims.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad value for key 'dims': {args.dims}") from exc
    if args.alphas:
        try:
            overrides["alphas"] = [float(v) for v in args.alphas.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad value for key 'alphas': {args.alphas}") from exc
    if args.K is not None:
        overrides["K"] = args.K
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["out_dir"] = args.out
    return replace(cfg, **overrides)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        try:
            cfg = _config_from_args(args)
            written = run_experiment(cfg, workers=args.workers)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
        for path in written:
            print(f"wrote {path}")
        return 0
    if args.command == "check":
        reports, notes = run_check_campaign(seed=args.seed, quick=args.quick)
        print(diag.report_lines(reports), end="")
        for note in notes:
            print(f"# {note}")
        failed = [r.name for r in reports if not r.passed and r.name in THEOREM_CHECKS]
        if failed:
            print(f"FAILED theorem-backed checks: {', '.join(failed)}", file=sys.stderr)
            return 2
        print(f"all {len(reports)} checks passed")
        return 0
    _build_parser().print_help()
    return 1


if __name__ == "__main__":
    sys.exit(main())
