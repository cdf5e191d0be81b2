"""Command-line interface.

Subcommands:
  run          execute a figure config and write <figure>.csv / <figure>.json
  validate     check a config without running it
  mc-validate  Monte-Carlo check of the analytic variances at small n
  list-figures print the figure manifest

Exit codes: 0 success, 2 invalid configuration, 3 compute budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from ._errors import BudgetError, ConfigError
from .experiments import (
    list_figures,
    load_config,
    mc_validate,
    run_experiment,
    validate_config,
    write_results,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3


def _add_config_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="path to a YAML figure config")
    sub.add_argument("--preset", default=None,
                     help="named preset block to merge over the base config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crmshadow",
        description="fidelity-estimation sample-cost pipelines "
                    "(common-randomized shadow estimation)")
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="run a figure config and write CSV/JSON results")
    _add_config_args(run)
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--threads", type=int, default=1,
                     help="worker threads for draw-parallel sweeps")

    val = subs.add_parser("validate", help="validate a config without running it")
    _add_config_args(val)

    mcv = subs.add_parser("mc-validate",
                          help="simulate the protocol at small n and z-score the "
                               "analytic variances")
    _add_config_args(mcv)

    subs.add_parser("list-figures", help="print the figure manifest")
    return parser


def _load_spec(args):
    data = load_config(args.config)
    return validate_config(data, preset=args.preset,
                           threads=getattr(args, "threads", 1))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-figures":
            for fig, info in list_figures():
                print(f"{fig:8s} {info}")
            return EXIT_OK
        if args.command == "validate":
            spec = _load_spec(args)
            print(f"OK: figure={spec.figure} seed={spec.seed} "
                  f"preset={spec.preset or '-'}")
            return EXIT_OK
        if args.command == "mc-validate":
            spec = _load_spec(args)
            report = mc_validate(spec)
            print(json.dumps(report, indent=2))
            if not report["passed"]:
                print(f"FAIL: max |z| = {report['max_abs_z']:.2f} exceeds 4",
                      file=sys.stderr)
                return 1
            print(f"PASS: max |z| = {report['max_abs_z']:.2f}")
            return EXIT_OK
        # run
        spec = _load_spec(args)
        t0 = time.perf_counter()
        rows = run_experiment(spec)
        csv_path, json_path = write_results(rows, args.out, spec,
                                            total_walltime=time.perf_counter() - t0)
        print(f"wrote {len(rows)} rows to {csv_path} (sidecar {json_path})")
        return EXIT_OK
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
