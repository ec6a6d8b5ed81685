"""Command line interface.

    stablema <subcommand> --config cfg.json [--seed N] [--out-dir DIR] [--threads K]

Subcommands: simulate, rho, covariance, clt, rates.  Exit code 0 when the
run passes (or has no pass criterion), 2 when an acceptance check fails,
1 on any error (bad config, hypothesis violation, numerical failure).
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import traceback

from .config import load_config
from .errors import StablemaError
from .harness import (
    run_clt_experiment,
    run_covariance_experiment,
    run_rates_study,
    run_rho_table,
    run_simulate,
)
from .reporting import write_report

_DISPATCH = {
    "simulate": run_simulate,
    "rho": run_rho_table,
    "covariance": run_covariance_experiment,
    "clt": run_clt_experiment,
    "rates": run_rates_study,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to the JSON experiment config")
    common.add_argument("--seed", type=int, default=None, help="override master_seed")
    common.add_argument("--out-dir", default=None, help="override the report directory")
    common.add_argument("--threads", type=int, default=None, help="override worker thread count")

    parser = argparse.ArgumentParser(
        prog="stablema",
        description="simulation and numerical verification for heavy-tailed moving averages",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)
    sub.add_parser("simulate", parents=[common], help="dump one simulated path matrix as CSV")
    sub.add_parser("rho", parents=[common], help="tabulate overlap integrals and audit decay")
    sub.add_parser("covariance", parents=[common], help="analytic vs empirical covariance of V_n")
    sub.add_parser("clt", parents=[common], help="normality-proxy rate experiment")
    sub.add_parser("rates", parents=[common], help="intensity-integral slope study")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            if not (0 <= args.seed < 2**64):
                print("error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
                return 1
            overrides["master_seed"] = args.seed
        if args.out_dir is not None:
            overrides["out_dir"] = args.out_dir
        if args.threads is not None:
            if args.threads < 1:
                print("error: --threads must be >= 1", file=sys.stderr)
                return 1
            overrides["threads"] = args.threads
        if overrides:
            config = dataclasses.replace(config, **overrides)

        report = _DISPATCH[args.cmd](config)
        written = write_report(report, config.out_dir)
        print(f"report: {written.txt}")
        print(f"csv:    {written.csv} (sha256 {written.csv_sha256})")
        for fig in written.figures:
            print(f"figure: {fig}")
        if report.passed is not None:
            print(f"status: {'pass' if report.passed else 'fail'}")
            return 0 if report.passed else 2
        return 0
    except StablemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
