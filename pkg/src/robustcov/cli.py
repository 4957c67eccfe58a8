"""Command-line entry point.

Subcommands: estimate, calibrate, loss-curve, mi-curve, imi-aspect,
imi-rho.  Exit codes: 0 ok, 1 solver failure, 2 input/config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import __version__
from .errors import NonConvergenceError, RobustCovError, SingularIterateError
from .experiments import (
    ConfigError,
    load_config,
    run_calibrate,
    run_estimate,
    run_imi_vs_aspect,
    run_imi_vs_rho,
    run_loss_curve,
    run_mi_curve,
)
from .matrixio import MatrixParseError

_SWEEPS = {
    "loss-curve": run_loss_curve,
    "mi-curve": run_mi_curve,
    "imi-aspect": run_imi_vs_aspect,
    "imi-rho": run_imi_vs_rho,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustcov",
        description="Regularized M-estimation of covariance matrices: "
        "solvers, shrinkage calibration and influence analysis.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=False):
        p.add_argument("--config", required=True, help="TOML experiment description")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output path prefix")
        p.add_argument("--quick", action="store_true", help="divide trial counts by 10")
        p.add_argument(
            "--no-header-timestamp",
            action="store_true",
            help="omit the timestamped comment line for byte-reproducible CSVs",
        )
        if needs_input:
            p.add_argument("input", help="sample matrix CSV (rows = variables)")

    for name in _SWEEPS:
        common(sub.add_parser(name, help=f"run the {name} sweep"))
    common(sub.add_parser("estimate", help="estimate covariance from a sample file"), needs_input=True)
    common(sub.add_parser("calibrate", help="data-driven shrinkage calibration"), needs_input=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.experiment != args.command:
            raise ConfigError(
                f"config declares experiment {cfg.experiment!r} but the "
                f"{args.command!r} subcommand was invoked"
            )
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["output"] = args.out
        if overrides:
            cfg = dataclasses.replace(cfg, **overrides)
        if args.command in _SWEEPS:
            path = _SWEEPS[args.command](cfg, quick=args.quick, timestamp=not args.no_header_timestamp)
            print(path)
            return 0
        if args.command == "estimate":
            matrix_path, report_path, code = run_estimate(
                cfg, args.input, timestamp=not args.no_header_timestamp
            )
            print(matrix_path)
            print(report_path)
            return code
        report_path, code = run_calibrate(cfg, args.input)
        print(report_path)
        return code
    except (ConfigError, MatrixParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NonConvergenceError, SingularIterateError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except RobustCovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
