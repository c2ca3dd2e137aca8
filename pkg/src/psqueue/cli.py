"""
Command-line front end: `psqueue {delta,btilde,compare,simulate,validate}`.

Tables go to stdout (or to `--output NAME` inside $PSQUEUE_OUTPUT_DIR); logs go to stderr. Exit codes: 0 on
success, 2 on a parameter error, 3 on a numerical failure or a failed validation check.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from psqueue import __version__
from psqueue.errors import ParameterError, PSQueueError, attempt
from psqueue.tables import Table, btilde_table, compare_table, delta_table, simulate_table
from psqueue.validation import CHECKS, SuiteConfig, run_suite

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "PSQUEUE_OUTPUT_DIR"

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_NUMERICAL = 3


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _name_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--output", metavar="NAME", help=f"write to NAME inside ${OUTPUT_DIR_ENV} (default: stdout)")
    common.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))

    parser = argparse.ArgumentParser(prog="psqueue", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    spectral = argparse.ArgumentParser(add_help=False)
    spectral.add_argument("--rho", type=float, required=True)
    spectral.add_argument("--jmax", type=int, default=40)
    spectral.add_argument("--epsilon", type=float, default=1e-6)
    spectral.add_argument("--n-cap", type=int, default=200)
    spectral.add_argument("--panels", type=int, default=64)
    spectral.add_argument("--order", type=int, default=20)

    sub.add_parser("delta", parents=[common, spectral], help="law of departures seen by the tagged customer")
    sub.add_parser("compare", parents=[common, spectral], help="delta against the busy-period rank")

    btilde = sub.add_parser("btilde", parents=[common], help="busy-period count and rank laws")
    btilde.add_argument("--rho", type=float, required=True)
    btilde.add_argument("--jmax", type=int, default=40)
    btilde.add_argument("--series-tol", type=float, default=1e-14)
    btilde.add_argument("--k-cap", type=int, default=2_000_000)

    simulate = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimates")
    simulate.add_argument("--rho", type=float, required=True)
    simulate.add_argument("--reps", type=int, default=100_000)
    simulate.add_argument("--seed", type=int, default=7)
    simulate.add_argument("--workers", type=int, default=1)
    simulate.add_argument("--block-size", type=int, default=4096)

    validate = sub.add_parser("validate", parents=[common], help="run the acceptance suite")
    validate.add_argument("--rho", type=_float_list, default=[0.2, 0.5, 0.8])
    validate.add_argument("--reps", type=int, default=SuiteConfig.reps)
    validate.add_argument("--seed", type=int, default=SuiteConfig.seed)
    validate.add_argument("--workers", type=int, default=SuiteConfig.workers)
    validate.add_argument("--quick", action="store_true")
    validate.add_argument("--checks", type=_name_list, default=None, help=f"subset of {','.join(CHECKS)}")
    return parser


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    path = Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / output
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info("wrote %s", path)


def _table(args: argparse.Namespace) -> Table:
    match args.command:
        case "delta":
            return delta_table(args.rho, args.jmax, args.epsilon, args.n_cap, args.panels, args.order)
        case "compare":
            return compare_table(args.rho, args.jmax, args.epsilon, args.n_cap, args.panels, args.order)
        case "btilde":
            return btilde_table(args.rho, args.jmax, args.series_tol, args.k_cap)
        case "simulate":
            return simulate_table(args.rho, args.reps, args.seed, args.workers, args.block_size)
        case _:
            raise ParameterError(f"unknown command {args.command!r}")


def _validate(args: argparse.Namespace) -> int:
    config = SuiteConfig(reps=args.reps, seed=args.seed, workers=args.workers, quick=args.quick)
    checks = run_suite(args.rho, config, args.checks)
    if args.format == "json":
        text = json.dumps({"version": __version__, "checks": [asdict(c) for c in checks]}, indent=2) + "\n"
    else:
        lines = [
            f"{'PASS' if c.passed else 'FAIL'} rho={c.rho!r} {c.name} value={c.value!r} tolerance={c.tolerance!r}"
            + (f" ({c.detail})" if c.detail else "")
            for c in checks
        ]
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERICAL


def _run(args: argparse.Namespace) -> int:
    if args.command == "validate":
        return _validate(args)
    _emit(_table(args).render(args.format), args.output)
    return EXIT_OK


def _exit_code(error: PSQueueError) -> int:
    logger.error("%s: %s", type(error).__name__, error)
    match error:
        case ParameterError():
            return EXIT_PARAMETER
        case _:
            return EXIT_NUMERICAL


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    return attempt(_run, args).catch(PSQueueError).recover(_exit_code)


if __name__ == "__main__":
    sys.exit(main())
