"""CLI tool for GPS-intermittent tracking simulations.

Runs one scenario, or sweeps one scenario parameter, and writes the trace,
switch log, dwell budgets and a README into the output directory.

Exit codes: 0 ok, 1 configuration error, 2 numerical failure or infeasible
dwell, 3 safety monitor tripped.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from engine import VARIANTS
from errors import ConfigError, InfeasibleStartError, NumericalBlowupError
from scenario import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_SAFETY,
    SWEEPABLE,
    config_from_dict,
    load_scenario,
    print_run_report,
    run_scenario,
    run_sweep,
    validate_config,
    with_overrides,
)

logger = logging.getLogger(__name__)


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gps_dwell_sim",
        description="Simulate trajectory tracking with intermittent GPS and dwell-time scheduling.",
    )
    common = argparse.ArgumentParser(add_help=False)
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="log debug detail")
    verbosity.add_argument("--quiet", action="store_true", help="log warnings and errors only")
    common.add_argument("config", help="scenario JSON file ({} gives the benchmark defaults)")
    common.add_argument("--seed", type=int, help="override engine.seed")
    common.add_argument("--out", help="override outputs.directory")
    common.add_argument("--variant", choices=sorted(VARIANTS), help="override estimator.variant")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one scenario")
    sweep = sub.add_parser("sweep", parents=[common], help="run one scenario per parameter value")
    sweep.add_argument("--param", required=True, choices=sorted(SWEEPABLE), help="parameter to vary")
    sweep.add_argument("--values", required=True, type=_parse_values, help="comma-separated values")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _load(args: argparse.Namespace):
    try:
        data = load_scenario(args.config)
    except FileNotFoundError:
        print(
            f"Error: '{args.config}' not found.\n"
            f"Pass a scenario JSON file; an empty object {{}} runs the benchmark defaults.",
            file=sys.stderr,
        )
        sys.exit(EXIT_CONFIG)
    except json.JSONDecodeError as e:
        print(
            f"Error: '{args.config}' is not valid JSON (line {e.lineno}): {e.msg}",
            file=sys.stderr,
        )
        sys.exit(EXIT_CONFIG)
    cfg = config_from_dict(data)
    cfg = with_overrides(cfg, seed=args.seed, out=args.out, variant=args.variant)
    validate_config(cfg)
    return cfg


def main(argv: list[str] | None = None) -> None:
    """Parse arguments, run the requested command and exit with its status.

    Raises:
        SystemExit: Always; the code is 0 on success, 1 for configuration
            errors, 2 for numerical failures and 3 if the safety monitor
            tripped.
    """
    args = build_parser().parse_args(argv)
    _configure_logging(args)

    try:
        cfg = _load(args)
        if args.command == "run":
            result = run_scenario(cfg)
            print_run_report(result.summary, result.output_dir)
            code = result.status
        else:
            rows = run_sweep(cfg, args.param, args.values, jobs=args.jobs)
            for row in rows:
                print(
                    f"{args.param}={row['value']}: status {row['status']}, "
                    f"max denied budget {row['max_denied_budget']}, max V {row['max_V']}"
                )
            statuses = [row["status"] for row in rows]
            code = max(statuses) if statuses else EXIT_OK
    except ConfigError as e:
        print(f"Error: invalid scenario: {e}\nCheck the field named above.", file=sys.stderr)
        sys.exit(EXIT_CONFIG)
    except (NumericalBlowupError, InfeasibleStartError) as e:
        print(
            f"Error: simulation failed: {e}\nTry a smaller engine.h or gentler gains.",
            file=sys.stderr,
        )
        sys.exit(EXIT_NUMERICAL)

    if code == EXIT_SAFETY:
        print("Error: safety monitor tripped (max V exceeded V_u).", file=sys.stderr)
    sys.exit(code)


if __name__ == "__main__":
    main()
