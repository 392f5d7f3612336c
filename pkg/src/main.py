#!/usr/bin/env python3
"""redstates - run reduced-state scenarios and write their reports."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .classical import GridError
from .config import SCENARIOS, ConfigError, build_config, parse_config
from .decoherence import DecoherenceError
from .dynamics import DynamicsError
from .measurement import MeasurementError
from .reduction import ReductionError
from .report import render
from .scenarios import ScenarioError, run
from .states import StateError
from .tensor import DimensionLimitError, SpaceError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIMENSION = 3

PARAMETER_ERRORS = (SpaceError, StateError, DynamicsError, ReductionError,
                    MeasurementError, DecoherenceError, GridError, ScenarioError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="redstates",
        description="redstates - reduced states, decoherence and collapse-free measurement chains"
    )
    parser.add_argument(
        'scenario',
        choices=SCENARIOS,
        help="Scenario to run"
    )
    parser.add_argument(
        '--config',
        metavar='PATH',
        help="Scenario config (JSON or key = value); '-' reads stdin"
    )
    parser.add_argument(
        '--out',
        metavar='PATH',
        help="Report file (default: stdout)"
    )
    parser.add_argument(
        '--format',
        choices=('csv', 'json'),
        help="Report format (default: csv)"
    )
    parser.add_argument(
        '--seed',
        type=int,
        help="Random seed; overrides the config"
    )
    parser.add_argument(
        '--tolerance',
        type=float,
        help="Residual tolerance for invariant checks (default: 1e-10)"
    )
    parser.add_argument(
        '-v', '--verbose',
        action='count',
        default=0,
        help="Log progress to stderr (-vv for debug detail)"
    )
    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit status."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    overrides = {"seed": args.seed, "tolerance": args.tolerance,
                 "format": args.format, "output": args.out}
    try:
        if args.config:
            config = parse_config(args.config, args.scenario, overrides)
        else:
            config = build_config(args.scenario, {}, overrides=overrides)
        report = run(config)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DimensionLimitError as e:
        print(f"Dimension limit: {e}", file=sys.stderr)
        return EXIT_DIMENSION
    except PARAMETER_ERRORS as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    text = render(report, config.format)
    if config.output:
        try:
            Path(config.output).write_text(text)
        except OSError as e:
            print(f"Error: cannot write report: {e}", file=sys.stderr)
            return EXIT_CONFIG
        logging.getLogger(__name__).info("wrote %s", config.output)
    else:
        sys.stdout.write(text)

    for check in report.failures():
        print(f"Check failed: {check.name} (residual {check.residual:.3e}, "
              f"tolerance {check.tolerance:.3e})", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


if __name__ == '__main__':
    sys.exit(main())
