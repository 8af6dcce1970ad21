"""Command-line front end.

Usage: ordered-capacity run --config experiment.cfg [--out DIR] [--workers N]

Exit codes: 0 success, 1 configuration error, 2 numeric failure.  The
ORDERED_CAPACITY_LOG environment variable (DEBUG/INFO/WARNING/ERROR)
controls log verbosity.
"""

import argparse
import logging
import os
import sys

from .config import load_config
from .errors import (
    CapacityError,
    ConfigError,
    LevelError,
    NoRootError,
    NumericDegeneracyError,
    OptimizerError,
)
from .runner import run

_NUMERIC_ERRORS = (
    CapacityError,
    LevelError,
    NoRootError,
    NumericDegeneracyError,
    OptimizerError,
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ordered-capacity",
        description="Metrics, stability checks, and rate optimization for the "
                    "ordered-entry loss system.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run the experiment described by a config file")
    runp.add_argument("--config", required=True, help="path to the key=value config file")
    runp.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    runp.add_argument("--workers", type=int, default=1,
                      help="process-pool size for grid modes")
    return parser


def main(argv=None):
    level = os.environ.get("ORDERED_CAPACITY_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        files = run(cfg, out_dir=args.out, workers=max(1, args.workers))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    for path in files:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
