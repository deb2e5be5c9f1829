"""
Command-line entry point: `run <config>` and `verify <config>`.
"""

import argparse
import asyncio
import sys
from typing import Optional, Sequence

from app.cli.commands import RunOptions, run_command, verify_command
from app.core.config import settings
from app.core.log import configure_logging


def positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.PROJECT_NAME, description=settings.PROJECT_DESCRIPTION
    )
    parser.add_argument("--version", action="version", version=settings.VERSION)
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("run", "execute a scenario and write its result files"),
        ("verify", "run the invariant suite of a scenario and print a pass/fail table"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("config", help="scenario YAML file")
        sub.add_argument("--jobs", type=positive_int, default=None, help="worker threads")
        sub.add_argument(
            "--stepper", choices=["exp-midpoint", "magnus4"], default=None, help="override stepper"
        )
        sub.add_argument("--steps", type=positive_int, default=None, help="override grid steps")
        if name == "run":
            sub.add_argument(
                "--out", default=None, help=f"output directory (default {settings.OUTPUT_DIR})"
            )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(settings.LOG_LEVEL)
    options = RunOptions(
        jobs=args.jobs,
        stepper=args.stepper,
        steps=args.steps,
        out=getattr(args, "out", None),
    )
    if args.command == "run":
        return asyncio.run(run_command(args.config, options))
    return asyncio.run(verify_command(args.config, options))


if __name__ == "__main__":
    sys.exit(main())
