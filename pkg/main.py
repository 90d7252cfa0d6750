"""
Command-line entry point.

    python main.py verify all --config run.ini --seed 7 --out results
    python main.py sample --n 10
    python main.py simulate
    python main.py adjudicate --csv

Without --config the built-in default fixture is used. Exit status is 0 when
every check passes, 1 when one fails and 2 on a computation error.
"""

import argparse
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ComputationError, RunConfigError
from app.core.logging_config import setup_logging
from app.data import DEFAULT_CONFIG
from app.schemas.run_config import CHECK_NAMES, RunConfig, parse_config
from app.services.job_service import EXIT_ERROR, run

logger = logging.getLogger("app.main")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compound-poisson-lab",
        description="Sample, verify and simulate compound Poisson configuration spaces.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run-config file (default: built-in fixture)")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--n", type=int, help="sample size, overrides the config")
    common.add_argument("--out", type=str, help="output directory")
    common.add_argument("--csv", action="store_true", help="also write flat CSV rows")
    common.add_argument("--z-max", type=float, dest="z_max", help="pass threshold for |z|")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("sample", parents=[common], help="write sampled configurations")
    verify = commands.add_parser("verify", parents=[common], help="run verification checks")
    verify.add_argument("check", choices=("all", *CHECK_NAMES), help="check name or 'all'")
    commands.add_parser("simulate", parents=[common], help="write an equilibrium trajectory")
    commands.add_parser(
        "adjudicate", parents=[common], help="discriminate the Dirichlet operator conventions"
    )
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Read the config and apply command-line overrides."""
    text = args.config.read_text(encoding="utf-8") if args.config else DEFAULT_CONFIG
    config = parse_config(text)

    job_update: dict = {"command": args.command}
    if args.command == "verify":
        job_update["check"] = args.check
    if args.seed is not None:
        job_update["seed"] = args.seed
    if args.n is not None:
        job_update["n"] = args.n
    if args.z_max is not None:
        job_update["z_max"] = args.z_max
    output_update: dict = {}
    if args.out is not None:
        output_update["dir"] = args.out
    if args.csv:
        output_update["csv"] = True

    # overrides obey the same constraints as config values
    try:
        job = type(config.job).model_validate({**config.job.model_dump(), **job_update})
        output = type(config.output).model_validate({**config.output.model_dump(), **output_update})
    except ValidationError as exc:
        raise RunConfigError(
            [(None, f"--{err['loc'][0]}: {err['msg']}") for err in exc.errors()]
        ) from exc
    return config.model_copy(update={"job": job, "output": output})


def main(argv: list[str] | None = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        logger.info(f"Environment: {settings.environment}")
        return run(config)
    except ComputationError as e:
        logger.error(f"{args.command} failed: {e.message}", extra={"error": e.to_dict()})
        print(f"ERROR {e.message}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"ERROR {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
