"""
Command-line interface.

Each verb runs one pipeline stage against an artifact directory; ``pipeline``
runs a list of stages. Errors are reported on stderr and mapped to exit codes:
2 for configuration and format errors, 3 for staging and provenance errors,
4 for numerical divergence.
"""

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path
from typing import List, Optional

from .config import RunConfig, default_out_dir
from .errors import ConfigurationError, TrajGenError, classify_error
from .harness.pipeline import STAGES, run_pipeline

logger = logging.getLogger(__name__)

VERB_STAGES = {
    "expert-collect": ["expert"],
    "train-gdm": ["train-gdm"],
    "generate": ["generate"],
    "train-offline": ["train-offline"],
    "train-baseline": ["train-baseline"],
    "evaluate": ["evaluate"],
}


def configure_logging() -> None:
    level_name = os.environ.get("LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wni-trajgen", description="WNI-guided trajectory generation and offline power allocation"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--seed", type=int, help="Master seed")
    common.add_argument("--out", type=Path, help="Artifact directory")
    common.add_argument("--intent", type=int, action="append", help="Restrict to intent K (repeatable)")
    common.add_argument("--power", type=float, action="append", help="Restrict to total power W (repeatable)")

    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERB_STAGES:
        sub.add_parser(verb, parents=[common], help=f"Run the {VERB_STAGES[verb][0]} stage")
    pipeline = sub.add_parser("pipeline", parents=[common], help="Run several stages in order")
    pipeline.add_argument(
        "--stages", default=",".join(STAGES), help=f"Comma-separated subset of {','.join(STAGES)}"
    )
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Environment and file configuration with command-line overrides applied."""
    config = RunConfig.from_env(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.intent or args.power:
        evaluation = config.eval.model_dump()
        if args.intent:
            evaluation["intents"] = sorted(set(args.intent))
        if args.power:
            evaluation["powers"] = sorted(set(args.power))
        overrides["eval"] = evaluation
    return config.with_overrides(**overrides) if overrides else config


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = resolve_config(args)
        out_dir = args.out or default_out_dir()
        if out_dir is None:
            raise ConfigurationError("No artifact directory: pass --out or set WNI_TRAJGEN_OUT")
        stages = VERB_STAGES.get(args.verb) or args.stages.split(",")
        run_pipeline(config, out_dir, stages)
        logger.info(f"Artifacts in {out_dir}")
        return 0
    except Exception as e:
        error = classify_error(e)
        logger.error(f"{type(error).__name__}: {error}")
        if not isinstance(e, TrajGenError):
            logger.debug(traceback.format_exc())
        print(json.dumps(error.to_dict()), file=sys.stderr)
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
