"""Command-line entry point: ``ris-noma run`` and ``ris-noma compare``."""

import argparse
import json
import sys
from typing import List, Optional

import structlog

from ris_noma.__about__ import __version__
from ris_noma.config import load_config
from ris_noma.errors import ConfigError, RisNomaError
from ris_noma.experiments import CompareMetric, compare_regions, run
from ris_noma.log import configure_logging

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ris-noma",
        description="Rate regions, RIS placement and beamforming experiments for RIS-NOMA",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-json", action="store_true", help="emit JSON log lines")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="run the experiment described by a TOML file")
    run_parser.add_argument("config", help="path to the experiment TOML file")
    run_parser.add_argument("--seed", type=int, default=None, help="override the config seed")

    compare_parser = commands.add_parser("compare", help="compare exported region CSV files")
    compare_parser.add_argument("files", nargs="+", help="region CSV files")
    compare_parser.add_argument(
        "--metric",
        choices=[m.value for m in CompareMetric],
        default=CompareMetric.CONTAINMENT.value,
    )
    compare_parser.add_argument("--tolerance", type=float, default=1e-6)
    compare_parser.add_argument(
        "--allow-mismatch",
        action="store_true",
        help="compare regions computed on different channel realizations",
    )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, json_output=args.log_json)
    try:
        if args.command == "run":
            config = load_config(args.config, seed_override=args.seed)
            summary = run(config)
            print(
                json.dumps(
                    {
                        "experiment": summary.experiment,
                        "output_dir": str(summary.output_dir),
                        "artifacts": summary.artifacts,
                        "config_hash": summary.config_hash,
                    },
                    sort_keys=True,
                )
            )
        else:
            report = compare_regions(
                args.files,
                args.metric,
                tolerance=args.tolerance,
                allow_mismatch=args.allow_mismatch,
            )
            print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    except ConfigError as e:
        logger.error("config_invalid", error=e.args[0], fields=e.field_errors)
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG
    except RisNomaError as e:
        logger.error("experiment_failed", error=str(e), error_type=type(e).__name__)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
