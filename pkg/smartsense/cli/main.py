"""
SmartSense - Command Line Interface

Usage:
    # Ingest a log and routine file into a prepared dataset:
    smartsense prepare --log log.csv --routines routines.csv --manifest manifest.json --out prepared

    # Train (optionally as an ablation variant):
    smartsense train --data prepared --config configs/train_default.yaml --out runs/full
    smartsense train --data prepared --out runs/no-reg --ablate reg

    # Evaluate a checkpoint, with the popularity baseline alongside:
    smartsense evaluate --checkpoint runs/full/best.ckpt --data prepared --baseline pop

    # Top-k next controls for a history:
    smartsense recommend --checkpoint runs/full/best.ckpt --history history.json --dow 2 --hour 6 --k 5

    # Analysis exports:
    smartsense analyze --checkpoint runs/full/best.ckpt --mode device-sim --out device_sim.csv

    # Synthetic data with a known Bayes-optimal ceiling:
    smartsense synth --spec configs/synth_acceptance.json --out synthetic

Results go to standard output; progress and errors go to standard error.

Exit codes:
    0 success, 1 usage error, 2 data error, 3 numeric failure.

Configuration:
    Training hyperparameters resolve from flags > --config file > environment
    variables SMARTSENSE_<FIELD> (a .env file is loaded) > defaults, e.g.
        SMARTSENSE_D=64
        SMARTSENSE_BATCH_SIZE=512
        SMARTSENSE_DEBUG=true
"""

import argparse
import logging
import sys
import traceback
from os import getenv

from dotenv import load_dotenv

from smartsense.cli.commands import (
    run_analyze,
    run_evaluate,
    run_prepare,
    run_recommend,
    run_synth,
    run_train,
)
from smartsense.common import SmartSenseError, UsageError, configure_logging
from smartsense.config import TRUE_VALUES
from smartsense.constants import ABLATIONS, ENV_PREFIX

logger = logging.getLogger(__name__)

ANALYZE_MODES = ("attention", "seq-attention", "device-sim", "hour-sim")


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage().rstrip()}")


def _create_parser():
    """Create and return the argument parser."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--debug",
        action="store_true",
        help=f"Enable debug logging and tracebacks (env: {ENV_PREFIX}DEBUG)",
    )

    parser = _ArgumentParser(
        prog="smartsense",
        description="SmartSense action recommendation for smart homes",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  smartsense synth --spec configs/synth_acceptance.json --out synthetic
  smartsense prepare --log synthetic/log.csv --routines synthetic/routines.csv \\
      --manifest synthetic/manifest.json --out prepared
  smartsense train --data prepared --config configs/train_default.yaml --out runs/full
  smartsense evaluate --checkpoint runs/full/best.ckpt --data prepared --baseline pop
        """,
    )
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    prepare = subparsers.add_parser(
        "prepare", parents=[common], help="Ingest log and routine CSVs"
    )
    prepare.add_argument(
        "--log", required=True, help="Log CSV (session_id,timestamp,device,control)"
    )
    prepare.add_argument("--routines", help="Routine CSV (routine_id,devices)")
    prepare.add_argument("--manifest", required=True, help="Dataset manifest JSON")
    prepare.add_argument("--out", required=True, help="Prepared dataset directory")
    prepare.add_argument("--seed", type=int, default=0, help="Split seed (default: 0)")

    train = subparsers.add_parser("train", parents=[common], help="Train a model")
    train.add_argument("--data", required=True, help="Prepared dataset directory")
    train.add_argument("--config", help="Training config (JSON or YAML)")
    train.add_argument("--out", help="Checkpoint directory (overrides checkpoint_dir)")
    train.add_argument("--ablate", choices=ABLATIONS, help="Ablation variant")
    train.add_argument("--seed", type=int, help="Training seed")
    train.add_argument("--max-epochs", type=int, help="Maximum epochs")
    train.add_argument("--patience", type=int, help="Early-stopping patience")

    evaluate = subparsers.add_parser(
        "evaluate", parents=[common], help="Evaluate on the test split"
    )
    evaluate.add_argument("--checkpoint", required=True, help="Checkpoint file")
    evaluate.add_argument("--data", required=True, help="Prepared dataset directory")
    evaluate.add_argument("--baseline", choices=["pop"], help="Also evaluate a baseline")
    evaluate.add_argument("--out", help="Directory for JSON/CSV reports")

    recommend = subparsers.add_parser(
        "recommend", parents=[common], help="Top-k next controls for a history"
    )
    recommend.add_argument("--checkpoint", required=True, help="Checkpoint file")
    recommend.add_argument("--history", required=True, help="History JSON")
    recommend.add_argument("--dow", type=int, required=True, help="Target day of week (Monday=0)")
    recommend.add_argument("--hour", type=int, required=True, help="Target 3-hour bin (0-7)")
    recommend.add_argument("--k", type=int, default=5, help="List length (default: 5)")

    analyze = subparsers.add_parser(
        "analyze", parents=[common], help="Attention and embedding exports"
    )
    analyze.add_argument("--checkpoint", required=True, help="Checkpoint file")
    analyze.add_argument("--mode", required=True, choices=ANALYZE_MODES)
    analyze.add_argument("--dow", type=int, help="Day of week (attention, seq-attention)")
    analyze.add_argument("--hour", type=int, help="3-hour bin (attention, seq-attention)")
    analyze.add_argument("--device", help="Device name (attention)")
    analyze.add_argument("--control", help="Control name (attention)")
    analyze.add_argument("--history", help="History JSON (seq-attention)")
    analyze.add_argument("--k", type=int, default=5, help="Top-k length (seq-attention)")
    analyze.add_argument("--data", help="Prepared dataset for routine statistics (device-sim)")
    analyze.add_argument("--out", help="CSV path (default: standard output)")

    synth = subparsers.add_parser(
        "synth", parents=[common], help="Generate a synthetic dataset"
    )
    synth.add_argument("--spec", required=True, help="Synthetic spec JSON")
    synth.add_argument("--out", required=True, help="Output directory")

    return parser


COMMANDS = {
    "prepare": run_prepare,
    "train": run_train,
    "evaluate": run_evaluate,
    "recommend": run_recommend,
    "analyze": run_analyze,
    "synth": run_synth,
}


def _debug_enabled(args) -> bool:
    if getattr(args, "debug", False):
        return True
    load_dotenv(".env", override=False)
    return (getenv(f"{ENV_PREFIX}DEBUG") or "").strip().lower() in TRUE_VALUES


def main(argv=None):
    """Main entry point for the CLI.

    Args:
        argv: Command line arguments (defaults to sys.argv[1:])

    Returns:
        Process exit code.
    """
    parser = _create_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return e.exit_code

    if args.command is None:
        parser.print_help(sys.stderr)
        return UsageError.exit_code

    debug = _debug_enabled(args)
    configure_logging(debug)
    try:
        return COMMANDS[args.command](args)
    except SmartSenseError as e:
        logger.error("=" * 70)
        logger.error("%s failed: %s", args.command, e)
        logger.error("=" * 70)
        if debug:
            traceback.print_exc()
        else:
            logger.error("Run with --debug flag for detailed error information.")
        return e.exit_code
