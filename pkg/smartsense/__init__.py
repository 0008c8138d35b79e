"""SmartSense - action recommendation for smart homes.

Next device-control prediction from a window of past events, using
context-aware queried transformer encoders and routine-based regularization
of the device embeddings.

Basic usage:
    from smartsense import prepare_dataset, train, load_run_config

    dataset = prepare_dataset("log.csv", "routines.csv", "manifest.json", "prepared")
    config, settings = load_run_config(
        None,
        n_devices=dataset.vocabulary.n_devices,
        n_controls=dataset.vocabulary.n_controls,
    )
    report = train(dataset.train, dataset.val, dataset.routines, config, settings,
                   vocabulary=dataset.vocabulary)
"""

import logging
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from smartsense.common import (
    DataError,
    NumericError,
    SmartSenseError,
    UsageError,
    configure_logging,
)
from smartsense.config import ModelConfig, TrainSettings, apply_ablation, load_run_config
from smartsense.constants import DATASET_DB_NAME
from smartsense.data import (
    build_instances,
    dataset_statistics,
    load_manifest,
    parse_log_csv,
    parse_routines,
    split_instances,
)
from smartsense.db import PreparedDataset, load_dataset, write_dataset
from smartsense.evaluation import EvalReport, evaluate_model, model_scorer, pop_baseline
from smartsense.export.writers import write_dataset_stats
from smartsense.model import SmartSenseModel, load_checkpoint, save_checkpoint
from smartsense.training import TrainReport, train

logger = logging.getLogger(__name__)


def prepare_dataset(
    log_path: str | Path,
    routines_path: str | Path | None,
    manifest_path: str | Path,
    out_dir: str | Path,
    seed: int = 0,
) -> PreparedDataset:
    """Ingest a log and routine file into a prepared dataset directory.

    Builds the vocabulary from the log, windows every session, splits 7:1:2
    with the seed, counts training labels, maps routines through the frozen
    vocabulary and writes dataset.db plus dataset_stats.csv to out_dir.
    """
    manifest = load_manifest(manifest_path)
    parsed = parse_log_csv(log_path, tz_offset_minutes=manifest.tz_offset_minutes)
    vocab = parsed.vocabulary.freeze()
    instances = build_instances(parsed.sessions, manifest.window_length)
    train_set, val_set, test_set = split_instances(instances, seed)
    vocab.count_controls(train_set)
    routines = parse_routines(routines_path, vocab) if routines_path else []

    stats = dataset_statistics(
        parsed.sessions, instances, vocab, routines, parsed.skipped_rows
    )
    dataset = PreparedDataset(
        vocabulary=vocab,
        manifest=manifest,
        train=train_set,
        val=val_set,
        test=test_set,
        routines=routines,
        metadata={"split_seed": seed, **stats},
    )
    out_dir = Path(out_dir)
    write_dataset(out_dir / DATASET_DB_NAME, dataset)
    write_dataset_stats(stats, out_dir)
    logger.info(
        "Prepared %d instances (%d/%d/%d) over %d devices, %d controls, %d routines",
        len(instances),
        len(train_set),
        len(val_set),
        len(test_set),
        vocab.n_devices,
        vocab.n_controls,
        len(routines),
    )
    return dataset


__all__ = [
    "prepare_dataset",
    "configure_logging",
    # Errors
    "DataError",
    "NumericError",
    "SmartSenseError",
    "UsageError",
    # Configuration
    "ModelConfig",
    "TrainSettings",
    "apply_ablation",
    "load_run_config",
    # Data and models
    "PreparedDataset",
    "load_dataset",
    "SmartSenseModel",
    "load_checkpoint",
    "save_checkpoint",
    # Training and evaluation
    "TrainReport",
    "train",
    "EvalReport",
    "evaluate_model",
    "model_scorer",
    "pop_baseline",
]

try:
    __version__ = version("smartsense")
except PackageNotFoundError:
    __version__ = "0.0.0.dev"  # Fallback for development without install
