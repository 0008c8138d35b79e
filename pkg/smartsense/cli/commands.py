"""Subcommand implementations.

Each run_* function takes parsed arguments, prints its result to standard
output and returns an exit code; failures propagate as SmartSenseError.
"""

import json
import logging
from datetime import datetime
from pathlib import Path

import numpy as np

from smartsense import prepare_dataset
from smartsense.common import DataError, UsageError
from smartsense.config import ModelConfig, apply_ablation, load_run_config
from smartsense.constants import METRICS_LOG_COLUMNS, N_DOW, N_HOUR_BINS, REPORT_COLUMNS
from smartsense.data.types import ActionEvent, Instance
from smartsense.data.vocab import Vocabulary
from smartsense.db import load_dataset
from smartsense.evaluation import evaluate_model, model_scorer, pop_baseline
from smartsense.export.utils import format_csv
from smartsense.export.writers import (
    Rows,
    attention_rows,
    dataset_stats_rows,
    hour_gap_rows,
    sequence_alpha_rows,
    similarity_rows,
    top_k_rows,
    write_eval_report,
    write_rows_csv,
)
from smartsense.model.analysis import (
    embedding_similarity,
    export_action_attention,
    hour_similarity_by_gap,
    offdiag_std,
    routine_similarity_gap,
    sequence_attention,
)
from smartsense.model.checkpoint import Checkpoint, load_checkpoint
from smartsense.synth import SynthSpec, write_synthetic
from smartsense.training import train

logger = logging.getLogger(__name__)

HISTORY_FIELDS = ("device", "control", "dow", "hour_bin")


def _banner(title: str) -> None:
    logger.info("=" * 70)
    logger.info("%s", title)
    logger.info("=" * 70)


def _emit(text: str) -> None:
    print(text, end="" if text.endswith("\n") else "\n")


def model_label(config: ModelConfig) -> str:
    """Report name of a model variant, e.g. smartsense or smartsense-reg."""
    off = [name for name in ("act", "seq", "reg") if getattr(config, f"{name}_off")]
    if len(off) == 3:
        return "smartsense-all"
    return "-".join(["smartsense", *off])


def _check_context(dow: int, hour_bin: int) -> None:
    if not 0 <= dow < N_DOW:
        raise UsageError(f"--dow must be in [0, {N_DOW}), got {dow}")
    if not 0 <= hour_bin < N_HOUR_BINS:
        raise UsageError(f"--hour must be in [0, {N_HOUR_BINS}), got {hour_bin}")


def _require_vocabulary(checkpoint: Checkpoint, path) -> Vocabulary:
    if checkpoint.vocabulary is None:
        raise DataError(f"Checkpoint {path} carries no vocabulary")
    return checkpoint.vocabulary


def read_history(path, vocab: Vocabulary, history_length: int) -> tuple[ActionEvent, ...]:
    """Parse a history JSON array of {device, control, dow, hour_bin} objects.

    Raises:
        UsageError: If the number of events is not history_length.
        DataError: On unreadable JSON, missing fields or unknown names.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise DataError(f"History file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"Cannot parse history {path}: {e}") from e
    if not isinstance(raw, list):
        raise DataError(f"History {path} must be a JSON array")
    if len(raw) != history_length:
        raise UsageError(
            f"History has {len(raw)} events; this model expects exactly {history_length} (W-1)"
        )
    events = []
    for position, item in enumerate(raw):
        if not isinstance(item, dict) or any(field not in item for field in HISTORY_FIELDS):
            raise DataError(
                f"History event {position} needs fields {', '.join(HISTORY_FIELDS)}"
            )
        control_id = vocab.control_id(str(item["device"]), str(item["control"]))
        if control_id is None:
            raise DataError(
                f"History event {position}: unknown control {item['device']}:{item['control']}"
            )
        try:
            dow, hour_bin = int(item["dow"]), int(item["hour_bin"])
        except (TypeError, ValueError) as e:
            raise DataError(
                f"History event {position}: dow and hour_bin must be integers, "
                f"got {item['dow']!r}, {item['hour_bin']!r}"
            ) from e
        if not (0 <= dow < N_DOW and 0 <= hour_bin < N_HOUR_BINS):
            raise DataError(f"History event {position}: context ({dow}, {hour_bin}) out of range")
        events.append(ActionEvent(vocab.device_of(control_id), control_id, dow, hour_bin))
    return tuple(events)


def _top_k(probabilities: np.ndarray, k: int) -> list[int]:
    return [int(i) for i in np.argsort(-probabilities, kind="stable")[:k]]


def recommend(
    checkpoint_path, history_path, dow: int, hour_bin: int, k: int
) -> list[tuple[str, float]]:
    """Top-k (control label, probability) for a history and target context."""
    _check_context(dow, hour_bin)
    checkpoint = load_checkpoint(checkpoint_path)
    vocab = _require_vocabulary(checkpoint, checkpoint_path)
    model = checkpoint.model
    if not 1 <= k <= model.config.n_controls:
        raise UsageError(f"--k must be in [1, {model.config.n_controls}], got {k}")
    history = read_history(history_path, vocab, model.config.history_length)
    instance = Instance(history, dow, hour_bin, target_control_id=0)
    probabilities = model.predict_controls(instance).detach().numpy()
    return [(vocab.control_label(i), float(probabilities[i])) for i in _top_k(probabilities, k)]


def run_prepare(args):
    """Run the prepare command."""
    _banner("SmartSense Data Preparation")
    logger.info("   Log: %s", args.log)
    logger.info("   Routines: %s", args.routines or "(none)")
    logger.info("   Manifest: %s", args.manifest)
    logger.info("   Output: %s", args.out)
    logger.info("   Split Seed: %d", args.seed)

    dataset = prepare_dataset(args.log, args.routines, args.manifest, args.out, args.seed)
    stats = {key: value for key, value in dataset.metadata.items() if key != "split_seed"}
    _emit(format_csv(*dataset_stats_rows(stats)))
    return 0


def run_train(args):
    """Run the train command."""
    start_time = datetime.now()
    _banner("SmartSense Training")
    dataset = load_dataset(args.data)
    vocab = dataset.vocabulary
    overrides = {
        "seed": args.seed,
        "max_epochs": args.max_epochs,
        "patience": args.patience,
        "checkpoint_dir": args.out,
        "window_length": dataset.manifest.window_length,
    }
    config, settings = load_run_config(
        args.config,
        n_devices=vocab.n_devices,
        n_controls=vocab.n_controls,
        overrides=overrides,
    )
    config = apply_ablation(config, args.ablate)

    logger.info("\nConfiguration:")
    logger.info("   Dataset: %s", args.data)
    logger.info("   Variant: %s", model_label(config))
    logger.info(
        "   d=%d, layers=%d, heads=%d, W=%d",
        config.d,
        config.layers,
        config.heads,
        config.window_length,
    )
    logger.info(
        "   lr=%g, l2=%g, batch=%d, lambda=%g, negatives=%d",
        config.lr,
        config.l2,
        config.batch_size,
        config.lambda_reg,
        config.negatives,
    )
    logger.info(
        "   Seed: %d, max epochs: %d, patience: %d",
        settings.seed,
        settings.max_epochs,
        settings.patience,
    )
    logger.info("   Checkpoint Directory: %s", settings.checkpoint_dir)
    logger.info("\nStarted: %s\n", start_time.strftime("%Y-%m-%d %H:%M:%S"))

    report = train(
        dataset.train,
        dataset.val,
        dataset.routines,
        config,
        settings,
        vocabulary=vocab,
    )
    duration = str(datetime.now() - start_time).split(".")[0]
    _banner("Training Completed Successfully!")
    logger.info("   Best epoch: %d (val mAP@1 %.4f)", report.best_epoch, report.best_val_map1)
    logger.info("   Checkpoint: %s", report.checkpoint_path)
    logger.info("Duration: %s", duration)
    _emit(format_csv([record.as_row() for record in report.epochs], METRICS_LOG_COLUMNS))
    return 0


def run_evaluate(args):
    """Run the evaluate command."""
    _banner("SmartSense Evaluation")
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    model = checkpoint.model
    if model.config.n_controls != dataset.vocabulary.n_controls or (
        model.config.n_devices != dataset.vocabulary.n_devices
    ):
        raise DataError(
            f"Checkpoint vocabulary ({model.config.n_devices} devices, "
            f"{model.config.n_controls} controls) does not match {args.data}"
        )

    reports = [evaluate_model(model_scorer(model), dataset.test, model_label(model.config))]
    if args.baseline == "pop":
        scorer = pop_baseline(dataset.train, dataset.vocabulary.n_controls)
        reports.append(evaluate_model(scorer, dataset.test, "pop"))
    for report in reports:
        logger.info(
            "   %s: mAP@1 %.4f on %d instances", report.model, report.map[1], report.n_instances
        )
        if args.out:
            write_eval_report(report, args.out)
    _emit(format_csv([report.as_row() for report in reports], REPORT_COLUMNS))
    return 0


def run_recommend(args):
    """Run the recommend command."""
    ranked = recommend(args.checkpoint, args.history, args.dow, args.hour, args.k)
    rows, fieldnames = top_k_rows([(label, f"{p:.6f}") for label, p in ranked])
    _emit(format_csv(rows, fieldnames))
    return 0


def _analyze_attention(args, checkpoint: Checkpoint, vocab: Vocabulary) -> list[Rows]:
    if None in (args.dow, args.hour, args.device, args.control):
        raise UsageError("--mode attention needs --dow, --hour, --device and --control")
    _check_context(args.dow, args.hour)
    control_id = vocab.control_id(args.device, args.control)
    if control_id is None:
        raise DataError(f"Unknown control {args.device}:{args.control}")
    event = ActionEvent(vocab.device_of(control_id), control_id, args.dow, args.hour)
    return [attention_rows(export_action_attention(checkpoint.model, event))]


def _analyze_sequence(args, checkpoint: Checkpoint, vocab: Vocabulary) -> list[Rows]:
    if None in (args.history, args.dow, args.hour):
        raise UsageError("--mode seq-attention needs --history, --dow and --hour")
    _check_context(args.dow, args.hour)
    model = checkpoint.model
    if not 1 <= args.k <= model.config.n_controls:
        raise UsageError(f"--k must be in [1, {model.config.n_controls}], got {args.k}")
    history = read_history(args.history, vocab, model.config.history_length)
    result = sequence_attention(model, Instance(history, args.dow, args.hour, 0), args.k)
    labels = [vocab.control_label(event.control_id) for event in history]
    top = [(vocab.control_label(i), p) for i, p in result.top]
    return [sequence_alpha_rows(result.alpha, labels), top_k_rows(top)]


def _analyze_device_similarity(args, checkpoint: Checkpoint, vocab: Vocabulary) -> list[Rows]:
    S = embedding_similarity(checkpoint.model.device_embedding.weight)
    logger.info("   Off-diagonal std: %.4f", offdiag_std(S))
    if args.data:
        routines = load_dataset(args.data).routines
        gap = routine_similarity_gap(S, routines)
        logger.info(
            "   Routine pairs: intra %.4f, inter %.4f, gap %.4f", gap.intra, gap.inter, gap.gap
        )
    return [similarity_rows(S, vocab.device_names)]


def _analyze_hour_similarity(args, checkpoint: Checkpoint, vocab: Vocabulary) -> list[Rows]:
    S = embedding_similarity(checkpoint.model.hour_embedding.weight)
    return [hour_gap_rows(hour_similarity_by_gap(S))]


ANALYSES = {
    "attention": _analyze_attention,
    "seq-attention": _analyze_sequence,
    "device-sim": _analyze_device_similarity,
    "hour-sim": _analyze_hour_similarity,
}

# File suffixes for the second and later tables of a multi-table analysis
EXTRA_TABLE_SUFFIXES = ("_topk",)


def run_analyze(args):
    """Run the analyze command."""
    _banner(f"SmartSense Analysis: {args.mode}")
    checkpoint = load_checkpoint(args.checkpoint)
    vocab = _require_vocabulary(checkpoint, args.checkpoint)
    tables = ANALYSES[args.mode](args, checkpoint, vocab)
    if not args.out:
        _emit("".join(format_csv(rows, fieldnames) for rows, fieldnames in tables))
        return 0

    out = Path(args.out)
    paths = [out] + [
        out.with_name(f"{out.stem}{suffix}{out.suffix}") for suffix in EXTRA_TABLE_SUFFIXES
    ]
    for table, path in zip(tables, paths):
        write_rows_csv(table, path)
        logger.info("   Wrote %s", path)
    return 0


def run_synth(args):
    """Run the synth command."""
    _banner("SmartSense Synthetic Data")
    path = Path(args.spec)
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise DataError(f"Synthetic spec not found: {path}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"Cannot parse synthetic spec {path}: {e}") from e
    if not isinstance(data, dict):
        raise DataError(f"Synthetic spec {path} must be a JSON object")
    spec = SynthSpec.from_dict(data)
    dataset = write_synthetic(spec, args.out)
    oracle = {"model": "bayes_optimal", **dataset.bayes_optimal}
    _emit(format_csv([oracle], REPORT_COLUMNS))
    return 0
