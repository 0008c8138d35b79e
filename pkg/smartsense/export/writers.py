"""CSV and JSON writers for reports, training logs and analysis exports.

Each analysis export has a *_rows builder returning (rows, fieldnames), used
both for files and for printing to standard output.
"""

import logging
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from smartsense.constants import (
    ACTION_SLOTS,
    DATASET_STATS_NAME,
    METRICS_LOG_COLUMNS,
    METRICS_LOG_NAME,
    REPORT_COLUMNS,
)
from smartsense.evaluation import EvalReport
from smartsense.export.utils import write_json, write_to_csv

logger = logging.getLogger(__name__)

Rows = tuple[list[dict], tuple[str, ...]]


def _split_path(path) -> tuple[Path, str]:
    path = Path(path)
    return path.parent, path.name


def write_eval_report(report: EvalReport, out_dir) -> tuple[Path, Path]:
    """Write <model>_report.json and the one-row <model>_report.csv."""
    json_path = write_json(report.to_dict(), out_dir, f"{report.model}_report.json")
    csv_path = write_to_csv(
        [report.as_row()], out_dir, f"{report.model}_report.csv", REPORT_COLUMNS
    )
    return json_path, csv_path


def write_metrics_log(records: Iterable, out_dir) -> Path:
    """Per-epoch training log (epoch,train_loss,val_map1,seconds)."""
    rows = [record.as_row() for record in records]
    return write_to_csv(rows, out_dir, METRICS_LOG_NAME, METRICS_LOG_COLUMNS)


def dataset_stats_rows(stats: dict[str, int]) -> Rows:
    return [{"statistic": k, "value": v} for k, v in stats.items()], ("statistic", "value")


def write_dataset_stats(stats: dict[str, int], out_dir) -> Path:
    rows, fieldnames = dataset_stats_rows(stats)
    return write_to_csv(rows, out_dir, DATASET_STATS_NAME, fieldnames)


def attention_rows(matrix: np.ndarray) -> Rows:
    """4x4 action attention, rows attending over columns in slot order."""
    rows = [
        {"slot": slot, **{column: matrix[i, j] for j, column in enumerate(ACTION_SLOTS)}}
        for i, slot in enumerate(ACTION_SLOTS)
    ]
    return rows, ("slot", *ACTION_SLOTS)


def similarity_rows(S: np.ndarray, labels: Sequence[str]) -> Rows:
    rows = [
        {"name": label, **{other: S[i, j] for j, other in enumerate(labels)}}
        for i, label in enumerate(labels)
    ]
    return rows, ("name", *labels)


def hour_gap_rows(gaps: Sequence[tuple[int, float]]) -> Rows:
    rows = [{"gap_bins": gap, "mean_cosine": value} for gap, value in gaps]
    return rows, ("gap_bins", "mean_cosine")


def sequence_alpha_rows(alpha: np.ndarray, history_labels: Sequence[str]) -> Rows:
    rows = [
        {"position": i, "control": label, "alpha": float(alpha[i])}
        for i, label in enumerate(history_labels)
    ]
    return rows, ("position", "control", "alpha")


def top_k_rows(top: Sequence[tuple[str, float]]) -> Rows:
    rows = [
        {"rank": rank, "control": label, "probability": probability}
        for rank, (label, probability) in enumerate(top, start=1)
    ]
    return rows, ("rank", "control", "probability")


def write_rows_csv(rows_and_fields: Rows, path) -> Path:
    rows, fieldnames = rows_and_fields
    return write_to_csv(rows, *_split_path(path), fieldnames)

