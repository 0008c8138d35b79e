"""CSV/JSON exports of reports, training logs and analyses."""

from smartsense.export.utils import (
    ensure_directory,
    format_csv,
    write_json,
    write_to_csv,
)
from smartsense.export.writers import (
    attention_rows,
    dataset_stats_rows,
    hour_gap_rows,
    sequence_alpha_rows,
    similarity_rows,
    top_k_rows,
    write_dataset_stats,
    write_eval_report,
    write_metrics_log,
    write_rows_csv,
)

__all__ = [
    # Utilities
    "ensure_directory",
    "format_csv",
    "write_json",
    "write_to_csv",
    # Row builders
    "attention_rows",
    "dataset_stats_rows",
    "hour_gap_rows",
    "sequence_alpha_rows",
    "similarity_rows",
    "top_k_rows",
    # Writers
    "write_dataset_stats",
    "write_eval_report",
    "write_metrics_log",
    "write_rows_csv",
]
