"""Utility functions for CSV and JSON exports."""

import csv
import io
import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

FLOAT_DIGITS = 6


def ensure_directory(directory) -> Path:
    """Create directory if it doesn't exist"""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def clean_field(value):
    """Round floats for stable CSV output; convert numpy scalars to Python."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        return round(value, FLOAT_DIGITS)
    return value


def write_to_csv(
    rows: Sequence[Mapping],
    out_dir,
    filename: str,
    fieldnames: Iterable[str],
    exclude_fields=None,
) -> Path:
    """Write dict rows to out_dir/filename and return the path."""
    ensure_directory(out_dir)
    filepath = Path(out_dir) / filename

    if exclude_fields is None:
        exclude_fields = set()
    csv_fieldnames = [f for f in fieldnames if f not in exclude_fields]

    with open(filepath, "w", encoding="utf-8", newline="") as csvfile:
        writer = csv.DictWriter(csvfile, fieldnames=csv_fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {k: clean_field(v) for k, v in row.items() if k not in exclude_fields}
            )
    log_export(filename, len(rows), filepath)
    return filepath


def format_csv(rows: Sequence[Mapping], fieldnames: Iterable[str]) -> str:
    """Render rows (with header) as CSV text for standard output."""
    buffer = io.StringIO()
    writer = csv.DictWriter(
        buffer, fieldnames=list(fieldnames), lineterminator="\n", extrasaction="ignore"
    )
    writer.writeheader()
    for row in rows:
        writer.writerow({k: clean_field(v) for k, v in row.items()})
    return buffer.getvalue()


def write_json(data, out_dir, filename: str) -> Path:
    ensure_directory(out_dir)
    filepath = Path(out_dir) / filename
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=False)
        f.write("\n")
    logger.debug("Wrote %s", filepath)
    return filepath


def log_export(name, count, csv_path):
    """Standardized logging for exports"""
    logger.debug("Exported %d %s rows to %s", count, name, csv_path)
