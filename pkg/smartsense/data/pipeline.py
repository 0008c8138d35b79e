"""Log and routine ingestion, temporal binning, windowing and splitting."""

import csv
import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import NamedTuple

import numpy as np

from smartsense.common import DataError, raise_for_parse_error
from smartsense.constants import HOURS_PER_BIN, SPLIT_TENTHS
from smartsense.data.types import (
    ActionEvent,
    DatasetManifest,
    Instance,
    Routine,
    Session,
)
from smartsense.data.vocab import Vocabulary

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86_400

LOG_COLUMNS = ("session_id", "timestamp", "device", "control")
ROUTINE_COLUMNS = ("routine_id", "devices")
ROUTINE_SEPARATOR = "|"


class ParsedLog(NamedTuple):
    sessions: list[Session]
    vocabulary: Vocabulary
    skipped_rows: int


class _LogRow(NamedTuple):
    line: int
    session_id: str
    timestamp: int
    device: str
    control: str


def bin_timestamp(timestamp: int, tz_offset_minutes: int = 0) -> tuple[int, int]:
    """Map epoch seconds to (day of week, 3-hour bin) in local time.

    Monday is day 0; bin b covers local hours [3b, 3b + 3). Pure integer
    arithmetic, so every integer timestamp (negative or millisecond-scale
    included) maps to a valid bin.
    """
    local = timestamp + 60 * tz_offset_minutes
    # 1970-01-01 was a Thursday
    dow = (local // SECONDS_PER_DAY + 3) % 7
    hour_bin = (local % SECONDS_PER_DAY) // (HOURS_PER_BIN * 3600)
    return dow, hour_bin


def _read_rows(path: Path, columns: tuple[str, ...]) -> Iterable[tuple[int, list[str]]]:
    """Yield (line number, fields) for every non-blank data row.

    The header must match columns exactly (surrounding whitespace ignored).
    """
    with open(path, encoding="utf-8-sig", newline="") as f:
        reader = csv.reader(f)
        header = None
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if header is None:
                header = tuple(cell.strip() for cell in row)
                if header != columns:
                    raise_for_parse_error(
                        path,
                        reader.line_num,
                        f"expected header {','.join(columns)}, got {','.join(header)}",
                    )
                continue
            if len(row) != len(columns):
                raise_for_parse_error(
                    path,
                    reader.line_num,
                    f"expected {len(columns)} fields, got {len(row)}",
                )
            yield reader.line_num, [cell.strip() for cell in row]


def _parse_log_row(path: Path, line: int, fields: list[str]) -> _LogRow:
    session_id, raw_timestamp, device, control = fields
    if not session_id or not device or not control:
        raise_for_parse_error(path, line, "session_id, device and control are required")
    try:
        timestamp = int(raw_timestamp)
    except ValueError:
        raise_for_parse_error(path, line, f"timestamp is not an integer: {raw_timestamp!r}")
    return _LogRow(line, session_id, timestamp, device, control)


def parse_log_csv(
    path: str | Path,
    vocab: Vocabulary | None = None,
    *,
    tz_offset_minutes: int = 0,
) -> ParsedLog:
    """Parse a device-control log into sessions and a vocabulary.

    Args:
        path: CSV with header session_id,timestamp,device,control.
        vocab: Existing vocabulary. None builds a fresh one (names indexed in
            sorted order); an open vocabulary is extended; a frozen one makes
            rows with unknown names be skipped and counted.
        tz_offset_minutes: Fixed local-time offset used for temporal binning.

    Returns:
        ParsedLog(sessions, vocabulary, skipped_rows); sessions keep the order
        of first appearance and their events are sorted by timestamp.

    Raises:
        ParseError: On a malformed row, naming its line number.
    """
    path = Path(path)
    rows = [_parse_log_row(path, line, fields) for line, fields in _read_rows(path, LOG_COLUMNS)]

    if vocab is None:
        vocab = Vocabulary()
    if not vocab.frozen:
        vocab.extend((row.device, row.control) for row in rows)

    grouped: dict[str, list[tuple[int, ActionEvent]]] = {}
    skipped = 0
    for row in rows:
        control_id = vocab.control_id(row.device, row.control)
        if control_id is None:
            skipped += 1
            logger.debug(
                "%s: line %d: unknown control %s:%s skipped",
                path,
                row.line,
                row.device,
                row.control,
            )
            continue
        dow, hour_bin = bin_timestamp(row.timestamp, tz_offset_minutes)
        event = ActionEvent(vocab.device_of(control_id), control_id, dow, hour_bin)
        grouped.setdefault(row.session_id, []).append((row.timestamp, event))

    if skipped:
        logger.warning("Skipped %d log rows with names outside the vocabulary", skipped)

    sessions = [
        Session(session_id, sorted(events, key=lambda item: item[0]))
        for session_id, events in grouped.items()
    ]
    logger.debug("Parsed %d sessions from %s (%r)", len(sessions), path, vocab)
    return ParsedLog(sessions, vocab, skipped)


def make_windows(session: Session, window_length: int) -> list[Instance]:
    """Slide a stride-1 window of window_length events over a session.

    Sessions shorter than the window yield nothing; there is no padding.
    """
    if window_length < 2:
        raise DataError(f"window length must be >= 2, got {window_length}")
    events = [event for _, event in session.events]
    instances = []
    for start in range(len(events) - window_length + 1):
        window = events[start : start + window_length]
        target = window[-1]
        instances.append(
            Instance(
                history=tuple(window[:-1]),
                target_dow=target.dow,
                target_hour_bin=target.hour_bin,
                target_control_id=target.control_id,
            )
        )
    return instances


def build_instances(sessions: Iterable[Session], window_length: int) -> list[Instance]:
    instances = []
    for session in sessions:
        instances.extend(make_windows(session, window_length))
    return instances


def split_instances(
    instances: Sequence[Instance], seed: int
) -> tuple[list[Instance], list[Instance], list[Instance]]:
    """Shuffle with a seeded generator and cut 7:1:2 into train/val/test."""
    n = len(instances)
    order = np.random.default_rng(seed).permutation(n)
    train_end = SPLIT_TENTHS[0] * n // 10
    val_end = SPLIT_TENTHS[1] * n // 10
    shuffled = [instances[i] for i in order]
    return shuffled[:train_end], shuffled[train_end:val_end], shuffled[val_end:]


def parse_routines(path: str | Path, vocab: Vocabulary) -> list[Routine]:
    """Parse routines, mapping device names through a frozen vocabulary.

    Devices outside the vocabulary are dropped; routines left with fewer than
    two devices are discarded. File order is preserved.

    Raises:
        ParseError: On a malformed row, naming its line number.
    """
    path = Path(path)
    routines = []
    dropped_devices = 0
    discarded = 0
    for line, (routine_id, raw_devices) in _read_rows(path, ROUTINE_COLUMNS):
        if not routine_id:
            raise_for_parse_error(path, line, "routine_id is required")
        names = [name.strip() for name in raw_devices.split(ROUTINE_SEPARATOR)]
        names = [name for name in names if name]
        devices = []
        for name in names:
            device_id = vocab.device_id(name)
            if device_id is None:
                dropped_devices += 1
                continue
            devices.append(device_id)
        if len(devices) < 2:
            discarded += 1
            continue
        routines.append(Routine(routine_id, tuple(devices)))

    if dropped_devices or discarded:
        logger.warning(
            "Routines: dropped %d unknown device references, discarded %d short routines",
            dropped_devices,
            discarded,
        )
    return routines


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read the dataset manifest JSON ({tz_offset_minutes, window_length})."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise DataError(f"Manifest not found: {path}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"Cannot parse manifest {path}: {e}") from e
    try:
        manifest = DatasetManifest(
            tz_offset_minutes=int(data["tz_offset_minutes"]),
            window_length=int(data["window_length"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"Manifest {path} needs integer tz_offset_minutes and window_length") from e
    if manifest.window_length < 2:
        raise DataError(f"Manifest {path}: window_length must be >= 2")
    return manifest


def dataset_statistics(
    sessions: Sequence[Session],
    instances: Sequence[Instance],
    vocab: Vocabulary,
    routines: Sequence[Routine],
    skipped_rows: int = 0,
) -> dict[str, int]:
    """Summary counts of a prepared dataset (log and routine side)."""
    routine_devices = {device for routine in routines for device in routine.devices}
    return {
        "sessions": len(sessions),
        "events": sum(len(session) for session in sessions),
        "instances": len(instances),
        "devices": vocab.n_devices,
        "device_controls": vocab.n_controls,
        "routines": len(routines),
        "routine_devices": len(routine_devices),
        "skipped_rows": skipped_rows,
    }
