"""SQLite store for prepared datasets.

A prepared dataset directory holds one dataset.db with the vocabulary, the
windowed instances of every split, the mapped routines and a key/value
metadata table (manifest, split seed, statistics).
"""

import json
import logging
import sqlite3
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from smartsense.common import DataError
from smartsense.constants import DATASET_DB_NAME, SPLIT_NAMES
from smartsense.data.types import ActionEvent, DatasetManifest, Instance, Routine
from smartsense.data.vocab import Vocabulary

logger = logging.getLogger(__name__)

DEVICE_COLUMNS = {"device_id": "INTEGER PRIMARY KEY", "name": "TEXT NOT NULL"}
CONTROL_COLUMNS = {
    "control_id": "INTEGER PRIMARY KEY",
    "device_id": "INTEGER NOT NULL",
    "name": "TEXT NOT NULL",
    "train_count": "INTEGER NOT NULL",
}
INSTANCE_COLUMNS = {
    "split": "TEXT NOT NULL",
    "ordinal": "INTEGER NOT NULL",
    "history": "JSON NOT NULL",
    "target_dow": "INTEGER NOT NULL",
    "target_hour_bin": "INTEGER NOT NULL",
    "target_control_id": "INTEGER NOT NULL",
    "PRIMARY KEY": "(split, ordinal)",
}
ROUTINE_COLUMNS = {
    "ordinal": "INTEGER PRIMARY KEY",
    "routine_id": "TEXT NOT NULL",
    "devices": "JSON NOT NULL",
}


@dataclass
class PreparedDataset:
    """Everything training and evaluation need from one ingested dataset."""

    vocabulary: Vocabulary
    manifest: DatasetManifest
    train: list[Instance]
    val: list[Instance]
    test: list[Instance]
    routines: list[Routine]
    metadata: dict[str, str] = field(default_factory=dict)

    def split(self, name: str) -> list[Instance]:
        if name not in SPLIT_NAMES:
            raise DataError(f"Unknown split '{name}'")
        return getattr(self, name)


@contextmanager
def database_connection(db_path):
    """Context manager for database connections.

    Usage:
        with database_connection(db_path) as conn:
            setup_table(conn, "table_name", columns)
            conn.commit()
    """
    conn = connect_database(db_path)
    try:
        yield conn
    finally:
        conn.close()


def connect_database(db_path):
    """Connect to SQLite database, creating directory if needed."""
    Path(db_path).parent.mkdir(parents=True, exist_ok=True)
    conn = sqlite3.connect(db_path)
    # Single writer, written once per prepare run
    conn.execute("PRAGMA synchronous = NORMAL")
    conn.execute("PRAGMA temp_store = MEMORY")
    return conn


def setup_table(conn, table_name, columns):
    """Create or recreate a table with specified columns"""
    cursor = conn.cursor()
    cursor.execute(f"DROP TABLE IF EXISTS {table_name}")
    columns_sql = ", ".join(
        [f"{col_name} {col_type}" for col_name, col_type in columns.items()]
    )
    cursor.execute(f"CREATE TABLE {table_name} ({columns_sql})")
    return cursor


def setup_tables(conn, tables: list[tuple[str, dict]]):
    """Set up multiple tables and commit."""
    for table_name, columns in tables:
        setup_table(conn, table_name, columns)
    conn.commit()


def upsert_dataset_metadata(conn, data: dict[str, Any]) -> None:
    """Upsert key/value pairs into dataset_metadata, creating it if needed."""
    conn.execute(
        """
        CREATE TABLE IF NOT EXISTS dataset_metadata (
            key TEXT PRIMARY KEY,
            value TEXT
        )
        """
    )
    rows = [(str(key), "" if value is None else str(value)) for key, value in data.items()]
    if rows:
        conn.executemany(
            "INSERT OR REPLACE INTO dataset_metadata (key, value) VALUES (?, ?)",
            rows,
        )
    conn.commit()


def _encode_history(history: tuple[ActionEvent, ...]) -> str:
    return json.dumps([list(event.as_row()) for event in history])


def _decode_history(raw: str) -> tuple[ActionEvent, ...]:
    return tuple(ActionEvent(*row) for row in json.loads(raw))


def write_dataset(db_path: str | Path, dataset: PreparedDataset) -> Path:
    """Write a prepared dataset to SQLite, replacing any previous tables."""
    db_path = Path(db_path)
    vocab = dataset.vocabulary
    for split in SPLIT_NAMES:
        vocab.check_instances(dataset.split(split))
    with database_connection(db_path) as conn:
        setup_tables(
            conn,
            [
                ("devices", DEVICE_COLUMNS),
                ("controls", CONTROL_COLUMNS),
                ("instances", INSTANCE_COLUMNS),
                ("routines", ROUTINE_COLUMNS),
            ],
        )
        conn.executemany(
            "INSERT INTO devices (device_id, name) VALUES (?, ?)",
            list(enumerate(vocab.device_names)),
        )
        conn.executemany(
            "INSERT INTO controls (control_id, device_id, name, train_count) VALUES (?, ?, ?, ?)",
            [
                (i, vocab.device_of(i), vocab.control_key(i)[1], vocab.counts[i])
                for i in range(vocab.n_controls)
            ],
        )
        for split in SPLIT_NAMES:
            conn.executemany(
                """
                INSERT INTO instances
                (split, ordinal, history, target_dow, target_hour_bin, target_control_id)
                VALUES (?, ?, ?, ?, ?, ?)
                """,
                [
                    (
                        split,
                        ordinal,
                        _encode_history(instance.history),
                        instance.target_dow,
                        instance.target_hour_bin,
                        instance.target_control_id,
                    )
                    for ordinal, instance in enumerate(dataset.split(split))
                ],
            )
        conn.executemany(
            "INSERT INTO routines (ordinal, routine_id, devices) VALUES (?, ?, ?)",
            [
                (ordinal, routine.routine_id, json.dumps(list(routine.devices)))
                for ordinal, routine in enumerate(dataset.routines)
            ],
        )
        conn.commit()
        upsert_dataset_metadata(
            conn,
            {
                **dataset.metadata,
                "tz_offset_minutes": dataset.manifest.tz_offset_minutes,
                "window_length": dataset.manifest.window_length,
            },
        )
    logger.debug("Wrote prepared dataset to %s", db_path)
    return db_path


def resolve_dataset_path(data: str | Path) -> Path:
    """Accept either a prepared-dataset directory or the dataset.db itself."""
    path = Path(data)
    if path.is_dir():
        path = path / DATASET_DB_NAME
    if not path.exists():
        raise DataError(f"Prepared dataset not found: {path}")
    return path


def load_dataset(data: str | Path) -> PreparedDataset:
    """Load a prepared dataset written by write_dataset."""
    db_path = resolve_dataset_path(data)
    try:
        with database_connection(db_path) as conn:
            metadata = dict(conn.execute("SELECT key, value FROM dataset_metadata"))
            devices = [
                name
                for _, name in conn.execute(
                    "SELECT device_id, name FROM devices ORDER BY device_id"
                )
            ]
            controls = conn.execute(
                "SELECT device_id, name, train_count FROM controls ORDER BY control_id"
            ).fetchall()
            splits: dict[str, list[Instance]] = {name: [] for name in SPLIT_NAMES}
            for split, history, dow, hour_bin, target in conn.execute(
                """
                SELECT split, history, target_dow, target_hour_bin, target_control_id
                FROM instances ORDER BY split, ordinal
                """
            ):
                splits[split].append(
                    Instance(_decode_history(history), dow, hour_bin, target)
                )
            routines = [
                Routine(routine_id, tuple(json.loads(raw)))
                for routine_id, raw in conn.execute(
                    "SELECT routine_id, devices FROM routines ORDER BY ordinal"
                )
            ]
    except sqlite3.Error as e:
        raise DataError(f"Cannot read prepared dataset {db_path}: {e}") from e

    vocab = Vocabulary.from_dict(
        {
            "devices": devices,
            "controls": [[devices[device_id], name] for device_id, name, _ in controls],
            "counts": [count for _, _, count in controls],
        }
    )
    try:
        manifest = DatasetManifest(
            tz_offset_minutes=int(metadata.get("tz_offset_minutes", 0)),
            window_length=int(metadata["window_length"]),
        )
    except KeyError as e:
        raise DataError(f"Prepared dataset {db_path} has no {e} metadata") from e
    except ValueError as e:
        raise DataError(f"Prepared dataset {db_path} has invalid metadata: {e}") from e
    for split in SPLIT_NAMES:
        vocab.check_instances(splits[split])
    logger.debug(
        "Loaded %s: %d/%d/%d instances, %d routines",
        db_path,
        len(splits["train"]),
        len(splits["val"]),
        len(splits["test"]),
        len(routines),
    )
    return PreparedDataset(
        vocabulary=vocab,
        manifest=manifest,
        train=splits["train"],
        val=splits["val"],
        test=splits["test"],
        routines=routines,
        metadata=metadata,
    )
