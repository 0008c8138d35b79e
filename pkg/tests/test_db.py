"""Tests for the prepared-dataset SQLite store and prepare_dataset."""

import csv
import dataclasses
import sqlite3

import pytest

from smartsense import prepare_dataset
from smartsense.common import DataError
from smartsense.data.types import DatasetManifest, Routine
from smartsense.db import (
    PreparedDataset,
    database_connection,
    load_dataset,
    resolve_dataset_path,
    upsert_dataset_metadata,
    write_dataset,
)

MONDAY = 1637539200


def _dataset(small_vocab, tiny_config, make_instances):
    instances = make_instances(tiny_config, 20, seed=1)
    small_vocab.count_controls(instances[:14])
    return PreparedDataset(
        vocabulary=small_vocab,
        manifest=DatasetManifest(tz_offset_minutes=60, window_length=4),
        train=instances[:14],
        val=instances[14:16],
        test=instances[16:],
        routines=[Routine("r1", (0, 2, 1)), Routine("r2", (4, 5))],
        metadata={"split_seed": 3},
    )


class TestWriteLoadDataset:
    """write_dataset / load_dataset round trip."""

    def test_round_trip(self, tmp_path, small_vocab, tiny_config, make_instances):
        dataset = _dataset(small_vocab, tiny_config, make_instances)
        write_dataset(tmp_path / "dataset.db", dataset)

        loaded = load_dataset(tmp_path)

        assert loaded.train == dataset.train
        assert loaded.val == dataset.val
        assert loaded.test == dataset.test
        assert loaded.routines == dataset.routines
        assert loaded.manifest == dataset.manifest
        assert loaded.vocabulary.to_dict() == small_vocab.to_dict()
        assert loaded.vocabulary.frozen
        assert loaded.metadata["split_seed"] == "3"

    def test_split_lookup(self, small_vocab, tiny_config, make_instances):
        dataset = _dataset(small_vocab, tiny_config, make_instances)
        assert dataset.split("val") is dataset.val
        with pytest.raises(DataError, match="Unknown split"):
            dataset.split("holdout")

    def test_write_rejects_foreign_device(self, tmp_path, small_vocab, tiny_config, make_instances):
        dataset = _dataset(small_vocab, tiny_config, make_instances)
        first = dataset.val[0]
        event = first.history[0]
        wrong = dataclasses.replace(event, device_id=(event.device_id + 1) % 6)
        dataset.val[0] = dataclasses.replace(first, history=(wrong, *first.history[1:]))

        with pytest.raises(DataError, match="belongs to device"):
            write_dataset(tmp_path / "dataset.db", dataset)

    def test_load_rejects_foreign_device(self, tmp_path, small_vocab, tiny_config, make_instances):
        write_dataset(tmp_path / "dataset.db", _dataset(small_vocab, tiny_config, make_instances))
        with sqlite3.connect(tmp_path / "dataset.db") as conn:
            # control 7 belongs to device 5
            conn.execute(
                "UPDATE instances SET history = ? WHERE split = 'train' AND ordinal = 0",
                ("[[0, 7, 0, 0], [0, 0, 0, 0], [0, 1, 0, 0]]",),
            )
        with pytest.raises(DataError, match="device_05:control_0 belongs to device 5, not 0"):
            load_dataset(tmp_path)

    @pytest.mark.parametrize(
        "statement,message",
        [
            ("DELETE FROM dataset_metadata WHERE key = 'window_length'", "no 'window_length'"),
            ("UPDATE dataset_metadata SET value = 'ten' WHERE key = 'window_length'", "invalid"),
        ],
    )
    def test_bad_manifest_metadata(
        self, tmp_path, small_vocab, tiny_config, make_instances, statement, message
    ):
        write_dataset(tmp_path / "dataset.db", _dataset(small_vocab, tiny_config, make_instances))
        with sqlite3.connect(tmp_path / "dataset.db") as conn:
            conn.execute(statement)
        with pytest.raises(DataError, match=message):
            load_dataset(tmp_path)

    def test_rewrite_replaces_tables(self, tmp_path, small_vocab, tiny_config, make_instances):
        dataset = _dataset(small_vocab, tiny_config, make_instances)
        write_dataset(tmp_path / "dataset.db", dataset)
        dataset.test = dataset.test[:1]
        write_dataset(tmp_path / "dataset.db", dataset)
        assert len(load_dataset(tmp_path / "dataset.db").test) == 1


class TestDatasetPaths:
    """Tests for resolve_dataset_path and unreadable stores."""

    def test_missing(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            resolve_dataset_path(tmp_path / "nothing")

    def test_directory_resolves_to_db(self, tmp_path):
        (tmp_path / "dataset.db").touch()
        assert resolve_dataset_path(tmp_path) == tmp_path / "dataset.db"

    def test_not_a_dataset(self, tmp_path):
        with sqlite3.connect(tmp_path / "dataset.db") as conn:
            conn.execute("CREATE TABLE other (x INTEGER)")
        with pytest.raises(DataError, match="Cannot read"):
            load_dataset(tmp_path)


class TestUpsertDatasetMetadata:
    """Tests for the key/value metadata table."""

    def test_upsert_overwrites(self, tmp_path):
        with database_connection(tmp_path / "meta.db") as conn:
            upsert_dataset_metadata(conn, {"a": 1, "b": None})
            upsert_dataset_metadata(conn, {"a": 2})
            rows = dict(conn.execute("SELECT key, value FROM dataset_metadata"))
        assert rows == {"a": "2", "b": ""}


class TestPrepareDataset:
    """End-to-end ingestion into a prepared directory."""

    def test_prepare(self, tmp_path, write_csv):
        lines = ["session_id,timestamp,device,control"]
        for session in range(4):
            for step in range(6):
                device = ("lamp", "tv", "door")[step % 3]
                lines.append(f"s{session},{MONDAY + 3600 * step},{device},on")
        log = write_csv("log.csv", "\n".join(lines) + "\n")
        routines = write_csv("routines.csv", "routine_id,devices\nr1,lamp|tv\nr2,lamp|oven\n")
        manifest = write_csv("manifest.json", '{"tz_offset_minutes": 0, "window_length": 4}')

        dataset = prepare_dataset(log, routines, manifest, tmp_path / "prepared", seed=1)

        # 4 sessions x (6 - 4 + 1) windows
        assert len(dataset.train) + len(dataset.val) + len(dataset.test) == 12
        assert (len(dataset.train), len(dataset.val), len(dataset.test)) == (8, 1, 3)
        assert [r.routine_id for r in dataset.routines] == ["r1"]
        assert sum(dataset.vocabulary.counts) == len(dataset.train)

        loaded = load_dataset(tmp_path / "prepared")
        assert loaded.train == dataset.train
        assert loaded.manifest.window_length == 4

        with open(tmp_path / "prepared" / "dataset_stats.csv", encoding="utf-8") as f:
            stats = {row["statistic"]: row["value"] for row in csv.DictReader(f)}
        assert stats["instances"] == "12"
        assert stats["routines"] == "1"
        assert stats["device_controls"] == "3"

    def test_prepare_without_routines(self, tmp_path, write_csv):
        log = write_csv(
            "log.csv",
            "session_id,timestamp,device,control\ns1,0,a,on\ns1,1,b,on\ns1,2,a,off\n",
        )
        manifest = write_csv("manifest.json", '{"tz_offset_minutes": 0, "window_length": 2}')
        dataset = prepare_dataset(log, None, manifest, tmp_path / "out")
        assert dataset.routines == []
