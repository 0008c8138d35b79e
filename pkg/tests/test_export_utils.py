"""Tests for smartsense.export utils and writers."""

import csv
import json

import numpy as np

from smartsense.evaluation import EvalReport
from smartsense.export import (
    attention_rows,
    format_csv,
    hour_gap_rows,
    sequence_alpha_rows,
    similarity_rows,
    top_k_rows,
    write_dataset_stats,
    write_eval_report,
    write_json,
    write_metrics_log,
    write_rows_csv,
    write_to_csv,
)
from smartsense.export.utils import clean_field
from smartsense.training.trainer import EpochRecord


def _read_csv(path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.reader(f))


def test_clean_field():
    assert clean_field(0.1234567891) == 0.123457
    assert clean_field(np.float64(2.5)) == 2.5
    assert type(clean_field(np.int64(3))) is int
    assert clean_field("kitchen") == "kitchen"


def test_write_to_csv_excludes_fields(tmp_path):
    rows = [{"model": "pop", "map1": 0.5, "debug": "x"}]

    path = write_to_csv(
        rows, tmp_path / "nested", "out.csv", ("model", "map1", "debug"), {"debug"}
    )

    assert path == tmp_path / "nested" / "out.csv"
    assert _read_csv(path) == [["model", "map1"], ["pop", "0.5"]]


def test_format_csv_ignores_extra_keys():
    text = format_csv([{"a": 1, "b": 1 / 3, "c": "skip"}], ("a", "b"))
    assert text == "a,b\n1,0.333333\n"


def test_write_json(tmp_path):
    path = write_json({"epochs": [1, 2]}, tmp_path, "summary.json")
    assert json.loads(path.read_text(encoding="utf-8")) == {"epochs": [1, 2]}
    assert path.read_text(encoding="utf-8").endswith("\n")


def test_write_eval_report(tmp_path):
    report = EvalReport.from_ranks("smartsense", [1, 2])

    json_path, csv_path = write_eval_report(report, tmp_path)

    assert json_path.name == "smartsense_report.json"
    assert json.loads(json_path.read_text(encoding="utf-8"))["n_instances"] == 2
    rows = _read_csv(csv_path)
    assert rows[0] == ["model", "map1", "map3", "map5", "hr1", "hr3", "hr5"]
    assert rows[1] == ["smartsense", "0.5", "0.75", "0.75", "0.5", "1.0", "1.0"]


def test_write_metrics_log(tmp_path):
    records = [EpochRecord(1, 2.0, 0.25, 0.5), EpochRecord(2, 1.5, 0.5, 0.4)]
    rows = _read_csv(write_metrics_log(records, tmp_path))
    assert rows[0] == ["epoch", "train_loss", "val_map1", "seconds"]
    assert [row[0] for row in rows[1:]] == ["1", "2"]


def test_write_dataset_stats(tmp_path):
    path = write_dataset_stats({"sessions": 3, "instances": 12}, tmp_path)
    assert path.name == "dataset_stats.csv"
    assert _read_csv(path) == [
        ["statistic", "value"],
        ["sessions", "3"],
        ["instances", "12"],
    ]


class TestRowBuilders:
    """Row builders shared by stdout and file output."""

    def test_attention_rows(self):
        matrix = np.arange(16, dtype=float).reshape(4, 4)
        rows, fields = attention_rows(matrix)
        assert fields == ("slot", "device", "control", "dow", "hour")
        assert [row["slot"] for row in rows] == ["device", "control", "dow", "hour"]
        assert rows[1]["hour"] == 7.0

    def test_similarity_rows(self):
        S = np.array([[1.0, 0.2], [0.2, 1.0]])
        rows, fields = similarity_rows(S, ["tv", "lamp"])
        assert fields == ("name", "tv", "lamp")
        assert rows[0] == {"name": "tv", "tv": 1.0, "lamp": 0.2}

    def test_hour_gap_rows(self):
        rows, fields = hour_gap_rows([(1, 0.9), (2, 0.4)])
        assert fields == ("gap_bins", "mean_cosine")
        assert rows[1] == {"gap_bins": 2, "mean_cosine": 0.4}

    def test_sequence_alpha_and_top_k(self):
        rows, _ = sequence_alpha_rows(np.array([0.7, 0.3]), ["tv:on", "lamp:off"])
        assert rows[1] == {"position": 1, "control": "lamp:off", "alpha": 0.3}

        rows, fields = top_k_rows([("tv:on", 0.6), ("lamp:off", 0.1)])
        assert fields == ("rank", "control", "probability")
        assert [row["rank"] for row in rows] == [1, 2]

    def test_write_rows_csv(self, tmp_path):
        path = write_rows_csv(top_k_rows([("tv:on", 0.6)]), tmp_path / "out" / "top.csv")
        assert _read_csv(path) == [["rank", "control", "probability"], ["1", "tv:on", "0.6"]]
