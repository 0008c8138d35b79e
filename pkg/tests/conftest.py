"""Shared fixtures for tests."""

import json

import numpy as np
import pytest

from smartsense.config import ModelConfig
from smartsense.data.types import ActionEvent, Instance, Routine
from smartsense.data.vocab import Vocabulary


@pytest.fixture
def tiny_config():
    """Small model: d=8, 2 heads, 1 layer, W=4, 6 devices, 8 controls."""
    return ModelConfig(
        n_devices=6,
        n_controls=8,
        d=8,
        layers=1,
        heads=2,
        window_length=4,
        negatives=2,
        lambda_reg=1.0,
        batch_size=16,
    )


def owner_of(control_id: int, config: ModelConfig) -> int:
    """Device owning a control; controls are spread over devices in index order."""
    return control_id * config.n_devices // config.n_controls


@pytest.fixture
def make_instances():
    """Factory for seeded random instances that fit a ModelConfig."""

    def event(config: ModelConfig, rng: np.random.Generator) -> ActionEvent:
        control_id = int(rng.integers(config.n_controls))
        return ActionEvent(
            owner_of(control_id, config),
            control_id,
            int(rng.integers(config.n_dow)),
            int(rng.integers(config.n_hour_bins)),
        )

    def make(config: ModelConfig, n: int, seed: int = 0) -> list[Instance]:
        rng = np.random.default_rng(seed)
        instances = []
        for _ in range(n):
            history = tuple(event(config, rng) for _ in range(config.history_length))
            instances.append(
                Instance(
                    history,
                    int(rng.integers(config.n_dow)),
                    int(rng.integers(config.n_hour_bins)),
                    int(rng.integers(config.n_controls)),
                )
            )
        return instances

    return make


@pytest.fixture
def tiny_routines():
    return [Routine("morning", (0, 1, 2)), Routine("night", (3, 4))]


@pytest.fixture
def small_vocab():
    """6 devices with 8 controls, sorted the way parse_log_csv indexes them.

    Control ownership matches owner_of under tiny_config.
    """
    vocab = Vocabulary()
    vocab.extend(
        [
            ("device_00", "control_0"),
            ("device_00", "control_1"),
            ("device_01", "control_0"),
            ("device_02", "control_0"),
            ("device_03", "control_0"),
            ("device_03", "control_1"),
            ("device_04", "control_0"),
            ("device_05", "control_0"),
        ]
    )
    return vocab.freeze()


@pytest.fixture
def write_csv(tmp_path):
    """Write text to a file under tmp_path and return its path."""

    def write(name: str, text: str):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write


@pytest.fixture
def write_history(tmp_path):
    """Write a history JSON of {device, control, dow, hour_bin} objects."""

    def write(events, name: str = "history.json"):
        path = tmp_path / name
        path.write_text(json.dumps(events), encoding="utf-8")
        return path

    return write
