"""End-to-end learning checks on synthetic data with a known ceiling.

These train real models for minutes; run them with ``pytest -m slow``.
"""

import json
import logging
import time
from pathlib import Path

import pytest

from smartsense import prepare_dataset
from smartsense.config import ModelConfig, TrainSettings, apply_ablation, load_run_config
from smartsense.evaluation import evaluate_model, model_scorer, pop_baseline
from smartsense.model.analysis import (
    embedding_similarity,
    offdiag_std,
    routine_similarity_gap,
)
from smartsense.synth import SynthSpec, write_synthetic
from smartsense.training import train

pytestmark = pytest.mark.slow

logger = logging.getLogger(__name__)

CONFIGS = Path(__file__).parent.parent / "configs"
ACCEPTANCE_SPEC = CONFIGS / "synth_acceptance.json"
ACCEPTANCE_TRAINING = CONFIGS / "train_acceptance.yaml"
TIME_BUDGET_SECONDS = 300.0


def _prepare(spec: SynthSpec, root: Path):
    synthetic = write_synthetic(spec, root / "synthetic")
    dataset = prepare_dataset(
        root / "synthetic" / "log.csv",
        root / "synthetic" / "routines.csv",
        root / "synthetic" / "manifest.json",
        root / "prepared",
    )
    return synthetic, dataset


def _config(dataset, **overrides) -> ModelConfig:
    return ModelConfig(
        n_devices=dataset.vocabulary.n_devices,
        n_controls=dataset.vocabulary.n_controls,
        window_length=dataset.manifest.window_length,
        **overrides,
    )


def _train(dataset, config, tmp_path, max_epochs=100):
    settings = TrainSettings(max_epochs=max_epochs, patience=5, seed=0, checkpoint_dir=str(tmp_path))
    return train(
        dataset.train,
        dataset.val,
        dataset.routines,
        config,
        settings,
        write_outputs=False,
    )


def _acceptance_run(dataset, tmp_path, ablation=None):
    """Train with configs/train_acceptance.yaml; returns (report, wall seconds)."""
    config, settings = load_run_config(
        ACCEPTANCE_TRAINING,
        n_devices=dataset.vocabulary.n_devices,
        n_controls=dataset.vocabulary.n_controls,
        overrides={
            "window_length": dataset.manifest.window_length,
            "checkpoint_dir": str(tmp_path),
        },
        load_from_env=False,
    )
    started = time.perf_counter()
    report = train(
        dataset.train,
        dataset.val,
        dataset.routines,
        apply_ablation(config, ablation),
        settings,
        write_outputs=False,
    )
    seconds = time.perf_counter() - started
    logger.info(
        "Acceptance run (%s): %d epochs, best val mAP@1 %.4f, %.1fs",
        ablation or "full",
        len(report.epochs),
        report.best_val_map1,
        seconds,
    )
    return report, seconds


@pytest.fixture(scope="module")
def acceptance_data(tmp_path_factory):
    spec = SynthSpec.from_dict(json.loads(ACCEPTANCE_SPEC.read_text(encoding="utf-8")))
    return _prepare(spec, tmp_path_factory.mktemp("acceptance"))


@pytest.fixture(scope="module")
def default_run(acceptance_data, tmp_path_factory):
    _, dataset = acceptance_data
    return _acceptance_run(dataset, tmp_path_factory.mktemp("full"))


def test_deterministic_pattern_is_learned(tmp_path):
    """A noise-free covering rule set is learnable to near-perfect val mAP@1."""
    spec = SynthSpec(
        n_devices=6,
        n_controls_per_device=2,
        n_sessions=300,
        session_len=12,
        window_length=4,
        covering_rules=True,
        rule_fire_p=1.0,
        seed=5,
    )
    synthetic, dataset = _prepare(spec, tmp_path)
    assert synthetic.bayes_optimal["map1"] == pytest.approx(1.0)

    config = _config(dataset, d=16, layers=1, dropout_p=0.0, lr=0.01, batch_size=64)
    report = _train(dataset, config, tmp_path / "run", max_epochs=30)

    assert report.best_val_map1 >= 0.95


def test_training_fits_time_budget(default_run):
    report, seconds = default_run
    assert report.epochs
    assert seconds < TIME_BUDGET_SECONDS, f"training took {seconds:.1f}s"


def test_model_approaches_oracle(acceptance_data, default_run):
    synthetic, dataset = acceptance_data
    report, _ = default_run
    ceiling = synthetic.bayes_optimal["map1"]

    model = evaluate_model(model_scorer(report.model), dataset.test)
    pop = evaluate_model(
        pop_baseline(dataset.train, dataset.vocabulary.n_controls), dataset.test, "pop"
    )
    logger.info(
        "test mAP@1 %.4f, ceiling %.4f, pop %.4f", model.map[1], ceiling, pop.map[1]
    )

    assert model.map[1] >= 0.9 * ceiling
    assert model.map[1] >= pop.map[1] + 0.15


def test_routine_regularization_groups_devices(acceptance_data, default_run, tmp_path):
    """Routine devices end up closer together when the regularizer is on."""
    _, dataset = acceptance_data
    with_reg, _ = default_run
    without, _ = _acceptance_run(dataset, tmp_path, ablation="reg")

    S_on = embedding_similarity(with_reg.model.device_embedding.weight)
    S_off = embedding_similarity(without.model.device_embedding.weight)
    gap_on = routine_similarity_gap(S_on, dataset.routines).gap
    gap_off = routine_similarity_gap(S_off, dataset.routines).gap

    assert gap_on - gap_off >= 0.1
    assert offdiag_std(S_on) > offdiag_std(S_off)
