"""Ranking metrics, the popularity baseline and evaluation reports.

A scorer maps a batch of instances to an (n, N_ctrl) score array; only the
ranking of each row matters. Ties are broken by ascending control index.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import torch

from smartsense.common import DataError
from smartsense.constants import METRIC_KS, REPORT_COLUMNS
from smartsense.data.types import Instance
from smartsense.model.smartsense import SmartSenseModel, collate

logger = logging.getLogger(__name__)

Scorer = Callable[[Sequence[Instance]], np.ndarray]

DEFAULT_EVAL_BATCH = 1024


def rank_of_target(scores, target: int) -> int:
    """1-based rank of target: strictly greater scores plus lower-index ties, plus one."""
    scores = np.asarray(scores)
    value = scores[target]
    greater = int(np.sum(scores > value))
    ties_before = int(np.sum(scores[:target] == value))
    return 1 + greater + ties_before


def ranks_of_targets(scores: np.ndarray, targets) -> np.ndarray:
    """Row-wise rank_of_target for an (n, N) score array."""
    scores = np.asarray(scores)
    targets = np.asarray(targets, dtype=np.int64)
    values = scores[np.arange(len(targets)), targets][:, None]
    greater = (scores > values).sum(axis=1)
    lower_index = np.arange(scores.shape[1])[None, :] < targets[:, None]
    ties_before = ((scores == values) & lower_index).sum(axis=1)
    return 1 + greater + ties_before


def hr_at_k(rank: int, k: int) -> int:
    return int(rank <= k)


def map_at_k(rank: int, k: int) -> float:
    """Average precision at k with one relevant item: 1/rank within the cutoff."""
    return 1.0 / rank if rank <= k else 0.0


@dataclass(frozen=True)
class EvalReport:
    """mAP@k and HR@k for k in METRIC_KS over n_instances."""

    model: str
    n_instances: int
    map: dict[int, float]
    hr: dict[int, float]

    @classmethod
    def from_ranks(cls, model: str, ranks) -> "EvalReport":
        ranks = np.asarray(ranks, dtype=np.float64)
        return cls(
            model=model,
            n_instances=len(ranks),
            map={k: float(np.mean(np.where(ranks <= k, 1.0 / ranks, 0.0))) for k in METRIC_KS},
            hr={k: float(np.mean(ranks <= k)) for k in METRIC_KS},
        )

    def as_row(self) -> dict[str, object]:
        row = {"model": self.model}
        row.update({f"map{k}": self.map[k] for k in METRIC_KS})
        row.update({f"hr{k}": self.hr[k] for k in METRIC_KS})
        return {column: row[column] for column in REPORT_COLUMNS}

    def to_dict(self) -> dict[str, object]:
        return {**self.as_row(), "n_instances": self.n_instances}


def evaluate_model(
    scorer: Scorer,
    test_set: Sequence[Instance],
    model_name: str = "smartsense",
    batch_size: int = DEFAULT_EVAL_BATCH,
) -> EvalReport:
    """Score every test instance and average the ranking metrics."""
    if not test_set:
        raise DataError("Cannot evaluate on an empty test set")
    ranks = []
    for start in range(0, len(test_set), batch_size):
        chunk = test_set[start : start + batch_size]
        scores = scorer(chunk)
        ranks.append(ranks_of_targets(scores, [i.target_control_id for i in chunk]))
    report = EvalReport.from_ranks(model_name, np.concatenate(ranks))
    logger.debug("Evaluated %s on %d instances", model_name, report.n_instances)
    return report


def model_scorer(model: SmartSenseModel) -> Scorer:
    """Eval-mode control probabilities of a SmartSense model."""

    def score(instances: Sequence[Instance]) -> np.ndarray:
        model.eval()
        with torch.no_grad():
            return model.predict_proba(collate(instances, model.config)).numpy()

    return score


def pop_baseline(train_set: Sequence[Instance], n_controls: int) -> Scorer:
    """Constant scores equal to each control's training-label frequency."""
    if not train_set:
        raise DataError("POP baseline needs a non-empty training set")
    counts = np.bincount(
        [i.target_control_id for i in train_set], minlength=n_controls
    ).astype(np.float64)

    def score(instances: Sequence[Instance]) -> np.ndarray:
        return np.broadcast_to(counts, (len(instances), n_controls))

    return score
