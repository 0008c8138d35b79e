"""Joint objective: next-control cross-entropy plus routine regularization.

The routine term is skip-gram with negative sampling over consecutive device
pairs of each routine, pulling devices used for one intention together in
the device-embedding space.
"""

import logging
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
import torch
import torch.nn.functional as F

from smartsense.common import NegativeSamplingError
from smartsense.data.types import Routine
from smartsense.model.smartsense import InstanceBatch, SmartSenseModel

logger = logging.getLogger(__name__)


class LossTerms(NamedTuple):
    total: torch.Tensor
    cross_entropy: torch.Tensor
    regularization: torch.Tensor


def sample_negatives(
    routine: Routine, n_devices: int, m: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw m distinct devices uniformly from those outside the routine.

    Raises:
        NegativeSamplingError: If fewer than m devices lie outside the routine.
    """
    if m == 0:
        return np.empty(0, dtype=np.int64)
    candidates = np.setdiff1d(np.arange(n_devices), np.asarray(routine.devices))
    if len(candidates) < m:
        raise NegativeSamplingError(
            f"Routine '{routine.routine_id}' leaves {len(candidates)} candidate "
            f"negatives but negatives={m}; reduce negatives to at most {len(candidates)}"
        )
    return rng.choice(candidates, size=m, replace=False)


def routine_reg_loss(
    routines: Sequence[Routine],
    device_table: torch.Tensor,
    m: int,
    rng: np.random.Generator,
) -> torch.Tensor:
    """Mean over consecutive routine pairs of the negative-sampling loss.

    Each pair (a, b) contributes -log s(e_a.e_b) - sum_k log s(-e_a.e_k) with
    fresh negatives k drawn for the anchor a.
    """
    anchors, positives, negatives = [], [], []
    n_devices = device_table.shape[0]
    for routine in routines:
        for a, b in zip(routine.devices[:-1], routine.devices[1:], strict=True):
            anchors.append(a)
            positives.append(b)
            negatives.append(sample_negatives(routine, n_devices, m, rng))
    if not anchors:
        return device_table.new_zeros(())

    anchor = device_table[torch.as_tensor(anchors)]
    positive = device_table[torch.as_tensor(positives)]
    negative = device_table[torch.as_tensor(np.stack(negatives).astype(np.int64))]

    pair_term = -F.logsigmoid((anchor * positive).sum(dim=-1))
    negative_scores = torch.einsum("pd,pkd->pk", anchor, negative)
    negative_term = -F.logsigmoid(-negative_scores).sum(dim=-1)
    return (pair_term + negative_term).mean()


def total_loss(
    model: SmartSenseModel,
    batch: InstanceBatch,
    routines: Sequence[Routine] = (),
    rng: np.random.Generator | None = None,
    generator: torch.Generator | None = None,
) -> LossTerms:
    """Batch-mean cross-entropy plus lambda_reg times the routine loss.

    The routine term is skipped, and rng left untouched, under reg_off, with
    lambda_reg = 0 or with no routines.
    """
    config = model.config
    logits = model.logits(batch, generator)
    cross_entropy = F.cross_entropy(logits, batch.labels)

    if config.reg_off or config.lambda_reg == 0 or not routines:
        regularization = cross_entropy.new_zeros(())
    else:
        if rng is None:
            raise ValueError("rng is required for the routine term")
        regularization = routine_reg_loss(
            routines, model.device_embedding.weight, config.negatives, rng
        )
    total = cross_entropy + config.lambda_reg * regularization
    return LossTerms(total, cross_entropy, regularization)
