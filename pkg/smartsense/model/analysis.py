"""Attention and embedding analyses of a trained model.

All functions run the model in eval mode without recording gradients and
return numpy arrays ready for CSV export.
"""

import logging
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
import torch

from smartsense.constants import N_HOUR_BINS
from smartsense.data.types import ActionEvent, Instance, Routine
from smartsense.model.smartsense import SmartSenseModel, collate

logger = logging.getLogger(__name__)


class SequenceAttention(NamedTuple):
    alpha: np.ndarray
    top: list[tuple[int, float]]


class RoutineSimilarity(NamedTuple):
    intra: float
    inter: float

    @property
    def gap(self) -> float:
        return self.intra - self.inter


def export_action_attention(model: SmartSenseModel, event: ActionEvent) -> np.ndarray:
    """Head-averaged 4x4 attention of the last action-encoder layer for one event."""
    model.eval()
    with torch.no_grad():
        X = model.action_matrix(model.event_tensor(event))
        _, scores = model.action_encoder.hidden(X, use_layer_norm=model.config.layer_norm)
    return scores[-1].mean(dim=0).numpy()


def sequence_attention(
    model: SmartSenseModel, instance: Instance, k: int = 5
) -> SequenceAttention:
    """Query-attention weights over history positions plus the top-k controls.

    Scoring one history under several target contexts shows how the queried
    context moves both the weights and the recommendation list.
    """
    model.eval()
    batch = collate([instance], model.config)
    with torch.no_grad():
        action_vecs = model.encode_actions(batch.history)
        summary, alpha = model.sequence_summary(action_vecs, batch.target_context)
        probs = torch.softmax(summary @ model.output_matrix.transpose(0, 1), dim=-1)[0]
    order = np.argsort(-probs.numpy(), kind="stable")[:k]
    return SequenceAttention(
        alpha=alpha[0].numpy(),
        top=[(int(i), float(probs[i])) for i in order],
    )


def embedding_similarity(table) -> np.ndarray:
    """Cosine-similarity matrix of embedding rows.

    Rows with zero norm have similarity 0 to everything; the diagonal is 1.
    """
    if isinstance(table, torch.Tensor):
        table = table.detach().cpu().numpy()
    table = np.asarray(table, dtype=np.float64)
    norms = np.linalg.norm(table, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = table / safe[:, None]
    unit[norms == 0] = 0.0
    S = np.clip(unit @ unit.T, -1.0, 1.0)
    np.fill_diagonal(S, 1.0)
    return S


def circular_gap(i: int, j: int, n: int = N_HOUR_BINS) -> int:
    diff = abs(i - j) % n
    return min(diff, n - diff)


def hour_similarity_by_gap(S: np.ndarray) -> list[tuple[int, float]]:
    """Mean hour-embedding cosine for each circular bin gap 0..n/2."""
    n = S.shape[0]
    sums: dict[int, list[float]] = {}
    for i in range(n):
        for j in range(n):
            sums.setdefault(circular_gap(i, j, n), []).append(S[i, j])
    return [(gap, float(np.mean(sums[gap]))) for gap in sorted(sums)]


def routine_similarity_gap(S: np.ndarray, routines: Sequence[Routine]) -> RoutineSimilarity:
    """Mean cosine of device pairs sharing a routine vs routine devices that never do."""
    members = sorted({device for routine in routines for device in routine.devices})
    together = {
        (min(a, b), max(a, b))
        for routine in routines
        for a in routine.devices
        for b in routine.devices
        if a != b
    }
    intra, inter = [], []
    for x, a in enumerate(members):
        for b in members[x + 1 :]:
            (intra if (a, b) in together else inter).append(S[a, b])
    return RoutineSimilarity(
        intra=float(np.mean(intra)) if intra else 0.0,
        inter=float(np.mean(inter)) if inter else 0.0,
    )


def offdiag_std(S: np.ndarray) -> float:
    """Population standard deviation of the off-diagonal similarities."""
    mask = ~np.eye(S.shape[0], dtype=bool)
    if not mask.any():
        return 0.0
    return float(S[mask].std())
