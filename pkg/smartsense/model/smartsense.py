"""SmartSense: context-aware action encoder, context-attentive sequence encoder
and the device-control prediction head.

Batched entry points take an InstanceBatch of index tensors; encode_action,
encode_sequence and predict_controls are per-instance conveniences over them.
Train/eval mode is the module's own `training` flag, and dropout draws from
an optional torch.Generator so masks are reproducible.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import torch
from torch import nn

from smartsense.common import DataError
from smartsense.config import ModelConfig
from smartsense.constants import INIT_RANGE
from smartsense.data.types import ActionEvent, Instance
from smartsense.model.encoder import QueriedTransformerEncoder
from smartsense.numeric import DTYPE, softmax_rows

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InstanceBatch:
    """Index tensors for a batch of instances.

    Attributes:
        history: (B, W-1, 4) long, slots in ACTION_SLOTS order.
        target_context: (B, 2) long, (dow, hour bin) of the predicted event.
        labels: (B,) long target control ids.
    """

    history: torch.Tensor
    target_context: torch.Tensor
    labels: torch.Tensor

    def __len__(self) -> int:
        return self.labels.shape[0]

    def select(self, index) -> "InstanceBatch":
        return InstanceBatch(
            self.history[index], self.target_context[index], self.labels[index]
        )


def _bounds(config: ModelConfig) -> torch.Tensor:
    return torch.tensor(
        [config.n_devices, config.n_controls, config.n_dow, config.n_hour_bins]
    )


def _check_devices(
    history: torch.Tensor, control_device: Sequence[int], n_controls: int
) -> None:
    table = torch.as_tensor(control_device, dtype=torch.long)
    if table.shape != (n_controls,):
        raise DataError(
            f"Control-device table has {table.numel()} entries, expected {n_controls}"
        )
    mismatch = table[history[..., 1]] != history[..., 0]
    if mismatch.any():
        instance, position = (int(i) for i in mismatch.nonzero()[0])
        raise DataError(
            f"Instance {instance}, history event {position}: device "
            f"{int(history[instance, position, 0])} does not own control "
            f"{int(history[instance, position, 1])}"
        )


def collate(
    instances: Sequence[Instance],
    config: ModelConfig,
    control_device: Sequence[int] | None = None,
) -> InstanceBatch:
    """Stack instances into index tensors, checking lengths and bounds.

    With a control_device table (control id -> owning device id) every history
    event must also name the device that owns its control.

    Raises:
        DataError: On a history of the wrong length, an index out of range or
            an event whose device does not own its control.
    """
    expected = config.history_length
    for position, instance in enumerate(instances):
        if len(instance.history) != expected:
            raise DataError(
                f"Instance {position} has {len(instance.history)} history events, "
                f"expected {expected}"
            )
    if not instances:
        return InstanceBatch(
            torch.zeros((0, expected, 4), dtype=torch.long),
            torch.zeros((0, 2), dtype=torch.long),
            torch.zeros((0,), dtype=torch.long),
        )
    history = torch.tensor(
        [[event.as_row() for event in instance.history] for instance in instances],
        dtype=torch.long,
    )
    target_context = torch.tensor(
        [[i.target_dow, i.target_hour_bin] for i in instances], dtype=torch.long
    )
    labels = torch.tensor([i.target_control_id for i in instances], dtype=torch.long)

    bounds = _bounds(config)
    if ((history < 0) | (history >= bounds)).any():
        raise DataError("History index outside the model vocabulary")
    if ((target_context < 0) | (target_context >= bounds[2:])).any():
        raise DataError("Target context outside the temporal vocabulary")
    if ((labels < 0) | (labels >= config.n_controls)).any():
        raise DataError("Target control outside the model vocabulary")
    if control_device is not None:
        _check_devices(history, control_device, config.n_controls)
    return InstanceBatch(history, target_context, labels)


class SmartSenseModel(nn.Module):
    """Two-level queried transformer encoders over device-control histories.

    Parameters:
        device_embedding, control_embedding, dow_embedding, hour_embedding:
            embedding tables e(1), e(2), z(1), z(2).
        context_query: trainable global query q_c of the action encoder.
        positional: (W-1, d) positional embeddings added before the sequence encoder.
        action_encoder: QTE with a d-dimensional query.
        sequence_encoder: QTE with a 2d-dimensional query (target dow ++ hour).
        output_embedding: (N_ctrl, d) prediction matrix, absent when tied to
            control_embedding.
    """

    def __init__(self, config: ModelConfig, seed: int | None = 0):
        super().__init__()
        self.config = config
        d = config.d
        self.device_embedding = nn.Embedding(config.n_devices, d)
        self.control_embedding = nn.Embedding(config.n_controls, d)
        self.dow_embedding = nn.Embedding(config.n_dow, d)
        self.hour_embedding = nn.Embedding(config.n_hour_bins, d)
        self.context_query = nn.Parameter(torch.empty(d))
        self.positional = nn.Parameter(torch.empty(config.history_length, d))
        self.action_encoder = QueriedTransformerEncoder(d, config.heads, config.layers, d)
        self.sequence_encoder = QueriedTransformerEncoder(
            d, config.heads, config.layers, 2 * d
        )
        if config.tie_output:
            self.register_parameter("output_embedding", None)
        else:
            self.output_embedding = nn.Parameter(torch.empty(config.n_controls, d))
        self.to(DTYPE)
        self.reset_parameters(seed)

    @torch.no_grad()
    def reset_parameters(self, seed: int | None = 0) -> None:
        """Uniform(-0.05, 0.05) weights, zero biases, unit layer-norm gains."""
        generator = torch.Generator()
        if seed is None:
            generator.seed()
        else:
            generator.manual_seed(seed)
        for name, param in self.named_parameters():
            if ".norm" in name and name.endswith("weight"):
                param.fill_(1.0)
            elif name.endswith("bias"):
                param.zero_()
            else:
                param.uniform_(-INIT_RANGE, INIT_RANGE, generator=generator)

    @torch.no_grad()
    def zero_parameters(self) -> None:
        for param in self.parameters():
            param.zero_()

    @property
    def output_matrix(self) -> torch.Tensor:
        if self.output_embedding is None:
            return self.control_embedding.weight
        return self.output_embedding

    def _encoder_options(self, generator: torch.Generator | None) -> dict:
        return {
            "dropout_p": self.config.dropout_p,
            "use_layer_norm": self.config.layer_norm,
            "generator": generator,
        }

    # Action level

    def action_matrix(self, events: torch.Tensor) -> torch.Tensor:
        """Stack the four slot embeddings: (..., 4) indices -> (..., 4, d)."""
        return torch.stack(
            [
                self.device_embedding(events[..., 0]),
                self.control_embedding(events[..., 1]),
                self.dow_embedding(events[..., 2]),
                self.hour_embedding(events[..., 3]),
            ],
            dim=-2,
        )

    def summarize_actions(
        self, X: torch.Tensor, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        """Collapse stacked (..., 4, d) action matrices into (..., d) action vectors."""
        if self.config.act_off:
            return X.mean(dim=-2)
        return self.action_encoder(
            X, self.context_query, **self._encoder_options(generator)
        )

    def encode_actions(
        self, events: torch.Tensor, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        return self.summarize_actions(self.action_matrix(events), generator)

    # Sequence level

    def sequence_query(self, target_context: torch.Tensor) -> torch.Tensor:
        """(..., 2) target (dow, hour bin) -> (..., 2d) query; zeros under seq_off."""
        query = torch.cat(
            [
                self.dow_embedding(target_context[..., 0]),
                self.hour_embedding(target_context[..., 1]),
            ],
            dim=-1,
        )
        if self.config.seq_off:
            return torch.zeros_like(query)
        return query

    def sequence_summary(
        self,
        action_vecs: torch.Tensor,
        target_context: torch.Tensor,
        generator: torch.Generator | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Sequence vector and its query-attention weights alpha over positions."""
        if action_vecs.shape[-2] != self.config.history_length:
            raise DataError(
                f"Expected {self.config.history_length} action vectors, "
                f"got {action_vecs.shape[-2]}"
            )
        H, _ = self.sequence_encoder.hidden(
            action_vecs + self.positional, **self._encoder_options(generator)
        )
        return self.sequence_encoder.summarize(H, self.sequence_query(target_context))

    def encode_sequences(
        self,
        action_vecs: torch.Tensor,
        target_context: torch.Tensor,
        generator: torch.Generator | None = None,
    ) -> torch.Tensor:
        summary, _ = self.sequence_summary(action_vecs, target_context, generator)
        return summary

    # Prediction

    def forward(
        self,
        history: torch.Tensor,
        target_context: torch.Tensor,
        generator: torch.Generator | None = None,
    ) -> torch.Tensor:
        """Control logits (B, N_ctrl) for a batch of histories."""
        action_vecs = self.encode_actions(history, generator)
        sequence = self.encode_sequences(action_vecs, target_context, generator)
        return sequence @ self.output_matrix.transpose(0, 1)

    def logits(
        self, batch: InstanceBatch, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        return self(batch.history, batch.target_context, generator)

    def predict_proba(
        self, batch: InstanceBatch, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        return softmax_rows(self.logits(batch, generator))

    # Per-instance operations

    def event_tensor(self, event: ActionEvent) -> torch.Tensor:
        row = torch.tensor(event.as_row(), dtype=torch.long)
        bounds = _bounds(self.config)
        if ((row < 0) | (row >= bounds)).any():
            raise DataError(f"Event {event} is outside the model vocabulary")
        return row

    def encode_action(
        self, event: ActionEvent, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        """d-vector of one event (action encoder over its four slot embeddings)."""
        return self.encode_actions(self.event_tensor(event), generator)

    def encode_sequence(
        self,
        action_vecs: torch.Tensor,
        target_dow: int,
        target_hour_bin: int,
        generator: torch.Generator | None = None,
    ) -> torch.Tensor:
        """d-vector of a (W-1, d) matrix of action vectors under a target context."""
        context = torch.tensor([target_dow, target_hour_bin], dtype=torch.long)
        if not (
            0 <= target_dow < self.config.n_dow
            and 0 <= target_hour_bin < self.config.n_hour_bins
        ):
            raise DataError(f"Target context {(target_dow, target_hour_bin)} out of range")
        return self.encode_sequences(action_vecs, context, generator)

    def predict_controls(
        self, instance: Instance, generator: torch.Generator | None = None
    ) -> torch.Tensor:
        """Probability vector over all N_ctrl device controls for one instance."""
        batch = collate([instance], self.config)
        return self.predict_proba(batch, generator)[0]
