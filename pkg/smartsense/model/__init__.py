"""SmartSense model.

Submodules:
- encoder: self-attention block, query-attention, QueriedTransformerEncoder
- smartsense: SmartSenseModel, InstanceBatch, collate
- checkpoint: binary save/load with config and vocabulary
- analysis: attention exports and embedding similarity statistics
"""

from smartsense.model.analysis import (
    RoutineSimilarity,
    SequenceAttention,
    embedding_similarity,
    export_action_attention,
    hour_similarity_by_gap,
    offdiag_std,
    routine_similarity_gap,
    sequence_attention,
)
from smartsense.model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from smartsense.model.encoder import (
    QueriedTransformerEncoder,
    TransformerLayer,
    query_attention,
    self_attention_block,
)
from smartsense.model.smartsense import InstanceBatch, SmartSenseModel, collate

__all__ = [
    # Encoder
    "QueriedTransformerEncoder",
    "TransformerLayer",
    "query_attention",
    "self_attention_block",
    # Model
    "InstanceBatch",
    "SmartSenseModel",
    "collate",
    # Checkpoints
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    # Analysis
    "RoutineSimilarity",
    "SequenceAttention",
    "embedding_similarity",
    "export_action_attention",
    "hour_similarity_by_gap",
    "offdiag_std",
    "routine_similarity_gap",
    "sequence_attention",
]
