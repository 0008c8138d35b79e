"""SmartSense training: joint objective and the epoch loop."""

from smartsense.training.objective import (
    LossTerms,
    routine_reg_loss,
    sample_negatives,
    total_loss,
)
from smartsense.training.trainer import (
    EpochRecord,
    SeedStreams,
    TrainReport,
    train,
    validation_map1,
)

__all__ = [
    "EpochRecord",
    "LossTerms",
    "SeedStreams",
    "TrainReport",
    "routine_reg_loss",
    "sample_negatives",
    "total_loss",
    "train",
    "validation_map1",
]
