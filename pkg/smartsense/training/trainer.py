"""Epoch loop with Adam, validation mAP@1 early stopping and checkpointing."""

import copy
import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from smartsense.common import DataError
from smartsense.config import ModelConfig, TrainSettings
from smartsense.constants import CHECKPOINT_NAME, TRAIN_REPORT_NAME
from smartsense.data.types import Instance, Routine
from smartsense.data.vocab import Vocabulary
from smartsense.evaluation import ranks_of_targets
from smartsense.export.utils import write_json
from smartsense.export.writers import write_metrics_log
from smartsense.model.checkpoint import save_checkpoint
from smartsense.model.smartsense import InstanceBatch, SmartSenseModel, collate
from smartsense.numeric import AdamState, adam_step, compute_gradients
from smartsense.training.objective import total_loss

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_map1: float
    seconds: float

    def as_row(self) -> dict[str, float]:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_map1": self.val_map1,
            "seconds": self.seconds,
        }


@dataclass
class TrainReport:
    """Outcome of one training run; model holds the best-epoch parameters."""

    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_map1: float = -1.0
    checkpoint_path: Path | None = None
    stopped_early: bool = False
    model: SmartSenseModel | None = field(default=None, repr=False)

    @property
    def losses(self) -> list[float]:
        return [record.train_loss for record in self.epochs]

    def to_dict(self) -> dict:
        return {
            "best_epoch": self.best_epoch,
            "best_val_map1": self.best_val_map1,
            "checkpoint_path": str(self.checkpoint_path) if self.checkpoint_path else None,
            "stopped_early": self.stopped_early,
            "epochs": [record.as_row() for record in self.epochs],
        }


@dataclass
class SeedStreams:
    """Independent random streams derived from one training seed.

    Keeping them apart means that, with the routine term off, the shuffle and
    dropout streams see exactly the same draws whatever routines are supplied.
    """

    shuffle: np.random.Generator
    routines: np.random.Generator
    negatives: np.random.Generator
    dropout: torch.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "SeedStreams":
        shuffle, routines, negatives, dropout = np.random.SeedSequence(seed).spawn(4)
        generator = torch.Generator()
        generator.manual_seed(int(dropout.generate_state(1, dtype=np.uint64)[0]) >> 1)
        return cls(
            shuffle=np.random.default_rng(shuffle),
            routines=np.random.default_rng(routines),
            negatives=np.random.default_rng(negatives),
            dropout=generator,
        )


def validation_map1(model: SmartSenseModel, batch: InstanceBatch) -> float:
    model.eval()
    with torch.no_grad():
        scores = model.logits(batch).numpy()
    ranks = ranks_of_targets(scores, batch.labels.numpy())
    return float(np.mean(ranks == 1))


def _sample_routines(
    routines: Sequence[Routine], size: int, rng: np.random.Generator
) -> list[Routine]:
    if size >= len(routines):
        chosen = rng.permutation(len(routines))
    else:
        chosen = rng.choice(len(routines), size=size, replace=False)
    return [routines[i] for i in chosen]


def train(
    train_set: Sequence[Instance],
    val_set: Sequence[Instance],
    routines: Sequence[Routine],
    config: ModelConfig,
    settings: TrainSettings,
    *,
    vocabulary: Vocabulary | None = None,
    write_outputs: bool = True,
) -> TrainReport:
    """Train a SmartSense model and keep the epoch with the best val mAP@1.

    Args:
        train_set, val_set: Non-empty instance lists.
        routines: Routine regularization data; unused under reg_off.
        vocabulary: Stored in the checkpoint so it can serve recommendations.
        write_outputs: Write best.ckpt, metrics.csv and train_report.json to
            settings.checkpoint_dir.

    Raises:
        DataError: On empty splits.
        NonFiniteLossError: With the global step at which the loss diverged.
    """
    if not train_set or not val_set:
        raise DataError(
            f"Training needs non-empty train and val sets "
            f"(got {len(train_set)} and {len(val_set)})"
        )
    streams = SeedStreams.from_seed(settings.seed)
    model = SmartSenseModel(config, seed=settings.seed)
    params = list(model.parameters())
    adam = AdamState(params, lr=config.lr, l2=config.l2)
    control_device = vocabulary.control_devices if vocabulary is not None else None
    train_batch = collate(train_set, config, control_device)
    val_batch = collate(val_set, config, control_device)

    use_routines = bool(routines) and not config.reg_off and config.lambda_reg != 0
    routine_batch = settings.routine_batch or config.batch_size
    out_dir = Path(settings.checkpoint_dir)

    report = TrainReport()
    best_state = copy.deepcopy(model.state_dict())
    patience_left = settings.patience
    step = 0
    logger.info(
        "Training on %d instances (%d val, %d routines), %d parameters",
        len(train_set),
        len(val_set),
        len(routines) if use_routines else 0,
        sum(p.numel() for p in params),
    )

    for epoch in range(1, settings.max_epochs + 1):
        started = time.perf_counter()
        order = torch.from_numpy(streams.shuffle.permutation(len(train_set)))
        loss_sum = 0.0
        model.train()
        for start in range(0, len(order), config.batch_size):
            batch = train_batch.select(order[start : start + config.batch_size])
            sampled = (
                _sample_routines(routines, routine_batch, streams.routines)
                if use_routines
                else []
            )
            terms = total_loss(model, batch, sampled, streams.negatives, streams.dropout)
            grads = compute_gradients(terms.total, params, step)
            adam_step(params, grads, adam, config.lr, config.l2)
            loss = terms.total.item()
            loss_sum += loss * len(batch)
            if logger.isEnabledFor(logging.DEBUG):
                logger.debug(
                    "step %d: loss %.6f (ce %.6f, reg %.6f)",
                    step,
                    loss,
                    terms.cross_entropy.item(),
                    terms.regularization.item(),
                )
            step += 1

        val_map1 = validation_map1(model, val_batch)
        record = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / len(train_set),
            val_map1=val_map1,
            seconds=time.perf_counter() - started,
        )
        report.epochs.append(record)
        logger.info(
            "Epoch %d: loss %.4f, val mAP@1 %.4f (%.1fs)",
            epoch,
            record.train_loss,
            val_map1,
            record.seconds,
        )

        if val_map1 > report.best_val_map1:
            report.best_val_map1 = val_map1
            report.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            patience_left = settings.patience
            if write_outputs:
                report.checkpoint_path = save_checkpoint(
                    out_dir / CHECKPOINT_NAME,
                    model,
                    vocabulary,
                    metadata={"epoch": epoch, "val_map1": val_map1, "seed": settings.seed},
                )
        else:
            patience_left -= 1

        if write_outputs:
            write_metrics_log(report.epochs, out_dir)
        if patience_left == 0:
            report.stopped_early = epoch < settings.max_epochs
            logger.info("No val improvement for %d epochs, stopping", settings.patience)
            break

    model.load_state_dict(best_state)
    model.eval()
    report.model = model
    if write_outputs:
        write_json(report.to_dict(), out_dir, TRAIN_REPORT_NAME)
    logger.info("Best epoch %d with val mAP@1 %.4f", report.best_epoch, report.best_val_map1)
    return report
