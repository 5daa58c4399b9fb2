"""The training loop with per-epoch checkpoints and a CSV loss log."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..tensor import NonFiniteError, Tensor, backward, load_checkpoint, save_checkpoint
from .loss import total_loss
from .optim import make_optimizer, lr_schedule

log = logging.getLogger(__name__)

LOSS_COLUMNS = [f"side{i}" for i in range(6)] + ["final"]
CSV_HEADER = ["epoch", "lr"] + LOSS_COLUMNS + ["total"]
CHECKPOINT_NAME = "checkpoint.ilnet"
LOG_NAME = "loss.csv"


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 4
    lr: float = 1e-3
    weight_decay: float = 1e-4
    optimizer: str = "adam"
    decay_factor: float = 0.5
    decay_interval: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.decay_interval < 1:
            raise ValueError("decay_interval must be >= 1")

    def lr_at(self, epoch: int) -> float:
        return lr_schedule(epoch, self.lr, self.decay_factor, self.decay_interval)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    components: List[float]
    total: float

    def row(self) -> List[str]:
        return [str(self.epoch), f"{self.lr:.6f}"] + [f"{v:.6f}" for v in self.components] + [f"{self.total:.6f}"]


@dataclass
class TrainResult:
    history: List[EpochRecord] = field(default_factory=list)
    checkpoint: Optional[Path] = None
    loss_log: Optional[Path] = None


def stack_batch(samples: Sequence) -> tuple:
    images = np.stack([s.image for s in samples]).astype(np.float32)
    masks = np.stack([s.mask for s in samples])[:, None].astype(np.float32)
    return Tensor(images), Tensor(masks)


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Shuffle order for one epoch; depends only on (seed, epoch) so resumed runs match."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def training_state(model, optimizer, epochs_done: int) -> Dict[str, np.ndarray]:
    state = dict(model.state_dict())
    state.update(optimizer.state_dict())
    state["train.epochs_done"] = np.array([epochs_done], dtype=np.float32)
    return state


def train(
    model,
    samples: Sequence,
    config: TrainConfig,
    out_dir=None,
    resume_from=None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainResult:
    """Train ``model`` in place on in-memory ``samples``.

    With ``out_dir`` set, the checkpoint and ``loss.csv`` are rewritten after
    every epoch.  ``resume_from`` takes a checkpoint written by a previous run
    and continues after its last completed epoch.
    """
    if not samples:
        raise TrainingError("training set is empty")
    optimizer = make_optimizer(config.optimizer, model.named_parameters(), config.lr, config.weight_decay)
    result = TrainResult()
    start = 0
    if resume_from is not None:
        state = load_checkpoint(resume_from)
        model.load_state_dict(state)
        optimizer.load_state_dict(state)
        start = int(state["train.epochs_done"][0])
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        result.checkpoint = out_dir / CHECKPOINT_NAME
        result.loss_log = out_dir / LOG_NAME
        if start == 0 or not result.loss_log.exists():
            with open(result.loss_log, "w", newline="") as fh:
                csv.writer(fh).writerow(CSV_HEADER)

    n = len(samples)
    for epoch in range(start, config.epochs):
        lr = config.lr_at(epoch)
        optimizer.lr = lr
        model.train()
        sums = np.zeros(len(LOSS_COLUMNS) + 1)
        order = epoch_order(config.seed, epoch, n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            x, gt = stack_batch([samples[i] for i in idx])
            try:
                logits, side = model(x)
                losses = total_loss(side.sup_maps, logits, gt)
            except NonFiniteError as exc:
                raise TrainingError(f"epoch {epoch}: non-finite activations ({exc})") from exc
            if not np.isfinite(losses.total.item()):
                raise TrainingError(f"epoch {epoch}: loss became {losses.total.item()}")
            optimizer.zero_grad()
            backward(losses.total)
            optimizer.step()
            sums += len(idx) * np.array(losses.values() + [losses.total.item()])
        means = sums / n
        rec = EpochRecord(epoch, lr, [float(v) for v in means[:-1]], float(means[-1]))
        result.history.append(rec)
        log.info("epoch %d lr %.2e loss %.5f", epoch, lr, rec.total)
        if out_dir is not None:
            save_checkpoint(result.checkpoint, training_state(model, optimizer, epoch + 1))
            with open(result.loss_log, "a", newline="") as fh:
                csv.writer(fh).writerow(rec.row())
        if on_epoch is not None:
            on_epoch(rec)
    return result
