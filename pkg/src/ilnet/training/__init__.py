"""Loss, optimizers, learning-rate schedule and the training loop."""

from .loop import (
    CHECKPOINT_NAME,
    CSV_HEADER,
    LOG_NAME,
    EpochRecord,
    TrainConfig,
    TrainingError,
    TrainResult,
    epoch_order,
    stack_batch,
    train,
    training_state,
)
from .loss import LossBreakdown, bce_loss, total_loss
from .optim import SGD, Adam, Optimizer, lr_schedule, make_optimizer
from .predict import predict

__all__ = [
    "CHECKPOINT_NAME", "CSV_HEADER", "LOG_NAME", "EpochRecord", "TrainConfig", "TrainingError",
    "TrainResult", "epoch_order", "stack_batch", "train", "training_state", "LossBreakdown",
    "bce_loss", "total_loss", "SGD", "Adam", "Optimizer", "lr_schedule", "make_optimizer", "predict",
]
