"""
Transflex - Training Module
===========================
Training loop, dev evaluation and checkpoint files.
"""

from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint, MAGIC, FORMAT_VERSION
from .trainer import (
    TrainConfig,
    DevMetrics,
    EpochRecord,
    Trainer,
    train,
    evaluate_dev,
    score_model,
    make_model_config,
    SELECTION_FINAL,
    SELECTION_BEST_DEV,
    SELECTED_CHECKPOINT,
    LAST_CHECKPOINT,
    TRAIN_LOG,
)

__all__ = [
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "MAGIC",
    "FORMAT_VERSION",
    "TrainConfig",
    "DevMetrics",
    "EpochRecord",
    "Trainer",
    "train",
    "evaluate_dev",
    "score_model",
    "make_model_config",
    "SELECTION_FINAL",
    "SELECTION_BEST_DEV",
    "SELECTED_CHECKPOINT",
    "LAST_CHECKPOINT",
    "TRAIN_LOG",
]
