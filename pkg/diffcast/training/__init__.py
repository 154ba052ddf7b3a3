from diffcast.training.checkpoint import (
    Checkpoint,
    ModelDims,
    checkpoint_from_model,
    load_checkpoint,
    load_into,
    save_checkpoint,
)
from diffcast.training.prefetch import BatchPrefetcher
from diffcast.training.trainer import FitResult, LogEntry, StepResult, fit, train_step, validate, write_log

__all__ = [
    "BatchPrefetcher",
    "Checkpoint",
    "FitResult",
    "LogEntry",
    "ModelDims",
    "StepResult",
    "checkpoint_from_model",
    "fit",
    "load_checkpoint",
    "load_into",
    "save_checkpoint",
    "train_step",
    "validate",
    "write_log",
]
