"""Minimal convolutional deep-learning engine and prediction-model builders."""

from .builder import (
    ARCHS,
    VARIANTS,
    Model,
    ModelSpec,
    build_model,
    parameter_count,
    predict,
    rollout,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .tensorops import mae_loss
from .training import (
    AdamState,
    TrainConfig,
    TrainingReport,
    evaluate_block_l1,
    samples_to_arrays,
    train,
)

__all__ = [
    "ARCHS", "VARIANTS", "Model", "ModelSpec", "build_model", "parameter_count",
    "predict", "rollout", "load_checkpoint", "save_checkpoint", "mae_loss",
    "AdamState", "TrainConfig", "TrainingReport", "evaluate_block_l1",
    "samples_to_arrays", "train",
]
