"""Operator-learning models (DeepONet, 1-d FNO) and supervised training."""

from .layers import MLP, Linear, Module
from .models import (DeepONet, FNO1d, OperatorModel, ResolutionError, Standardizer, build_model,
                     clone_model, default_model)
from .training import (BatchLoop, TrainConfig, TrainingDiverged, TrainResult, concat_data,
                       evaluate, finetune, make_optimizer, per_sample_rmse, rmse, rmse_loss,
                       train_supervised)

__all__ = [
    "BatchLoop", "DeepONet", "FNO1d", "Linear", "MLP", "Module", "OperatorModel",
    "ResolutionError", "Standardizer", "TrainConfig", "TrainResult", "TrainingDiverged",
    "build_model", "clone_model", "concat_data", "default_model", "evaluate", "finetune", "make_optimizer",
    "per_sample_rmse", "rmse", "rmse_loss", "train_supervised",
]
