"""PostNet predictor and the APPNP / GPN / LOP-GPN graph models."""

from . import checkpoint
from .graph import APPNP, GPN_RW, GPN_SYM, LOP_GPN, MODEL_KINDS, forward_appnp, forward_gpn, forward_lop
from .postnet import PostNetConfig, PostNetPredictor, feature_alphas
from .train import Prediction, TrainConfig, TrainedModel, TrainingDiverged, accuracy, predict_report, train

__all__ = [
    "checkpoint",
    "APPNP",
    "GPN_RW",
    "GPN_SYM",
    "LOP_GPN",
    "MODEL_KINDS",
    "PostNetConfig",
    "PostNetPredictor",
    "Prediction",
    "TrainConfig",
    "TrainedModel",
    "TrainingDiverged",
    "accuracy",
    "feature_alphas",
    "forward_appnp",
    "forward_gpn",
    "forward_lop",
    "predict_report",
    "train",
]
