from .checkpoint import load_backbone, save_backbone
from .models import BackboneConfig, EpochRecord, TrainConfig, TrainingLog, parameter_count
from .network import BackboneModel, forward_features, forward_predict, transition_supports
from .training import (
    TrainResult,
    fit,
    predict_array,
    pretrain_stage1,
    route_inputs,
    state_hash,
    train_route_backbone,
)

__all__ = [
    "BackboneConfig",
    "BackboneModel",
    "EpochRecord",
    "TrainConfig",
    "TrainResult",
    "TrainingLog",
    "fit",
    "forward_features",
    "forward_predict",
    "load_backbone",
    "parameter_count",
    "predict_array",
    "pretrain_stage1",
    "route_inputs",
    "save_backbone",
    "state_hash",
    "train_route_backbone",
    "transition_supports",
]
