import logging
from typing import Optional

import torch

from ..backbone.models import TrainConfig
from ..backbone.training import TrainResult, fit
from ..data.models import Splits
from ..data.windows import fit_normalizer
from ..topology import RoadTopology
from .models import AblationFlags, FrameworkConfig
from .network import FrameworkModel

logger = logging.getLogger(__name__)


def build_framework(
    stage1: Optional[TrainResult],
    splits: Splits,
    topology: RoadTopology,
    config: Optional[FrameworkConfig] = None,
) -> FrameworkModel:
    config = config or FrameworkConfig()
    model = FrameworkModel(
        None if stage1 is None else stage1.model,
        topology,
        config,
        t_in=splits.train.t_in,
        horizon=splits.train.t_out,
    )
    targets = fit_normalizer(splits.train.targets)
    model.set_output_scale(targets.mean, targets.std)
    return model


def train_framework(
    stage1: Optional[TrainResult],
    splits: Splits,
    topology: RoadTopology,
    config: Optional[FrameworkConfig] = None,
    train_config: Optional[TrainConfig] = None,
    ablation: Optional[AblationFlags] = None,
) -> TrainResult:
    """Train transform/MGAT/Stage-2/head on MAE with Stage 1 frozen.

    Inputs are normalised with Stage 1's normaliser so the frozen features
    see the distribution they were trained on.
    """
    config = config or FrameworkConfig()
    if ablation is not None:
        config = config.with_ablation(ablation)
    train_config = train_config or TrainConfig()
    if stage1 is not None and not config.ablation.no_stage1_features:
        normalizer = stage1.normalizer
    else:
        normalizer = fit_normalizer(splits.train.inputs)

    torch.manual_seed(train_config.seed)
    model = build_framework(stage1, splits, topology, config)
    logger.info("[framework] setting %s", config.ablation.label)
    log = fit(
        model,
        (normalizer.apply(splits.train.inputs), splits.train.targets),
        (normalizer.apply(splits.valid.inputs), splits.valid.targets),
        train_config,
        stage="framework",
    )
    return TrainResult(model, log, normalizer)
