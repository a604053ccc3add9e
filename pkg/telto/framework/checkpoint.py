import json
import logging
from pathlib import Path
from typing import Optional, Union

import torch

from ..backbone.checkpoint import (
    CHECKPOINT_VERSION,
    backbone_from_payload,
    backbone_payload,
    cast_to_default,
    check_topology,
    read_container,
)
from ..backbone.models import TrainingLog
from ..backbone.training import TrainResult, state_hash
from ..data.models import NormalizationStats
from ..errors import CheckpointError
from ..topology import RoadTopology
from .models import FrameworkConfig
from .network import FrameworkModel

logger = logging.getLogger(__name__)

FRAMEWORK_FORMAT = "telto.framework"

PathLike = Union[str, Path]


def save_framework(
    result: TrainResult,
    topology: RoadTopology,
    path: PathLike,
    stage1: Optional[TrainResult] = None,
) -> None:
    """Stage-2 parameters plus the Stage-1 container they were trained against."""
    model: FrameworkModel = result.model
    if model.stage1 is not None and stage1 is None:
        raise CheckpointError("saving a framework with Stage-1 features needs the Stage-1 result")
    own_state = {k: v for k, v in model.state_dict().items() if not k.startswith("stage1.")}
    payload = {
        "format": FRAMEWORK_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": json.dumps(model.config.to_dict()),
        "t_in": model.t_in,
        "horizon": model.horizon,
        "topology_hash": topology.fingerprint(),
        "stage1": None if model.stage1 is None else backbone_payload(stage1, topology),
        "stage1_hash": None if model.stage1 is None else state_hash(model.stage1),
        "state_dict": own_state,
        "log": json.dumps(result.log.to_dict()),
        "normalizer": json.dumps(result.normalizer.to_dict()),
    }
    torch.save(payload, path)
    logger.info("saved framework checkpoint to %s", path)


def load_framework(path: PathLike, topology: RoadTopology) -> tuple[TrainResult, Optional[TrainResult]]:
    """(framework result, Stage-1 result); refuses a topology with another hash."""
    payload = read_container(path, FRAMEWORK_FORMAT)
    check_topology(payload, topology, str(path))
    stage1 = None
    if payload["stage1"] is not None:
        stage1 = backbone_from_payload(payload["stage1"], topology, f"{path} (stage1)")
        if state_hash(stage1.model) != payload["stage1_hash"]:
            raise CheckpointError(f"{path}: Stage-1 parameters do not match the recorded hash")
        cast_to_default(stage1.model, f"{path} (stage1)")

    model = FrameworkModel(
        None if stage1 is None else stage1.model,
        topology,
        FrameworkConfig.from_dict(json.loads(payload["config"])),
        t_in=payload["t_in"],
        horizon=payload["horizon"],
    )
    state = payload["state_dict"]
    model.to(state["output_mean"].dtype)
    missing, unexpected = model.load_state_dict(state, strict=False)
    if unexpected or any(not k.startswith("stage1.") for k in missing):
        raise CheckpointError(f"{path}: state does not fit the configured model ({missing[:3]}, {unexpected[:3]})")
    cast_to_default(model, str(path))
    result = TrainResult(
        model,
        TrainingLog.from_dict(json.loads(payload["log"])),
        NormalizationStats.from_dict(json.loads(payload["normalizer"])),
    )
    return result, stage1
