"""Self-describing checkpoint containers (torch.save of plain dicts)."""
import json
import logging
from pathlib import Path
from typing import Union

import torch

from ..data.models import NormalizationStats
from ..errors import CheckpointError, TopologyMismatchError
from ..topology import RoadTopology
from .models import BackboneConfig, TrainingLog
from .network import BackboneModel
from .training import TrainResult, state_hash

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
BACKBONE_FORMAT = "telto.backbone"

PathLike = Union[str, Path]


def read_container(path: PathLike, expected_format: str) -> dict:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError as e:
        raise CheckpointError(f"checkpoint not found: {path}") from e
    except Exception as e:
        raise CheckpointError(f"{path}: unreadable checkpoint ({e})") from e
    if not isinstance(payload, dict) or "version" not in payload:
        raise CheckpointError(f"{path}: missing version field")
    if payload["version"] != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {payload['version']}")
    if payload.get("format") != expected_format:
        raise CheckpointError(f"{path}: expected a {expected_format} checkpoint, got {payload.get('format')}")
    return payload


def check_topology(payload: dict, topology: RoadTopology, source: str) -> None:
    if payload["topology_hash"] != topology.fingerprint():
        raise TopologyMismatchError(
            f"{source} was trained on topology {payload['topology_hash'][:12]}, "
            f"got {topology.fingerprint()[:12]}"
        )


def cast_to_default(model: torch.nn.Module, source: str) -> torch.nn.Module:
    """Move a loaded model to the active precision; checkpoints keep the dtype they were saved in."""
    dtype = torch.get_default_dtype()
    saved = next(iter(model.buffers())).dtype
    if saved != dtype:
        logger.warning("%s was saved in %s; casting to %s", source, saved, dtype)
        model.to(dtype)
    return model


def backbone_payload(result: TrainResult, topology: RoadTopology) -> dict:
    model: BackboneModel = result.model
    return {
        "format": BACKBONE_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": json.dumps(model.config.to_dict()),
        "name": model.name,
        "trained_on": model.trained_on,
        "in_channels": model.in_channels,
        "t_in": model.t_in,
        "horizon": model.horizon,
        "with_head": model.with_head,
        "topology_hash": topology.fingerprint(),
        "state_hash": state_hash(model),
        "state_dict": model.state_dict(),
        "log": json.dumps(result.log.to_dict()),
        "normalizer": json.dumps(result.normalizer.to_dict()),
    }


def backbone_from_payload(payload: dict, topology: RoadTopology, source: str = "checkpoint") -> TrainResult:
    check_topology(payload, topology, source)
    adjacency = topology.segment_adjacency if payload["trained_on"] == "gct" else topology.route_adjacency
    model = BackboneModel(
        BackboneConfig.from_dict(json.loads(payload["config"])),
        adjacency,
        in_channels=payload["in_channels"],
        t_in=payload["t_in"],
        horizon=payload["horizon"],
        with_head=payload["with_head"],
        name=payload["name"],
        trained_on=payload["trained_on"],
    )
    state = payload["state_dict"]
    model.to(state["start_conv.weight"].dtype)
    # output scale buffers may be per-node
    model.set_output_scale(state["output_mean"].double().numpy(), state["output_std"].double().numpy())
    model.load_state_dict(state)
    if state_hash(model) != payload["state_hash"]:
        raise CheckpointError(f"{source}: parameter hash does not match the stored hash")
    return TrainResult(
        model,
        TrainingLog.from_dict(json.loads(payload["log"])),
        NormalizationStats.from_dict(json.loads(payload["normalizer"])),
    )


def save_backbone(result: TrainResult, topology: RoadTopology, path: PathLike) -> None:
    torch.save(backbone_payload(result, topology), path)
    logger.info("saved %s checkpoint to %s", result.model.name, path)


def load_backbone(path: PathLike, topology: RoadTopology) -> TrainResult:
    result = backbone_from_payload(read_container(path, BACKBONE_FORMAT), topology, str(path))
    cast_to_default(result.model, str(path))
    return result
