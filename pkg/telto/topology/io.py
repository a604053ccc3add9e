import json
from pathlib import Path
from typing import Union

from ..errors import TopologyError
from .builder import build_topology
from .models import RoadTopology, Route, Segment


def topology_from_dict(payload: dict) -> RoadTopology:
    try:
        segments = [
            Segment(
                id=int(item["id"]),
                label=str(item["label"]),
                latitude=float(item["lat"]),
                longitude=float(item["lon"]),
            )
            for item in payload["segments"]
        ]
        routes = [
            Route(id=int(item["id"]), start_segment=int(item["start"]), end_segment=int(item["end"]))
            for item in payload["routes"]
        ]
    except KeyError as exc:
        raise TopologyError(f"topology is missing required key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise TopologyError(f"malformed topology entry: {exc}") from exc
    options = payload.get("options", {}) or {}
    return build_topology(segments, routes, exclude_reverse=bool(options.get("exclude_reverse", True)))


def load_topology(path: Union[str, Path]) -> RoadTopology:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise TopologyError(f"topology file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise TopologyError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise TopologyError(f"{path}: expected a JSON object")
    return topology_from_dict(payload)


def save_topology(topology: RoadTopology, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(topology.to_dict(), indent=2), encoding="utf-8")
