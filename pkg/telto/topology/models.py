import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import TopologyError


@dataclass(frozen=True)
class Segment:
    id: int
    label: str
    latitude: float
    longitude: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise TopologyError(f"segment {self.id}: latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise TopologyError(f"segment {self.id}: longitude {self.longitude} outside [-180, 180]")


@dataclass(frozen=True)
class Route:
    id: int
    start_segment: int
    end_segment: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.start_segment, self.end_segment)


@dataclass(frozen=True, eq=False)
class RoadTopology:
    """Segments, directed routes and the three graphs derived from them.

    segment_adjacency is the undirected segment graph with self-loops,
    route_adjacency the directed line graph of routes with self-loops, and
    upstream_map[r] the sorted ids of routes ending where route r starts.
    """

    segments: tuple[Segment, ...]
    routes: tuple[Route, ...]
    segment_adjacency: np.ndarray
    route_adjacency: np.ndarray
    upstream_map: tuple[tuple[int, ...], ...]
    exclude_reverse: bool = True
    _route_index: dict = field(default_factory=dict, repr=False)

    @property
    def num_segments(self) -> int:
        return len(self.segments)

    @property
    def num_routes(self) -> int:
        return len(self.routes)

    @property
    def route_starts(self) -> np.ndarray:
        return np.array([r.start_segment for r in self.routes], dtype=np.int64)

    @property
    def route_ends(self) -> np.ndarray:
        return np.array([r.end_segment for r in self.routes], dtype=np.int64)

    def route_id(self, start: int, end: int) -> Optional[int]:
        return self._route_index.get((start, end))

    def reverse_of(self, route_id: int) -> Optional[int]:
        route = self.routes[route_id]
        return self.route_id(route.end_segment, route.start_segment)

    def route_label(self, route_id: int) -> str:
        route = self.routes[route_id]
        return f"{route.start_segment}_{route.end_segment}"

    def segment_labels(self) -> list[str]:
        return [s.label for s in self.segments]

    def route_labels(self) -> list[str]:
        return [self.route_label(r.id) for r in self.routes]

    def parse_route(self, text: str) -> int:
        """Accept either a route id ("17") or a "start_end" label ("5_4")."""
        text = text.strip()
        if "_" in text:
            start, end = (int(part) for part in text.split("_", 1))
            route_id = self.route_id(start, end)
            if route_id is None:
                raise TopologyError(f"no route {start}->{end} in topology")
            return route_id
        route_id = int(text)
        if not 0 <= route_id < self.num_routes:
            raise TopologyError(f"route id {route_id} outside [0, {self.num_routes})")
        return route_id

    def upstream_routes(self, route_id: int, hops: int = 1) -> tuple[int, ...]:
        """Routes first reached at exactly `hops` steps upstream of `route_id`."""
        if hops < 1:
            raise TopologyError("hops must be >= 1")
        seen = {route_id}
        frontier = {route_id}
        for _ in range(hops):
            nxt = set()
            for r in frontier:
                nxt.update(self.upstream_map[r])
            frontier = nxt - seen
            seen |= frontier
        return tuple(sorted(frontier))

    def centroid(self) -> tuple[float, float]:
        lat = float(np.mean([s.latitude for s in self.segments])) if self.segments else 0.0
        lon = float(np.mean([s.longitude for s in self.segments])) if self.segments else 0.0
        return lat, lon

    def to_dict(self) -> dict:
        return {
            "segments": [
                {"id": s.id, "label": s.label, "lat": s.latitude, "lon": s.longitude}
                for s in self.segments
            ],
            "routes": [
                {"id": r.id, "start": r.start_segment, "end": r.end_segment}
                for r in self.routes
            ],
            "options": {"exclude_reverse": self.exclude_reverse},
        }

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RoadTopology):
            return NotImplemented
        return (
            self.segments == other.segments
            and self.routes == other.routes
            and self.exclude_reverse == other.exclude_reverse
            and self.upstream_map == other.upstream_map
            and np.array_equal(self.segment_adjacency, other.segment_adjacency)
            and np.array_equal(self.route_adjacency, other.route_adjacency)
        )

    def __hash__(self) -> int:
        return hash(self.fingerprint())
