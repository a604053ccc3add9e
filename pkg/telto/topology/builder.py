import logging
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from ..errors import DuplicateRouteError, TopologyError
from .models import RoadTopology, Route, Segment

logger = logging.getLogger(__name__)

# Jittered-lattice layout around a city centre, in degrees.
DEFAULT_CENTER = (24.7890, 120.9960)
DEFAULT_SPACING_DEG = 0.003


def _check_dense_ids(items: Sequence, kind: str) -> None:
    ids = [item.id for item in items]
    if sorted(ids) != list(range(len(ids))):
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise DuplicateRouteError(f"duplicate {kind} id {dup}")
        raise TopologyError(f"{kind} ids must be dense in [0, {len(ids)}), got {sorted(ids)}")


def build_route_graph(segments: Sequence[Segment], routes: Sequence[Route]) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from((s.id, {"label": s.label}) for s in segments)
    graph.add_edges_from((r.start_segment, r.end_segment, {"route": r.id}) for r in routes)
    return graph


def build_topology(
    segments: Iterable[Segment],
    routes: Iterable[Route],
    exclude_reverse: bool = True,
) -> RoadTopology:
    segments = tuple(sorted(segments, key=lambda s: s.id))
    routes = tuple(sorted(routes, key=lambda r: r.id))
    _check_dense_ids(segments, "segment")
    _check_dense_ids(routes, "route")

    num_segments = len(segments)
    route_index: dict[tuple[int, int], int] = {}
    for route in routes:
        for endpoint in (route.start_segment, route.end_segment):
            if not 0 <= endpoint < num_segments:
                raise TopologyError(
                    f"route {route.id} ({route.start_segment}->{route.end_segment}) "
                    f"references unknown segment {endpoint}"
                )
        if route.start_segment == route.end_segment:
            raise TopologyError(f"route {route.id} starts and ends on segment {route.start_segment}")
        if route.key in route_index:
            raise DuplicateRouteError(
                f"route {route.id} duplicates route {route_index[route.key]} "
                f"({route.start_segment}->{route.end_segment})"
            )
        route_index[route.key] = route.id

    graph = build_route_graph(segments, routes)

    segment_adjacency = np.eye(num_segments, dtype=np.int8)
    for route in routes:
        segment_adjacency[route.start_segment, route.end_segment] = 1
        segment_adjacency[route.end_segment, route.start_segment] = 1

    starts = np.array([r.start_segment for r in routes], dtype=np.int64)
    ends = np.array([r.end_segment for r in routes], dtype=np.int64)
    route_adjacency = (ends[:, None] == starts[None, :]).astype(np.int8)
    np.fill_diagonal(route_adjacency, 1)

    upstream = []
    for route in routes:
        neighbours = []
        for k in graph.predecessors(route.start_segment):
            if exclude_reverse and k == route.end_segment:
                continue
            neighbours.append(graph.edges[k, route.start_segment]["route"])
        upstream.append(tuple(sorted(neighbours)))

    segment_adjacency.setflags(write=False)
    route_adjacency.setflags(write=False)
    return RoadTopology(
        segments=segments,
        routes=routes,
        segment_adjacency=segment_adjacency,
        route_adjacency=route_adjacency,
        upstream_map=tuple(upstream),
        exclude_reverse=exclude_reverse,
        _route_index=route_index,
    )


def make_routes(pairs: Iterable[tuple[int, int]]) -> list[Route]:
    return [Route(id=i, start_segment=s, end_segment=e) for i, (s, e) in enumerate(pairs)]


def generate_topology(
    num_segments: int = 34,
    num_routes: int = 84,
    seed: int = 0,
    exclude_reverse: bool = True,
    center: tuple[float, float] = DEFAULT_CENTER,
) -> RoadTopology:
    """Lay segments on a jittered lattice and connect nearby pairs in both directions.

    A minimum spanning tree over segment distances keeps the network
    connected; the remaining routes go to the shortest non-tree pairs.
    """
    if num_segments < 2:
        raise TopologyError("need at least two segments")
    if num_routes > num_segments * (num_segments - 1):
        raise TopologyError(f"{num_routes} routes exceed the {num_segments * (num_segments - 1)} ordered pairs")

    rng = np.random.default_rng(seed)
    side = int(np.ceil(np.sqrt(num_segments)))
    cells = np.array([(i // side, i % side) for i in range(num_segments)], dtype=float)
    cells -= cells.mean(axis=0)
    coords = cells + rng.uniform(-0.25, 0.25, size=cells.shape)
    lat0, lon0 = center
    segments = [
        Segment(
            id=i,
            label=str(i),
            latitude=round(lat0 + DEFAULT_SPACING_DEG * coords[i, 0], 6),
            longitude=round(lon0 + DEFAULT_SPACING_DEG * coords[i, 1], 6),
        )
        for i in range(num_segments)
    ]

    dist = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=-1)
    complete = nx.Graph()
    for i in range(num_segments):
        for j in range(i + 1, num_segments):
            complete.add_edge(i, j, weight=float(dist[i, j]))
    tree = nx.minimum_spanning_tree(complete)
    pairs = sorted(tuple(sorted(edge)) for edge in tree.edges())
    extra = sorted(
        (d["weight"], i, j) for i, j, d in complete.edges(data=True)
        if not tree.has_edge(i, j)
    )

    directed: list[tuple[int, int]] = []
    for i, j in pairs:
        directed.extend([(i, j), (j, i)])
    for _, i, j in extra:
        if len(directed) >= num_routes:
            break
        directed.extend([(i, j), (j, i)])
    directed = sorted(directed[:num_routes])

    logger.debug("generated topology with %d segments and %d routes", num_segments, len(directed))
    return build_topology(segments, make_routes(directed), exclude_reverse=exclude_reverse)
