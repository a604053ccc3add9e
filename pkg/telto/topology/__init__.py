from .builder import build_topology, generate_topology, make_routes
from .io import load_topology, save_topology, topology_from_dict
from .models import RoadTopology, Route, Segment

__all__ = [
    "RoadTopology",
    "Route",
    "Segment",
    "build_topology",
    "generate_topology",
    "load_topology",
    "make_routes",
    "save_topology",
    "topology_from_dict",
]
