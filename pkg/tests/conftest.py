import numpy as np
import pytest
import torch

from telto.config import set_precision
from telto.data import SyntheticConfig, generate_synthetic, make_windows
from telto.topology import Segment, build_topology, generate_topology, make_routes


def lattice_segments(n: int) -> list[Segment]:
    return [Segment(id=i, label=str(i), latitude=24.78 + 0.001 * (i // 6), longitude=120.99 + 0.001 * (i % 6)) for i in range(n)]


@pytest.fixture
def fig6_topology():
    """Segment 5 fed by 8 and 30, route 5->4 with its reverse, and one more hop behind 8 and 30."""
    pairs = [(8, 5), (30, 5), (5, 4), (4, 5), (7, 8), (29, 30)]
    return build_topology(lattice_segments(31), make_routes(pairs))


@pytest.fixture
def chain_topology():
    """0 -> 1 -> 2 -> 3 plus 1 -> 0."""
    return build_topology(lattice_segments(4), make_routes([(0, 1), (1, 2), (2, 3), (1, 0)]))


@pytest.fixture
def micro_topology():
    return generate_topology(num_segments=6, num_routes=10, seed=0)


@pytest.fixture
def micro_config():
    return SyntheticConfig(days=2, noise=0.2)


@pytest.fixture
def micro_dataset(micro_topology, micro_config):
    return generate_synthetic(micro_topology, micro_config, seed=3)


@pytest.fixture
def micro_splits(micro_dataset):
    return make_windows(micro_dataset.gct, micro_dataset.mob, t_in=8, t_out=4)


@pytest.fixture
def float64():
    set_precision("float64")
    yield torch.float64
    set_precision("float32")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
