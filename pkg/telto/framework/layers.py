import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..backbone.network import activation_fn
from ..errors import ShapeError
from ..topology import RoadTopology


def neighbor_table(topology: RoadTopology) -> tuple[np.ndarray, np.ndarray]:
    """[M, Zmax] ids of each route followed by its upstream routes, plus a validity mask."""
    m = topology.num_routes
    width = 1 + max((len(u) for u in topology.upstream_map), default=0)
    table = np.zeros((m, width), dtype=np.int64)
    mask = np.zeros((m, width), dtype=bool)
    for r, ups in enumerate(topology.upstream_map):
        row = (r, *ups)
        table[r, : len(row)] = row
        mask[r, : len(row)] = True
    return table, mask


def _route_index(h: torch.Tensor, topology: RoadTopology) -> tuple[torch.Tensor, torch.Tensor]:
    n = h.shape[-3]
    starts, ends = topology.route_starts, topology.route_ends
    if len(starts) and max(starts.max(), ends.max()) >= n:
        bad = int(np.argmax((starts >= n) | (ends >= n)))
        raise ShapeError("transform", f"route {bad} references a segment outside the {n} feature rows")
    return torch.as_tensor(starts, device=h.device), torch.as_tensor(ends, device=h.device)


def transform_raw(h: torch.Tensor, topology: RoadTopology) -> torch.Tensor:
    """h[end] - h[start] per route; h is [..., N, C, D]."""
    starts, ends = _route_index(h, topology)
    return h[..., ends, :, :] - h[..., starts, :, :]


def transform(h: torch.Tensor, topology: RoadTopology, activation: str = "relu") -> torch.Tensor:
    return activation_fn(activation)(transform_raw(h, topology))


def start_features(h: torch.Tensor, topology: RoadTopology) -> torch.Tensor:
    starts, _ = _route_index(h, topology)
    return h[..., starts, :, :]


class MultiChannelGAT(nn.Module):
    """One single-head graph attention per feature channel.

    For route r and channel c, attention runs over {r} and its upstream
    routes with scores LeakyReLU(a_c . [W_c h_r || W_c h_q]); row 0 of the
    neighbour table is always the route itself.
    """

    def __init__(
        self,
        channels: int,
        dim: int,
        topology: RoadTopology,
        leaky_slope: float = 0.2,
        activation: str = "relu",
    ) -> None:
        super().__init__()
        self.channels = channels
        self.dim = dim
        self.leaky_slope = leaky_slope
        self.act = activation_fn(activation)
        table, mask = neighbor_table(topology)
        self.register_buffer("neighbors", torch.as_tensor(table))
        self.register_buffer("mask", torch.as_tensor(mask))

        self.W = nn.Parameter(torch.empty(channels, dim, dim))
        self.a = nn.Parameter(torch.empty(channels, 2 * dim))
        bound_w = 1.414 * math.sqrt(6.0 / (2 * dim))
        bound_a = 1.414 * math.sqrt(6.0 / (2 * dim + 1))
        nn.init.uniform_(self.W, -bound_w, bound_w)
        nn.init.uniform_(self.a, -bound_a, bound_a)

    def _check(self, h: torch.Tensor) -> None:
        if h.dim() < 3 or tuple(h.shape[-3:]) != (self.neighbors.shape[0], self.channels, self.dim):
            raise ShapeError(
                "enhance",
                f"expected [..., {self.neighbors.shape[0]}, {self.channels}, {self.dim}], got {tuple(h.shape)}",
            )

    def _attend(self, h: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        self._check(h)
        wh = torch.einsum("...mcd,ced->...mce", h, self.W)
        nb = wh[..., self.neighbors, :, :]
        src = (wh * self.a[:, : self.dim]).sum(-1)
        dst = (nb * self.a[:, self.dim :]).sum(-1)
        scores = F.leaky_relu(src.unsqueeze(-2) + dst, self.leaky_slope)
        scores = scores.masked_fill(~self.mask[:, :, None], float("-inf"))
        return nb, torch.softmax(scores, dim=-2)

    def attention(self, h: torch.Tensor) -> torch.Tensor:
        """Attention weights [..., M, C, Zmax]; padded slots are exactly 0."""
        return self._attend(h)[1].transpose(-1, -2)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        nb, alpha = self._attend(h)
        return self.act((alpha.unsqueeze(-1) * nb).sum(-3))


def mgat_enhance(hbar: torch.Tensor, topology: RoadTopology, mgat: MultiChannelGAT) -> torch.Tensor:
    table, _ = neighbor_table(topology)
    if table.shape != tuple(mgat.neighbors.shape) or not np.array_equal(table, mgat.neighbors.cpu().numpy()):
        raise ShapeError("enhance", "attention module was built for a different topology")
    return mgat(hbar)
