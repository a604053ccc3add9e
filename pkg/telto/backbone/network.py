"""Reference STGNN: gated dilated causal TCN + diffusion graph convolution.

Tensors run through the stack as [batch, channels, nodes, time]; the public
methods take and return node-major layouts ([batch, nodes, ...]).
"""
from typing import Optional, Union

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ShapeError
from .models import BackboneConfig

ArrayLike = Union[np.ndarray, torch.Tensor]


def transition_supports(adjacency: np.ndarray) -> list[np.ndarray]:
    """Row-normalised forward and backward transition matrices of `adjacency`."""

    def row_normalise(a: np.ndarray) -> np.ndarray:
        deg = a.sum(axis=1, keepdims=True)
        return np.divide(a, deg, out=np.zeros_like(a), where=deg > 0)

    a = np.asarray(adjacency, dtype=np.float64)
    return [row_normalise(a), row_normalise(a.T)]


def activation_fn(name: str):
    return torch.relu if name == "relu" else torch.tanh


class DiffusionConv(nn.Module):
    def __init__(self, channels: int, num_supports: int, order: int, dropout: float) -> None:
        super().__init__()
        self.order = order
        self.dropout = dropout
        self.mlp = nn.Conv2d((1 + order * num_supports) * channels, channels, kernel_size=(1, 1))

    @staticmethod
    def propagate(x: torch.Tensor, a: torch.Tensor) -> torch.Tensor:
        return torch.einsum("ncvl,vw->ncwl", x, a).contiguous()

    def forward(self, x: torch.Tensor, supports: list[torch.Tensor]) -> torch.Tensor:
        out = [x]
        for a in supports:
            h = x
            for _ in range(self.order):
                h = self.propagate(h, a)
                out.append(h)
        h = self.mlp(torch.cat(out, dim=1))
        return F.dropout(h, self.dropout, training=self.training)


class BackboneModel(nn.Module):
    """STGNN used for both stages.

    features(x) returns the summed skip connections as [batch, nodes, C, D];
    forward(x) applies the two-layer head and the output affine, returning
    [batch, nodes, D'] in raw units.
    """

    def __init__(
        self,
        config: BackboneConfig,
        adjacency: np.ndarray,
        in_channels: int = 1,
        t_in: int = 8,
        horizon: int = 4,
        with_head: bool = True,
        name: str = "stgnn",
        trained_on: str = "gct",
    ) -> None:
        super().__init__()
        adjacency = np.asarray(adjacency)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise ShapeError(name, f"adjacency must be square, got {adjacency.shape}")
        self.config = config
        self.name = name
        self.trained_on = trained_on
        self.num_nodes = adjacency.shape[0]
        self.in_channels = in_channels
        self.t_in = t_in
        self.horizon = horizon
        self.with_head = with_head
        self.act = activation_fn(config.activation)

        dtype = torch.get_default_dtype()
        for i, support in enumerate(transition_supports(adjacency)):
            self.register_buffer(f"support_{i}", torch.as_tensor(support, dtype=dtype))
        if config.adaptive:
            self.nodevec1 = nn.Parameter(torch.randn(self.num_nodes, config.embedding_dim))
            self.nodevec2 = nn.Parameter(torch.randn(config.embedding_dim, self.num_nodes))

        c, k = config.channels, config.temporal_kernel
        self.start_conv = nn.Conv2d(in_channels, c, kernel_size=(1, 1))
        self.filter_convs = nn.ModuleList()
        self.gate_convs = nn.ModuleList()
        self.skip_convs = nn.ModuleList()
        self.gconv = nn.ModuleList()
        for d in config.dilations:
            self.filter_convs.append(nn.Conv2d(c, c, kernel_size=(1, k), dilation=(1, d)))
            self.gate_convs.append(nn.Conv2d(c, c, kernel_size=(1, k), dilation=(1, d)))
            self.skip_convs.append(nn.Conv2d(c, c, kernel_size=(1, 1)))
            self.gconv.append(DiffusionConv(c, config.num_supports, config.gcn_order, config.dropout))

        if with_head:
            self.end_conv_1 = nn.Linear(c, config.end_channels)
            self.end_conv_2 = nn.Linear(config.end_channels * t_in, horizon)
        self.register_buffer("output_mean", torch.zeros(()))
        self.register_buffer("output_std", torch.ones(()))

    def set_output_scale(self, mean, std) -> None:
        """Head outputs are multiplied by std and shifted by mean (scalar or per node)."""
        self.output_mean = torch.as_tensor(np.asarray(mean), dtype=self.output_mean.dtype).reshape(-1)
        self.output_std = torch.as_tensor(np.asarray(std), dtype=self.output_std.dtype).reshape(-1)
        if self.output_mean.numel() == 1:
            self.output_mean = self.output_mean.reshape(())
            self.output_std = self.output_std.reshape(())
        else:
            self.output_mean = self.output_mean[:, None]
            self.output_std = self.output_std[:, None]

    def supports(self) -> list[torch.Tensor]:
        supports = [self.support_0, self.support_1]
        if self.config.adaptive:
            supports.append(F.softmax(F.relu(torch.mm(self.nodevec1, self.nodevec2)), dim=1))
        return supports

    def _check_input(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 3:
            x = x.unsqueeze(2)
        if x.dim() != 4:
            raise ShapeError(self.name, f"expected [batch, nodes, D] or [batch, nodes, channels, D], got {tuple(x.shape)}")
        _, v, c, d = x.shape
        if v != self.num_nodes:
            raise ShapeError(self.name, f"input has {v} nodes, graph has {self.num_nodes}")
        if c != self.in_channels:
            raise ShapeError(self.name, f"input has {c} channels, model expects {self.in_channels}")
        if self.with_head and d != self.t_in:
            raise ShapeError(self.name, f"input has {d} steps, head expects {self.t_in}")
        return x

    def features(self, x: torch.Tensor) -> torch.Tensor:
        x = self._check_input(x).permute(0, 2, 1, 3)
        x = self.start_conv(x)
        supports = self.supports()
        skip = 0
        k = self.config.temporal_kernel
        for i, d in enumerate(self.config.dilations):
            residual = x
            padded = F.pad(x, ((k - 1) * d, 0))
            h = torch.tanh(self.filter_convs[i](padded)) * torch.sigmoid(self.gate_convs[i](padded))
            skip = skip + self.skip_convs[i](h)
            x = self.gconv[i](h, supports) + residual
        return skip.permute(0, 2, 1, 3)

    def head(self, features: torch.Tensor) -> torch.Tensor:
        h = self.act(features).transpose(-1, -2)
        h = self.act(self.end_conv_1(h))
        y = self.end_conv_2(h.flatten(start_dim=-2))
        return y * self.output_std + self.output_mean

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if not self.with_head:
            raise ShapeError(self.name, "model was built without a prediction head")
        return self.head(self.features(x))

    def freeze(self) -> "BackboneModel":
        for p in self.parameters():
            p.requires_grad_(False)
        return self.eval()


def _as_batch(model: BackboneModel, x: ArrayLike) -> tuple[torch.Tensor, bool]:
    param = next(model.parameters())
    t = torch.as_tensor(x, dtype=param.dtype, device=param.device)
    single = t.dim() == 2 or (t.dim() == 3 and t.shape[0] == model.num_nodes and model.in_channels > 1)
    return (t.unsqueeze(0) if single else t), single


def forward_features(model: BackboneModel, x: ArrayLike, graph: Optional[np.ndarray] = None) -> torch.Tensor:
    """[entities, D] (or batched) -> [entities, C, D], dropout disabled."""
    if graph is not None and np.asarray(graph).shape[0] != model.num_nodes:
        raise ShapeError(model.name, f"graph has {np.asarray(graph).shape[0]} nodes, model has {model.num_nodes}")
    model.eval()
    batch, single = _as_batch(model, x)
    out = model.features(batch)
    return out[0] if single else out


def forward_predict(model: BackboneModel, x: ArrayLike, graph: Optional[np.ndarray] = None) -> torch.Tensor:
    """[entities, D] (or batched) -> [entities, D'] in raw units."""
    if graph is not None and np.asarray(graph).shape[0] != model.num_nodes:
        raise ShapeError(model.name, f"graph has {np.asarray(graph).shape[0]} nodes, model has {model.num_nodes}")
    model.eval()
    batch, single = _as_batch(model, x)
    out = model(batch)
    return out[0] if single else out
