from typing import NamedTuple, Optional

import numpy as np
import torch
from torch import nn

from ..backbone.network import BackboneModel
from ..errors import ConfigError, ShapeError
from ..topology import RoadTopology
from .layers import MultiChannelGAT, start_features, transform
from .models import FrameworkConfig


class FrameworkTrace(NamedTuple):
    h: torch.Tensor
    hbar: torch.Tensor
    hprime: torch.Tensor
    hhat: torch.Tensor
    y: torch.Tensor


class FrameworkModel(nn.Module):
    """Frozen Stage-1 features -> route transform -> MGAT -> Stage-2 STGNN -> MLP.

    Inputs are normalised GCT windows [batch, N, D]; outputs are mobility
    forecasts [batch, M, D'] in raw counts.
    """

    def __init__(
        self,
        stage1: Optional[BackboneModel],
        topology: RoadTopology,
        config: Optional[FrameworkConfig] = None,
        t_in: int = 8,
        horizon: int = 4,
    ) -> None:
        super().__init__()
        self.config = config or FrameworkConfig()
        self.topology = topology
        self.t_in = t_in
        self.horizon = horizon
        flags = self.config.ablation

        if flags.no_stage1_features:
            self.stage1 = None
            channels = 1
        else:
            if stage1 is None:
                raise ConfigError("a pretrained Stage-1 model is required unless no_stage1_features is set")
            if stage1.num_nodes != topology.num_segments:
                raise ShapeError("stage1", f"model has {stage1.num_nodes} nodes, topology has {topology.num_segments} segments")
            self.stage1 = stage1.freeze()
            channels = stage1.config.channels

        self.mgat = None
        if not flags.no_enhance:
            self.mgat = MultiChannelGAT(
                channels, t_in, topology, self.config.leaky_slope, self.config.activation
            )
        self.stage2 = None
        if not flags.no_stage2:
            self.stage2 = BackboneModel(
                self.config.stage2,
                topology.route_adjacency,
                in_channels=channels,
                t_in=t_in,
                horizon=horizon,
                with_head=False,
                name="stage2",
                trained_on="routes",
            )
            channels = self.config.stage2.channels
        self.head = nn.Sequential(
            nn.Flatten(start_dim=-2),
            nn.Linear(channels * t_in, self.config.hidden),
            nn.ReLU(),
            nn.Linear(self.config.hidden, horizon),
        )
        self.register_buffer("output_mean", torch.zeros(()))
        self.register_buffer("output_std", torch.ones(()))

    def set_output_scale(self, mean, std) -> None:
        self.output_mean = torch.as_tensor(np.asarray(mean), dtype=self.output_mean.dtype).reshape(())
        self.output_std = torch.as_tensor(np.asarray(std), dtype=self.output_std.dtype).reshape(())

    def train(self, mode: bool = True) -> "FrameworkModel":
        super().train(mode)
        if self.stage1 is not None:
            self.stage1.eval()
        return self

    def stage1_parameters(self) -> list[nn.Parameter]:
        return list(self.stage1.parameters()) if self.stage1 is not None else []

    def trace(self, x: torch.Tensor) -> FrameworkTrace:
        if x.dim() != 3 or x.shape[1] != self.topology.num_segments or x.shape[2] != self.t_in:
            raise ShapeError(
                "input", f"expected [batch, {self.topology.num_segments}, {self.t_in}], got {tuple(x.shape)}"
            )
        flags = self.config.ablation
        h = x.unsqueeze(2) if self.stage1 is None else self.stage1.features(x)
        if flags.no_transform:
            hbar = start_features(h, self.topology)
        else:
            hbar = transform(h, self.topology, self.config.activation)
        hprime = hbar if self.mgat is None else self.mgat(hbar)
        hhat = hprime if self.stage2 is None else self.stage2.features(hprime)
        y = self.head(hhat) * self.output_std + self.output_mean
        return FrameworkTrace(h, hbar, hprime, hhat, y)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.trace(x).y


def forward(model: FrameworkModel, x, topology: Optional[RoadTopology] = None) -> torch.Tensor:
    """X [N, T_in] (or batched) -> Y [M, D'] in raw mobility counts."""
    if topology is not None and topology.fingerprint() != model.topology.fingerprint():
        raise ShapeError("input", "topology differs from the one the model was built on")
    param = next(model.parameters())
    t = torch.as_tensor(x, dtype=param.dtype, device=param.device)
    single = t.dim() == 2
    y = model(t.unsqueeze(0) if single else t)
    return y[0] if single else y
