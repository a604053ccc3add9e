from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from ..errors import ConfigError

ACTIVATIONS = ("relu", "tanh")
ADJACENCY_MODES = ("static", "static+adaptive")


def _from_dict(cls, payload: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
    return cls(**payload)


@dataclass(frozen=True)
class BackboneConfig:
    """Gated dilated causal convolutions interleaved with diffusion graph convolution."""

    channels: int = 32
    layers: int = 4
    temporal_kernel: int = 2
    dilations: tuple[int, ...] = (1, 2, 1, 2)
    dropout: float = 0.1
    activation: str = "relu"
    adjacency_mode: str = "static"
    gcn_order: int = 2
    end_channels: int = 64
    embedding_dim: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))
        checks = [
            (self.channels >= 1, "channels must be >= 1"),
            (self.layers >= 1, "layers must be >= 1"),
            (self.temporal_kernel >= 1, "temporal_kernel must be >= 1"),
            (len(self.dilations) == self.layers, f"need {self.layers} dilations, got {len(self.dilations)}"),
            (all(d >= 1 for d in self.dilations), "dilations must be >= 1"),
            (0 <= self.dropout < 1, "dropout must be in [0, 1)"),
            (self.activation in ACTIVATIONS, f"activation must be one of {ACTIVATIONS}"),
            (self.adjacency_mode in ADJACENCY_MODES, f"adjacency_mode must be one of {ADJACENCY_MODES}"),
            (self.gcn_order >= 1, "gcn_order must be >= 1"),
            (self.end_channels >= 1, "end_channels must be >= 1"),
            (self.embedding_dim >= 1, "embedding_dim must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(f"backbone config: {message}")

    @property
    def adaptive(self) -> bool:
        return self.adjacency_mode == "static+adaptive"

    @property
    def num_supports(self) -> int:
        return 2 + int(self.adaptive)

    def receptive_field(self) -> int:
        """Input steps that can influence one output step."""
        return 1 + (self.temporal_kernel - 1) * sum(self.dilations)

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["dilations"] = list(self.dilations)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "BackboneConfig":
        return _from_dict(cls, payload, "backbone config")


def parameter_count(
    config: BackboneConfig,
    in_channels: int,
    num_nodes: int,
    t_in: int,
    horizon: int,
    with_head: bool = True,
) -> int:
    """Trainable parameters of a BackboneModel built from `config`.

    start 1x1 conv, then per layer a filter and a gate (1, k) conv, a 1x1
    skip conv and a 1x1 conv mixing the (1 + order * supports) diffusion
    terms; the adaptive adjacency adds two node embeddings and the head a
    per-step C -> end_channels map plus end_channels * D -> D'.
    """
    c, k = config.channels, config.temporal_kernel
    total = in_channels * c + c
    per_layer = 2 * (c * c * k + c) + (c * c + c) + ((1 + config.gcn_order * config.num_supports) * c * c + c)
    total += config.layers * per_layer
    if config.adaptive:
        total += 2 * num_nodes * config.embedding_dim
    if with_head:
        e = config.end_channels
        total += c * e + e + e * t_in * horizon + horizon
    return total


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 180
    patience: int = 20
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    batch_size: int = 64
    clip_norm: Optional[float] = 5.0
    early_stopping: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        checks = [
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.patience >= 1, "patience must be >= 1"),
            (self.learning_rate >= 0, "learning_rate must be >= 0"),
            (self.weight_decay >= 0, "weight_decay must be >= 0"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.clip_norm is None or self.clip_norm > 0, "clip_norm must be > 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(f"train config: {message}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        return _from_dict(cls, payload, "train config")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_mae: float
    valid_mae: float
    seconds: float


@dataclass
class TrainingLog:
    stage: str
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_valid_mae: float = float("inf")
    stopped_early: bool = False

    @property
    def train_seconds(self) -> float:
        return sum(e.seconds for e in self.epochs)

    def train_maes(self) -> list[float]:
        return [e.train_mae for e in self.epochs]

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "epochs": [asdict(e) for e in self.epochs],
            "best_epoch": self.best_epoch,
            "best_valid_mae": self.best_valid_mae,
            "stopped_early": self.stopped_early,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainingLog":
        return cls(
            stage=payload["stage"],
            epochs=[EpochRecord(**e) for e in payload.get("epochs", [])],
            best_epoch=int(payload.get("best_epoch", 0)),
            best_valid_mae=float(payload.get("best_valid_mae", float("inf"))),
            stopped_early=bool(payload.get("stopped_early", False)),
        )
