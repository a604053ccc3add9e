from dataclasses import asdict, dataclass, field, fields

from ..backbone.models import ACTIVATIONS, BackboneConfig
from ..errors import ConfigError


@dataclass(frozen=True)
class AblationFlags:
    no_stage1_features: bool = False
    no_transform: bool = False
    no_enhance: bool = False
    no_stage2: bool = False

    @property
    def is_full(self) -> bool:
        return not any(asdict(self).values())

    @property
    def label(self) -> str:
        for name, flags in ABLATION_SETTINGS:
            if flags == self:
                return name
        return "+".join(k for k, v in asdict(self).items() if v)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "AblationFlags":
        unknown = set(payload) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"ablation flags: unknown keys {sorted(unknown)}")
        return cls(**payload)


# Row order of the ablation table; the full framework comes last.
ABLATION_SETTINGS: tuple[tuple[str, AblationFlags], ...] = (
    ("w/o STGNN1st", AblationFlags(no_stage1_features=True)),
    ("w/o Enhan.", AblationFlags(no_enhance=True)),
    ("w/o STGNN2nd", AblationFlags(no_stage2=True)),
    ("w/o Trans.", AblationFlags(no_transform=True)),
    ("Full Framework", AblationFlags()),
)


@dataclass(frozen=True)
class FrameworkConfig:
    """Stage-2 settings: sigma, attention slope, secondary STGNN and MLP head."""

    activation: str = "relu"
    leaky_slope: float = 0.2
    hidden: int = 256
    stage2: BackboneConfig = field(default_factory=BackboneConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"framework config: activation must be one of {ACTIVATIONS}")
        if self.leaky_slope < 0:
            raise ConfigError("framework config: leaky_slope must be >= 0")
        if self.hidden < 1:
            raise ConfigError("framework config: hidden must be >= 1")

    def with_ablation(self, flags: AblationFlags) -> "FrameworkConfig":
        return FrameworkConfig(self.activation, self.leaky_slope, self.hidden, self.stage2, flags)

    def to_dict(self) -> dict:
        return {
            "activation": self.activation,
            "leaky_slope": self.leaky_slope,
            "hidden": self.hidden,
            "stage2": self.stage2.to_dict(),
            "ablation": self.ablation.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FrameworkConfig":
        payload = dict(payload)
        unknown = set(payload) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"framework config: unknown keys {sorted(unknown)}")
        if "stage2" in payload:
            payload["stage2"] = BackboneConfig.from_dict(payload["stage2"])
        if "ablation" in payload:
            payload["ablation"] = AblationFlags.from_dict(payload["ablation"])
        return cls(**payload)
