import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

import torch
from rich.console import Console
from rich.logging import RichHandler

from .backbone.models import BackboneConfig, TrainConfig
from .data.models import SyntheticConfig, WindowConfig
from .errors import ConfigError
from .framework.models import FrameworkConfig

PRECISIONS = {"float32": torch.float32, "float64": torch.float64}
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_current_precision: str = "float32"


def get_precision() -> str:
    return _current_precision


def set_precision(precision: str) -> None:
    global _current_precision
    if precision not in PRECISIONS:
        raise ConfigError(f"precision must be one of {sorted(PRECISIONS)}, got {precision!r}")
    _current_precision = precision
    torch.set_default_dtype(PRECISIONS[precision])


def get_dtype() -> torch.dtype:
    return PRECISIONS[_current_precision]


def configure_logging(level: int = logging.INFO, log_file: Optional[Union[str, Path]] = None) -> logging.Logger:
    """Console output through rich, plus a plain file log when `log_file` is set.

    Calling it again replaces the handlers installed by the previous call.
    """
    logger = logging.getLogger("telto")
    for handler in [h for h in logger.handlers if getattr(h, "_telto", False)]:
        logger.removeHandler(handler)
        handler.close()
    logger.setLevel(level)

    console = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
    console.setFormatter(logging.Formatter("%(message)s"))
    handlers: list[logging.Handler] = [console]
    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, mode="a", encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handlers.append(file_handler)
    for handler in handlers:
        handler._telto = True
        logger.addHandler(handler)
    return logger


SECTIONS = {
    "synthetic": SyntheticConfig,
    "window": WindowConfig,
    "backbone": BackboneConfig,
    "framework": FrameworkConfig,
    "train": TrainConfig,
}


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI run needs; serialised into every output directory."""

    output: str = "runs/latest"
    topology: Optional[str] = None
    data_dir: Optional[str] = None
    seed: int = 0
    runs: int = 5
    precision: str = "float32"
    num_segments: int = 34
    num_routes: int = 84
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    framework: FrameworkConfig = field(default_factory=FrameworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ConfigError("run config: runs must be >= 1")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"run config: precision must be one of {sorted(PRECISIONS)}")

    def override(self, section: Optional[str] = None, **values) -> "RunConfig":
        """Replace top-level fields, or fields of one nested section; None values are skipped."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        if section is None:
            return replace(self, **values)
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        return replace(self, **{section: replace(getattr(self, section), **values)})

    def to_dict(self) -> dict:
        payload = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in SECTIONS}
        payload.update({name: getattr(self, name).to_dict() for name in SECTIONS})
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"run config: unknown keys {sorted(unknown)}")
        values = dict(payload)
        for name, section in SECTIONS.items():
            if name in values:
                values[name] = section.from_dict(values[name])
        return cls(**values)

    def save(self, directory: Union[str, Path]) -> Path:
        path = Path(directory) / "run_config.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path


def load_run_config(path: Union[str, Path]) -> RunConfig:
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    return RunConfig.from_dict(payload)
