from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd

from ..errors import ConfigError, DataError

DEFAULT_INTERVAL = 900
DEFAULT_PAIRING_WINDOW = 900
DEFAULT_T_IN = 8
DEFAULT_T_OUT = 4
DEFAULT_SPLIT_RATIOS = (0.7, 0.2, 0.1)
# 2022-08-28 00:00:00 UTC
DEFAULT_START_TIMESTAMP = 1661644800


class FlowKind(Enum):
    GCT = "gct"
    MOBILITY = "mobility"


@dataclass(frozen=True)
class GctRecord:
    user_hash: str
    timestamp: int
    segment_id: int


@dataclass(frozen=True)
class GctPairing:
    user_hash: str
    route_id: int
    start_time: int
    end_time: int


def _column(values, dtype=np.int64) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RecordTable:
    """Columnar store of GCT records; `user` holds integer codes into `user_labels`."""

    user: np.ndarray
    timestamp: np.ndarray
    segment: np.ndarray
    user_labels: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        n = len(self.user)
        if len(self.timestamp) != n or len(self.segment) != n:
            raise DataError("record columns have different lengths")

    def __len__(self) -> int:
        return len(self.user)

    @classmethod
    def empty(cls) -> "RecordTable":
        return cls(_column([]), _column([]), _column([]))

    @classmethod
    def from_records(cls, records: Sequence[GctRecord]) -> "RecordTable":
        if not records:
            return cls.empty()
        codes, labels = pd.factorize(pd.Series([r.user_hash for r in records], dtype=object))
        return cls(
            user=_column(codes),
            timestamp=_column([r.timestamp for r in records]),
            segment=_column([r.segment_id for r in records]),
            user_labels=np.asarray(labels, dtype=object),
        )

    def user_hash(self, code: int) -> str:
        if self.user_labels is not None:
            return str(self.user_labels[code])
        return f"{int(code):012x}"

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.timestamp) >= 0))

    def to_records(self) -> Iterator[GctRecord]:
        for u, t, s in zip(self.user, self.timestamp, self.segment):
            yield GctRecord(self.user_hash(u), int(t), int(s))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "user_hash": (
                    self.user_labels[self.user]
                    if self.user_labels is not None
                    else pd.Series(self.user).map("{:012x}".format)
                ),
                "timestamp": self.timestamp,
                "segment_id": self.segment,
            }
        )


@dataclass(frozen=True, eq=False)
class PairingTable:
    user: np.ndarray
    route: np.ndarray
    start_time: np.ndarray
    end_time: np.ndarray
    user_labels: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.user)

    @classmethod
    def empty(cls) -> "PairingTable":
        return cls(_column([]), _column([]), _column([]), _column([]))

    @classmethod
    def from_pairings(cls, pairings: Sequence[GctPairing]) -> "PairingTable":
        if not pairings:
            return cls.empty()
        codes, labels = pd.factorize(pd.Series([p.user_hash for p in pairings], dtype=object))
        return cls(
            user=_column(codes),
            route=_column([p.route_id for p in pairings]),
            start_time=_column([p.start_time for p in pairings]),
            end_time=_column([p.end_time for p in pairings]),
            user_labels=np.asarray(labels, dtype=object),
        )

    def to_pairings(self) -> list[GctPairing]:
        def label(code: int) -> str:
            if self.user_labels is not None:
                return str(self.user_labels[code])
            return f"{int(code):012x}"

        return [
            GctPairing(label(u), int(r), int(s), int(e))
            for u, r, s, e in zip(self.user, self.route, self.start_time, self.end_time)
        ]


@dataclass(frozen=True, eq=False)
class FlowSeries:
    """Counts per entity per interval, shaped [entity_count, T]."""

    kind: FlowKind
    values: np.ndarray
    interval: int = DEFAULT_INTERVAL
    start_timestamp: int = DEFAULT_START_TIMESTAMP
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise DataError(f"{self.kind.value} flow values must be 2-D, got shape {self.values.shape}")
        if self.values.shape[1] < 1:
            raise DataError(f"{self.kind.value} flow series has no time steps")
        if np.any(self.values < 0):
            raise DataError(f"{self.kind.value} flow series contains negative counts")
        if self.interval <= 0:
            raise DataError(f"interval must be positive, got {self.interval}")
        if self.labels and len(self.labels) != self.values.shape[0]:
            raise DataError(f"{len(self.labels)} labels for {self.values.shape[0]} entities")

    @property
    def entity_count(self) -> int:
        return self.values.shape[0]

    @property
    def num_steps(self) -> int:
        return self.values.shape[1]

    @property
    def end_timestamp(self) -> int:
        return self.start_timestamp + self.num_steps * self.interval

    def timestamps(self) -> np.ndarray:
        return self.start_timestamp + self.interval * np.arange(self.num_steps, dtype=np.int64)

    def check_topology(self, topology) -> None:
        expected = topology.num_segments if self.kind is FlowKind.GCT else topology.num_routes
        if self.entity_count != expected:
            raise DataError(
                f"{self.kind.value} series has {self.entity_count} entities, topology expects {expected}"
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FlowSeries):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.interval == other.interval
            and self.start_timestamp == other.start_timestamp
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class WindowedDataset:
    inputs: np.ndarray
    targets: np.ndarray
    gct_targets: np.ndarray
    offsets: np.ndarray
    t_in: int = DEFAULT_T_IN
    t_out: int = DEFAULT_T_OUT
    split: str = "train"

    @property
    def num_samples(self) -> int:
        return self.inputs.shape[0]

    def __len__(self) -> int:
        return self.num_samples


class Splits(NamedTuple):
    train: WindowedDataset
    test: WindowedDataset
    valid: WindowedDataset


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray
    per_entity: bool = False

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def invert(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {
            "mean": np.asarray(self.mean).tolist(),
            "std": np.asarray(self.std).tolist(),
            "per_entity": self.per_entity,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NormalizationStats":
        return cls(
            mean=np.asarray(payload["mean"], dtype=np.float64),
            std=np.asarray(payload["std"], dtype=np.float64),
            per_entity=bool(payload.get("per_entity", False)),
        )

    @classmethod
    def identity(cls) -> "NormalizationStats":
        return cls(mean=np.asarray(0.0), std=np.asarray(1.0))


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs of the synthetic city. Level factors map entity labels to
    multiples of the mean level (route labels are "start_end")."""

    days: int = 31
    interval: int = DEFAULT_INTERVAL
    start_timestamp: int = DEFAULT_START_TIMESTAMP
    gct_level: float = 159.9
    mobility_level: float = 12.9
    level_dispersion: float = 0.8
    profile: str = "commute"
    commute_amplitude: float = 1.5
    weekend_factor: float = 0.35
    night_factor: float = 0.15
    noise: float = 0.2
    pairing_window: int = DEFAULT_PAIRING_WINDOW
    travel_time_min: int = 30
    travel_time_max: int = 300
    continuation_prob: float = 0.3
    upstream_coupling: float = 0.5
    propagation_delay: int = 1
    stationary_pool: int = 50
    emit_background_records: bool = True
    segment_level_factors: dict = field(default_factory=dict)
    route_level_factors: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        checks = [
            (self.days >= 1, "days must be >= 1"),
            (self.interval > 0 and 86400 % self.interval == 0, "interval must divide a day"),
            (self.gct_level >= 0, "gct_level must be >= 0"),
            (self.mobility_level >= 0, "mobility_level must be >= 0"),
            (self.level_dispersion >= 0, "level_dispersion must be >= 0"),
            (self.profile in ("commute", "flat"), "profile must be 'commute' or 'flat'"),
            (self.commute_amplitude >= 0, "commute_amplitude must be >= 0"),
            (0 <= self.weekend_factor <= 1, "weekend_factor must be in [0, 1]"),
            (0 < self.night_factor <= 1, "night_factor must be in (0, 1]"),
            (self.noise >= 0, "noise must be >= 0"),
            (self.pairing_window > 0, "pairing_window must be > 0"),
            (1 <= self.travel_time_min <= self.travel_time_max, "need 1 <= travel_time_min <= travel_time_max"),
            (self.travel_time_max <= self.pairing_window, "travel_time_max must not exceed pairing_window"),
            (0 <= self.continuation_prob <= 1, "continuation_prob must be in [0, 1]"),
            (self.upstream_coupling >= 0, "upstream_coupling must be >= 0"),
            (self.propagation_delay >= 0, "propagation_delay must be >= 0"),
            (self.stationary_pool >= 1, "stationary_pool must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(f"synthetic config: {message}")
        for name in ("segment_level_factors", "route_level_factors"):
            for label, factor in getattr(self, name).items():
                if factor < 0:
                    raise ConfigError(f"synthetic config: {name}[{label!r}] must be >= 0")

    @property
    def num_steps(self) -> int:
        return self.days * 86400 // self.interval

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "SyntheticConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"synthetic config: unknown keys {sorted(unknown)}")
        return cls(**payload)


@dataclass(frozen=True)
class WindowConfig:
    t_in: int = DEFAULT_T_IN
    t_out: int = DEFAULT_T_OUT
    ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS

    def __post_init__(self) -> None:
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if self.t_in < 1 or self.t_out < 1:
            raise ConfigError(f"window config: t_in and t_out must be >= 1, got {self.t_in}, {self.t_out}")
        if len(self.ratios) != 3 or abs(sum(self.ratios) - 1.0) > 1e-9 or min(self.ratios) < 0:
            raise ConfigError(f"window config: ratios must be three non-negative values summing to 1, got {self.ratios}")

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["ratios"] = list(self.ratios)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "WindowConfig":
        unknown = set(payload) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"window config: unknown keys {sorted(unknown)}")
        return cls(**payload)
