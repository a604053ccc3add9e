from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


@dataclass(frozen=True)
class DescriptiveStats:
    kind: str
    sample_count: int
    entity_count: int
    interval: int
    grand_mean: float
    grand_std: float
    max_entity_mean: float
    max_entity: int
    max_entity_label: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Histogram:
    """Histogram of per-entity mean flows; skewness is None when undefined."""

    counts: np.ndarray
    edges: np.ndarray
    entity_means: np.ndarray
    skewness: Optional[float]

    def to_dict(self) -> dict:
        return {
            "counts": self.counts.tolist(),
            "edges": self.edges.tolist(),
            "entity_means": self.entity_means.tolist(),
            "skewness": self.skewness,
        }


@dataclass(frozen=True)
class CorrelationEntry:
    route: int
    label: str
    hops: int
    r: Optional[float]


@dataclass(frozen=True)
class CorrelationRadar:
    focal_route: int
    focal_label: str
    day_index: int
    entries: tuple[CorrelationEntry, ...]

    def mean_r(self, hops: int) -> Optional[float]:
        values = [e.r for e in self.entries if e.hops == hops and e.r is not None]
        return float(np.mean(values)) if values else None

    def to_dict(self) -> dict:
        return {
            "focal_route": self.focal_route,
            "focal_label": self.focal_label,
            "day_index": self.day_index,
            "entries": [asdict(e) for e in self.entries],
        }


@dataclass(frozen=True, eq=False)
class WeeklyProfile:
    """values[w, s]: mean flow on weekday w (0 = Monday) at slot s of the day."""

    entity: int
    label: str
    interval: int
    values: np.ndarray
    days_per_weekday: np.ndarray

    @property
    def slots_per_day(self) -> int:
        return self.values.shape[1]

    def slot_hours(self) -> np.ndarray:
        return np.arange(self.slots_per_day) * self.interval / 3600.0

    def to_dict(self) -> dict:
        return {
            "entity": self.entity,
            "label": self.label,
            "interval": self.interval,
            "weekdays": list(WEEKDAYS),
            "values": self.values.tolist(),
            "days_per_weekday": self.days_per_weekday.tolist(),
        }


@dataclass(frozen=True)
class FlowRelationship:
    """Route mobility against its start segment's GCT flow, step by step."""

    route: int
    label: str
    segment: int
    r: Optional[float]
    slope: Optional[float]
    intercept: Optional[float]
    gct_mean: float
    mobility_mean: float

    def to_dict(self) -> dict:
        return asdict(self)
