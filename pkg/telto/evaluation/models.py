from dataclasses import asdict, dataclass, field
from typing import Optional

from ..framework.models import AblationFlags

METRICS = ("mae", "rmse", "mape")
OVERALL = "overall"
OVERALL_RULE = "mean over all forecast steps"


@dataclass(frozen=True)
class HorizonMetrics:
    """MAE/RMSE in flow counts, MAPE in percent (None when every target is zero)."""

    step: int
    minutes: float
    mae: float
    rmse: float
    mape: Optional[float]
    count: int = 0
    masked: int = 0

    @property
    def label(self) -> str:
        return OVERALL if self.step == 0 else f"{self.minutes:g} min"

    def value(self, metric: str) -> Optional[float]:
        return getattr(self, metric)


@dataclass(frozen=True)
class MetricsReport:
    horizons: tuple[HorizonMetrics, ...]
    overall: HorizonMetrics
    sample_count: int = 0
    interval: int = 900
    overall_rule: str = OVERALL_RULE

    def by_label(self) -> dict[str, HorizonMetrics]:
        rows = {h.label: h for h in self.horizons}
        rows[OVERALL] = self.overall
        return rows

    def horizon(self, step: int) -> HorizonMetrics:
        for h in self.horizons:
            if h.step == step:
                return h
        raise KeyError(step)

    def to_dict(self) -> dict:
        return {
            "horizons": [asdict(h) for h in self.horizons],
            "overall": asdict(self.overall),
            "sample_count": self.sample_count,
            "interval": self.interval,
            "overall_rule": self.overall_rule,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricsReport":
        return cls(
            horizons=tuple(HorizonMetrics(**h) for h in payload["horizons"]),
            overall=HorizonMetrics(**payload["overall"]),
            sample_count=payload.get("sample_count", 0),
            interval=payload.get("interval", 900),
            overall_rule=payload.get("overall_rule", OVERALL_RULE),
        )


@dataclass(frozen=True)
class ComparisonReport:
    """without = bare backbone, with_ = framework; ir[metric][label] in percent."""

    without: Optional[MetricsReport]
    with_: Optional[MetricsReport]
    ir: dict = field(default_factory=dict)
    runs: int = 1
    seeds: tuple[int, ...] = ()
    errors: dict = field(default_factory=dict)

    def overall_ir(self, metric: str = "mae") -> Optional[float]:
        return self.ir.get(metric, {}).get(OVERALL)

    def to_dict(self) -> dict:
        return {
            "without": None if self.without is None else self.without.to_dict(),
            "with": None if self.with_ is None else self.with_.to_dict(),
            "ir": self.ir,
            "runs": self.runs,
            "seeds": list(self.seeds),
            "errors": self.errors,
        }


@dataclass(frozen=True)
class AblationRow:
    label: str
    flags: AblationFlags
    report: Optional[MetricsReport] = None
    error: Optional[str] = None

    @property
    def baseline(self) -> bool:
        return self.flags.is_full


@dataclass(frozen=True)
class AblationTable:
    rows: tuple[AblationRow, ...]
    runs: int = 1
    seeds: tuple[int, ...] = ()

    def row(self, label: str) -> AblationRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "seeds": list(self.seeds),
            "rows": [
                {
                    "setting": r.label,
                    "baseline": r.baseline,
                    "flags": r.flags.to_dict(),
                    "report": None if r.report is None else r.report.to_dict(),
                    "error": r.error,
                }
                for r in self.rows
            ],
        }
