import logging
from typing import Optional, Sequence

import numpy as np

from ..errors import DataError, ShapeError
from .models import METRICS, ComparisonReport, HorizonMetrics, MetricsReport

logger = logging.getLogger(__name__)

# Lead times printed in comparison tables.
TABLE_MINUTES = (15, 30, 60)


def horizon_minutes(step: int, interval: int = 900) -> float:
    return step * interval / 60.0


def table_steps(horizon: int, interval: int = 900) -> dict[str, int]:
    """Column label -> forecast step for the 15/30/60-minute columns that fit."""
    steps = {}
    for minutes in TABLE_MINUTES:
        step = minutes * 60 / interval
        if step == int(step) and 1 <= step <= horizon:
            steps[f"{minutes} min"] = int(step)
    return steps


def _step_metrics(step: int, interval: int, pred: np.ndarray, truth: np.ndarray) -> HorizonMetrics:
    err = pred - truth
    mask = truth != 0
    mape = float(np.mean(np.abs(err[mask]) / truth[mask]) * 100) if mask.any() else None
    return HorizonMetrics(
        step=step,
        minutes=horizon_minutes(step, interval),
        mae=float(np.mean(np.abs(err))),
        rmse=float(np.sqrt(np.mean(err ** 2))),
        mape=mape,
        count=int(err.size),
        masked=int((~mask).sum()),
    )


def compute_metrics(pred: np.ndarray, truth: np.ndarray, interval: int = 900) -> MetricsReport:
    """Per-step MAE/RMSE/MAPE over [S, M, D'] arrays; MAPE skips zero targets."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError("metrics", f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.ndim < 1 or pred.size == 0:
        raise DataError("cannot score empty predictions")
    if np.any(truth < 0):
        raise DataError("truth contains negative flows")

    horizons = tuple(
        _step_metrics(h + 1, interval, pred[..., h], truth[..., h]) for h in range(pred.shape[-1])
    )
    mapes = [h.mape for h in horizons if h.mape is not None]
    if not mapes:
        logger.warning("every target is zero; MAPE is undefined")
    overall = HorizonMetrics(
        step=0,
        minutes=0.0,
        mae=float(np.mean([h.mae for h in horizons])),
        rmse=float(np.mean([h.rmse for h in horizons])),
        mape=float(np.mean(mapes)) if mapes else None,
        count=sum(h.count for h in horizons),
        masked=sum(h.masked for h in horizons),
    )
    return MetricsReport(horizons, overall, sample_count=int(pred.shape[0]) if pred.ndim > 1 else 1, interval=interval)


def ir_value(without: Optional[float], with_: Optional[float]) -> Optional[float]:
    """(without - with) / without * 100; None when undefined."""
    if without is None or with_ is None or without == 0:
        return None
    return (without - with_) / without * 100.0


def improvement_ratio(without: MetricsReport, with_: MetricsReport) -> ComparisonReport:
    a, b = without.by_label(), with_.by_label()
    if a.keys() != b.keys():
        raise ShapeError("improvement_ratio", f"horizons differ: {sorted(a)} vs {sorted(b)}")
    ir = {m: {label: ir_value(a[label].value(m), b[label].value(m)) for label in a} for m in METRICS}
    return ComparisonReport(without=without, with_=with_, ir=ir)


def mean_report(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Metric-wise mean of equally shaped reports (undefined MAPEs skipped)."""
    if not reports:
        raise DataError("no reports to average")

    def mean_of(rows: list[HorizonMetrics]) -> HorizonMetrics:
        mapes = [r.mape for r in rows if r.mape is not None]
        first = rows[0]
        return HorizonMetrics(
            step=first.step,
            minutes=first.minutes,
            mae=float(np.mean([r.mae for r in rows])),
            rmse=float(np.mean([r.rmse for r in rows])),
            mape=float(np.mean(mapes)) if mapes else None,
            count=sum(r.count for r in rows),
            masked=sum(r.masked for r in rows),
        )

    horizons = tuple(mean_of([r.horizons[i] for r in reports]) for i in range(len(reports[0].horizons)))
    return MetricsReport(
        horizons=horizons,
        overall=mean_of([r.overall for r in reports]),
        sample_count=reports[0].sample_count,
        interval=reports[0].interval,
        overall_rule=reports[0].overall_rule,
    )


