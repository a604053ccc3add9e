import logging
from datetime import datetime, timezone
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy import stats

from ..data.models import FlowKind, FlowSeries
from ..errors import ConfigError, DataError, TopologyError
from ..topology import RoadTopology
from .models import (
    CorrelationEntry,
    CorrelationRadar,
    DescriptiveStats,
    FlowRelationship,
    Histogram,
    WeeklyProfile,
)

logger = logging.getLogger(__name__)


def _label(series: FlowSeries, entity: int) -> str:
    return series.labels[entity] if series.labels else str(entity)


def _resolve_entity(series: FlowSeries, entity: Union[int, str]) -> int:
    if isinstance(entity, str) and series.labels and entity in series.labels:
        return series.labels.index(entity)
    index = int(entity)
    if not 0 <= index < series.entity_count:
        raise DataError(f"entity {entity!r} not in series of {series.entity_count}")
    return index


def _steps_per_day(series: FlowSeries) -> int:
    if 86400 % series.interval:
        raise DataError(f"interval {series.interval}s does not divide a day")
    return 86400 // series.interval


def pearson(x: np.ndarray, y: np.ndarray) -> Optional[float]:
    """Pearson r, or None when either side has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    return float(np.clip(stats.pearsonr(x, y).statistic, -1.0, 1.0))


def describe(series: FlowSeries) -> DescriptiveStats:
    if series.values.size == 0:
        raise DataError(f"{series.kind.value} series is empty")
    values = np.asarray(series.values, dtype=np.float64)
    means = values.mean(axis=1)
    top = int(np.argmax(means))
    return DescriptiveStats(
        kind=series.kind.value,
        sample_count=series.num_steps,
        entity_count=series.entity_count,
        interval=series.interval,
        grand_mean=float(values.mean()),
        grand_std=float(values.std()),
        max_entity_mean=float(means[top]),
        max_entity=top,
        max_entity_label=_label(series, top),
    )


def histogram(series: FlowSeries, bins: int = 10) -> Histogram:
    if bins < 2:
        raise ConfigError(f"histogram needs at least 2 bins, got {bins}")
    means = np.asarray(series.values, dtype=np.float64).mean(axis=1)
    if len(means) <= 1:
        edges = np.repeat(means, 2) if len(means) else np.zeros(2)
        return Histogram(np.array([len(means)]), edges, means, None)
    counts, edges = np.histogram(means, bins=bins)
    skewness = None
    if len(means) >= 3 and np.ptp(means) > 0:
        skewness = float(stats.skew(means, bias=False))
    return Histogram(counts, edges, means, skewness)


def upstream_correlation(
    mob: FlowSeries,
    topology: RoadTopology,
    focal_route: int,
    day_index: int,
    hops: int = 2,
) -> CorrelationRadar:
    """Pearson r of one day's focal-route flow against routes 1..hops upstream."""
    if mob.kind is not FlowKind.MOBILITY:
        raise DataError("upstream correlation needs a mobility series")
    if not 1 <= hops <= 2:
        raise ConfigError(f"hops must be 1 or 2, got {hops}")
    if not 0 <= focal_route < topology.num_routes:
        raise TopologyError(f"route {focal_route} outside [0, {topology.num_routes})")
    mob.check_topology(topology)
    spd = _steps_per_day(mob)
    lo, hi = day_index * spd, (day_index + 1) * spd
    if day_index < 0 or hi > mob.num_steps:
        raise DataError(f"day {day_index} is not fully covered by {mob.num_steps} steps")

    day = np.asarray(mob.values[:, lo:hi], dtype=np.float64)
    entries = []
    for h in range(1, hops + 1):
        for q in topology.upstream_routes(focal_route, h):
            r = pearson(day[focal_route], day[q])
            if r is None:
                logger.warning("route %s: zero variance on day %d, r undefined", topology.route_label(q), day_index)
            entries.append(CorrelationEntry(q, topology.route_label(q), h, r))
    return CorrelationRadar(focal_route, topology.route_label(focal_route), day_index, tuple(entries))


def weekly_profile(series: FlowSeries, entity: Union[int, str]) -> WeeklyProfile:
    """Mean flow per weekday and time-of-day slot over whole days.

    Days are counted from the series start; the first day takes the UTC
    weekday of start_timestamp.
    """
    index = _resolve_entity(series, entity)
    spd = _steps_per_day(series)
    days = series.num_steps // spd
    if days < 7:
        raise DataError(f"weekly profile needs 7 whole days, series covers {series.num_steps / spd:.2f}")
    first = datetime.fromtimestamp(series.start_timestamp, tz=timezone.utc).weekday()
    steps = np.arange(days * spd)
    frame = pd.DataFrame(
        {
            "weekday": (first + steps // spd) % 7,
            "slot": steps % spd,
            "value": np.asarray(series.values[index, : days * spd], dtype=np.float64),
        }
    )
    table = frame.groupby(["weekday", "slot"])["value"].mean().unstack("slot")
    table = table.reindex(index=range(7), columns=range(spd))
    counts = np.bincount((first + np.arange(days)) % 7, minlength=7)
    return WeeklyProfile(index, _label(series, index), series.interval, table.to_numpy(), counts)


def flow_relationship(
    gct: FlowSeries,
    mob: FlowSeries,
    topology: RoadTopology,
    route: int,
) -> FlowRelationship:
    if not 0 <= route < topology.num_routes:
        raise TopologyError(f"route {route} outside [0, {topology.num_routes})")
    gct.check_topology(topology)
    mob.check_topology(topology)
    segment = int(topology.route_starts[route])
    x = np.asarray(gct.values[segment], dtype=np.float64)
    y = np.asarray(mob.values[route], dtype=np.float64)
    r = pearson(x, y)
    slope = intercept = None
    if np.ptp(x) > 0:
        fit = stats.linregress(x, y)
        slope, intercept = float(fit.slope), float(fit.intercept)
    return FlowRelationship(
        route=route,
        label=topology.route_label(route),
        segment=segment,
        r=r,
        slope=slope,
        intercept=intercept,
        gct_mean=float(x.mean()),
        mobility_mean=float(y.mean()),
    )
