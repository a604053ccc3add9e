"""Synthetic city traffic: commuting agents plus stationary background users.

Agents make one trip over a route (records on both endpoint segments within
the pairing window) and may continue onto one downstream route; every
intended traversal is a GCT pairing and nothing else pairs, so the emitted
mobility series is exactly what pairing + aggregation recovers from the
emitted records. Background users never leave their segment and only add
GCT flow.
"""
import logging
from datetime import datetime, timezone
from typing import NamedTuple, Optional

import numpy as np

from ..errors import ConfigError
from ..topology import RoadTopology
from .models import FlowKind, FlowSeries, RecordTable, SyntheticConfig
from .pairing import aggregate_flows

logger = logging.getLogger(__name__)

MORNING_PEAK_HOUR = 8.0
EVENING_PEAK_HOUR = 18.0


class SyntheticDataset(NamedTuple):
    records: RecordTable
    gct: FlowSeries
    mob: FlowSeries


def route_orientation(topology: RoadTopology) -> np.ndarray:
    """+1 for routes heading straight at the city centre, -1 straight away."""
    if topology.num_routes == 0:
        return np.zeros(0)
    lat0, lon0 = topology.centroid()
    squash = np.cos(np.radians(lat0))
    xy = np.array([[s.latitude - lat0, (s.longitude - lon0) * squash] for s in topology.segments])
    radius = np.hypot(xy[:, 0], xy[:, 1])
    starts, ends = topology.route_starts, topology.route_ends
    length = np.hypot(*(xy[ends] - xy[starts]).T)
    return np.clip((radius[starts] - radius[ends]) / np.maximum(length, 1e-12), -1.0, 1.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _bump(hours: np.ndarray, center: float, width: float) -> np.ndarray:
    return np.exp(-0.5 * ((hours - center) / width) ** 2)


def daily_profiles(config: SyntheticConfig, orientation: np.ndarray, num_segments: int) -> tuple[np.ndarray, np.ndarray]:
    """Route profiles [M, T] and background profiles [N, T], each row with mean 1."""
    steps = config.num_steps
    if config.profile == "flat":
        return np.ones((len(orientation), steps)), np.ones((num_segments, steps))

    stamps = config.start_timestamp + config.interval * np.arange(steps) + config.interval // 2
    hours = (stamps % 86400) / 3600.0
    first = datetime.fromtimestamp(config.start_timestamp, tz=timezone.utc)
    days = (stamps - (config.start_timestamp - (config.start_timestamp % 86400))) // 86400
    weekday = (first.weekday() + days) % 7
    commute = np.where(weekday < 5, 1.0, config.weekend_factor)

    night = config.night_factor
    activity = night + (1 - night) * _sigmoid((hours - 6.5) / 0.75) * _sigmoid((23.5 - hours) / 0.75)
    morning = _bump(hours, MORNING_PEAK_HOUR, 1.0)
    evening = _bump(hours, EVENING_PEAK_HOUR, 1.25)
    amp = config.commute_amplitude

    morning_w = (0.6 + 0.4 * orientation)[:, None]
    evening_w = (0.6 - 0.4 * orientation)[:, None]
    routes = activity * (1 + amp * commute * (morning_w * morning + evening_w * evening))
    background = np.broadcast_to(
        activity * (1 + 0.6 * amp * commute * (morning + evening)), (num_segments, steps)
    )

    def unit_mean(x: np.ndarray) -> np.ndarray:
        return x / np.maximum(x.mean(axis=1, keepdims=True), 1e-12)

    return unit_mean(routes), unit_mean(np.array(background))


def _level_weights(rng: np.random.Generator, labels: list[str], dispersion: float, factors: dict) -> np.ndarray:
    weights = rng.lognormal(-0.5 * dispersion ** 2, dispersion, size=len(labels))
    for i, label in enumerate(labels):
        if label in factors:
            weights[i] = float(factors[label])
    unknown = set(factors) - set(labels)
    if unknown:
        raise ConfigError(f"level factors name unknown entities {sorted(unknown)}")
    return weights


def _sample_counts(rng: np.random.Generator, rate: np.ndarray, noise: float) -> np.ndarray:
    if noise == 0:
        return np.rint(rate).astype(np.int64)
    shape = 1.0 / noise ** 2
    return rng.poisson(rate * rng.gamma(shape, 1.0 / shape, size=rate.shape)).astype(np.int64)


def continuation_table(topology: RoadTopology) -> tuple[np.ndarray, np.ndarray]:
    """For route q = k->i, the routes i->j an agent may continue onto.

    j == k and any j with a direct route k->j are left out, which keeps the
    3-record trip from forming a pairing nobody drove.
    """
    allowed: list[list[int]] = []
    for route in topology.routes:
        k, i = route.start_segment, route.end_segment
        nxt = [
            r.id for r in topology.routes
            if r.start_segment == i and r.end_segment != k and topology.route_id(k, r.end_segment) is None
        ]
        allowed.append(nxt)
    width = max((len(a) for a in allowed), default=0)
    table = np.full((topology.num_routes, max(width, 1)), -1, dtype=np.int64)
    for q, nxt in enumerate(allowed):
        table[q, : len(nxt)] = nxt
    return table, np.array([len(a) for a in allowed], dtype=np.int64)


def _upstream_mean_matrix(topology: RoadTopology) -> np.ndarray:
    m = topology.num_routes
    mix = np.zeros((m, m))
    for r, ups in enumerate(topology.upstream_map):
        if ups:
            mix[r, list(ups)] = 1.0 / len(ups)
    return mix


def generate_synthetic(
    topology: RoadTopology,
    config: Optional[SyntheticConfig] = None,
    seed: int = 0,
) -> SyntheticDataset:
    config = config or SyntheticConfig()
    rng = np.random.default_rng(seed)
    n, m, steps = topology.num_segments, topology.num_routes, config.num_steps
    start = config.start_timestamp
    end = start + steps * config.interval
    starts, ends = topology.route_starts, topology.route_ends

    route_profile, bg_profile = daily_profiles(config, route_orientation(topology), n)
    route_w = _level_weights(rng, topology.route_labels(), config.level_dispersion, config.route_level_factors)
    seg_w = _level_weights(rng, topology.segment_labels(), config.level_dispersion, config.segment_level_factors)

    base = route_w[:, None] * route_profile
    lagged = base[:, np.maximum(np.arange(steps) - config.propagation_delay, 0)]
    direct_unit = base + config.upstream_coupling * (_upstream_mean_matrix(topology) @ lagged)

    allowed, n_allowed = continuation_table(topology)
    mean_direct = direct_unit.mean(axis=1)
    cont_unit = np.zeros(m)
    for q in range(m):
        if n_allowed[q]:
            np.add.at(cont_unit, allowed[q, : n_allowed[q]], config.continuation_prob * mean_direct[q] / n_allowed[q])
    total_unit = mean_direct + cont_unit
    scale = config.mobility_level / total_unit.mean() if m and total_unit.mean() > 0 else 0.0
    direct_rate = scale * direct_unit

    agent_records = np.bincount(starts, weights=scale * mean_direct, minlength=n) + np.bincount(
        ends, weights=scale * total_unit, minlength=n
    ) if m else np.zeros(n)
    background_total = config.gct_level * n - agent_records.sum()
    if background_total < 0:
        raise ConfigError(
            f"mobility_level {config.mobility_level} implies {agent_records.sum() / max(n, 1):.1f} "
            f"agent records per segment, above gct_level {config.gct_level}"
        )
    bg_level = seg_w / seg_w.sum() * background_total if seg_w.sum() > 0 else np.zeros(n)

    # Direct trips, one fresh user each.
    counts = _sample_counts(rng, direct_rate, config.noise) if m else np.zeros((0, steps), dtype=np.int64)
    cell = np.repeat(np.arange(m * steps, dtype=np.int64), counts.ravel())
    trips = len(cell)
    route_of, step_of = cell // steps, cell % steps
    t0 = start + step_of * config.interval + rng.integers(0, config.interval, trips)
    t1 = t0 + rng.integers(config.travel_time_min, config.travel_time_max + 1, trips)

    go = (n_allowed[route_of] > 0) & (rng.random(trips) < config.continuation_prob)
    pick = (rng.random(trips) * np.maximum(n_allowed[route_of], 1)).astype(np.int64)
    next_route = allowed[route_of, pick]
    t2 = t1 + rng.integers(config.travel_time_min, config.travel_time_max + 1, trips)

    mob_values = np.bincount(cell, minlength=m * steps)
    counted = go & (t1 < end)
    mob_values = mob_values + np.bincount(
        next_route[counted] * steps + (t1[counted] - start) // config.interval, minlength=m * steps
    )
    mob = FlowSeries(
        kind=FlowKind.MOBILITY,
        values=mob_values.reshape(m, steps).astype(np.int64),
        interval=config.interval,
        start_timestamp=start,
        labels=tuple(topology.route_labels()),
    )

    users = np.arange(trips, dtype=np.int64)
    rec_user = [users, users, users[go]]
    rec_time = [t0, t1, t2[go]]
    rec_seg = [starts[route_of], ends[route_of], ends[next_route[go]]]

    bg_counts = _sample_counts(rng, bg_level[:, None] * bg_profile, config.noise)
    if config.emit_background_records:
        bg_cell = np.repeat(np.arange(n * steps, dtype=np.int64), bg_counts.ravel())
        bg_seg, bg_step = bg_cell // steps, bg_cell % steps
        rec_user.append(trips + bg_seg * config.stationary_pool + rng.integers(0, config.stationary_pool, len(bg_cell)))
        rec_time.append(start + bg_step * config.interval + rng.integers(0, config.interval, len(bg_cell)))
        rec_seg.append(bg_seg)

    user = np.concatenate(rec_user).astype(np.int64)
    when = np.concatenate(rec_time).astype(np.int64)
    seg = np.concatenate(rec_seg).astype(np.int64)
    order = np.lexsort((seg, user, when))
    records = RecordTable(user=user[order], timestamp=when[order], segment=seg[order])

    gct = aggregate_flows(records, topology, config.interval, start, end, FlowKind.GCT)
    if not config.emit_background_records:
        gct = FlowSeries(
            kind=FlowKind.GCT,
            values=gct.values + bg_counts,
            interval=config.interval,
            start_timestamp=start,
            labels=gct.labels,
        )

    logger.info(
        "synthetic: %d steps, %d trips, %d records, mean gct %.1f, mean mobility %.1f",
        steps, trips, len(records), gct.values.mean(), mob.values.mean() if m else 0.0,
    )
    return SyntheticDataset(records=records, gct=gct, mob=mob)
