import logging

import numpy as np
import pytest

from telto.analysis import describe, flow_relationship, histogram, pearson, upstream_correlation, weekly_profile
from telto.data import FlowKind, FlowSeries, SyntheticConfig, generate_synthetic
from telto.data.models import DEFAULT_START_TIMESTAMP
from telto.errors import ConfigError, DataError, TopologyError
from telto.topology import generate_topology

SPD = 96


def series(values, kind=FlowKind.MOBILITY, labels=()):
    return FlowSeries(kind=kind, values=np.asarray(values), interval=900, start_timestamp=DEFAULT_START_TIMESTAMP, labels=labels)


def test_describe():
    stats = describe(series([[1, 2, 3], [4, 5, 6]], labels=("0_1", "1_0")))
    assert stats.grand_mean == pytest.approx(3.5)
    assert stats.grand_std == pytest.approx(np.std([1, 2, 3, 4, 5, 6]))
    assert stats.max_entity == 1
    assert stats.max_entity_label == "1_0"
    assert stats.max_entity_mean == pytest.approx(5.0)
    assert (stats.sample_count, stats.entity_count) == (3, 2)


def test_histogram_counts():
    hist = histogram(series([[0, 0], [1, 1], [1, 1], [9, 9]]), bins=3)
    assert hist.counts.tolist() == [3, 0, 1]
    assert hist.edges[0] == 0 and hist.edges[-1] == 9
    assert hist.skewness > 0


def test_histogram_degenerate():
    single = histogram(series([[2, 4]]))
    assert single.counts.tolist() == [1]
    assert single.skewness is None
    flat = histogram(series([[3, 3], [3, 3], [3, 3]]))
    assert flat.skewness is None
    assert flat.counts.sum() == 3
    with pytest.raises(ConfigError):
        histogram(series([[1], [2]]), bins=1)


def test_pearson_properties(rng):
    x = rng.random(50)
    assert pearson(x, x) == pytest.approx(1.0)
    assert pearson(x, -x) == pytest.approx(-1.0)
    y = rng.random(50)
    assert pearson(3 * x + 7, 0.5 * y - 2) == pytest.approx(pearson(x, y))
    assert pearson(x, np.ones(50)) is None


def test_upstream_ordering(fig6_topology, rng):
    m = fig6_topology.num_routes
    base = 30 + rng.random(SPD) * 10
    day = np.zeros((m, 2 * SPD))
    focal = fig6_topology.route_id(5, 4)
    near = [fig6_topology.route_id(8, 5), fig6_topology.route_id(30, 5)]
    far = [fig6_topology.route_id(7, 8), fig6_topology.route_id(29, 30)]
    for d in range(2):
        day[focal, d * SPD : (d + 1) * SPD] = base
        for q in near:
            day[q, d * SPD : (d + 1) * SPD] = base + rng.normal(0, 1, SPD)
        for q in far:
            day[q, d * SPD : (d + 1) * SPD] = base + rng.normal(0, 6, SPD)
    day[fig6_topology.route_id(4, 5)] = rng.random(2 * SPD)
    radar = upstream_correlation(series(day), fig6_topology, focal, day_index=1, hops=2)
    assert {e.route for e in radar.entries if e.hops == 1} == set(near)
    assert {e.route for e in radar.entries if e.hops == 2} == set(far)
    assert radar.mean_r(1) > radar.mean_r(2) > 0
    assert radar.focal_label == "5_4"


def test_generated_city_upstream_ordering():
    topology = generate_topology(num_segments=34, num_routes=84, seed=0)
    config = SyntheticConfig(days=3, emit_background_records=False)
    majority = 0
    for seed in range(5):
        mob = generate_synthetic(topology, config, seed=seed).mob
        closer = total = 0
        for r in range(topology.num_routes):
            radar = upstream_correlation(mob, topology, r, day_index=2, hops=2)
            near, far = radar.mean_r(1), radar.mean_r(2)
            if near is None or far is None:
                continue
            total += 1
            closer += near > far
        assert total > 0
        majority += closer > total / 2
    assert majority >= 3


def test_upstream_undefined_r(fig6_topology, caplog):
    values = np.ones((fig6_topology.num_routes, SPD))
    with caplog.at_level(logging.WARNING):
        radar = upstream_correlation(series(values), fig6_topology, fig6_topology.route_id(5, 4), 0, hops=1)
    assert all(e.r is None for e in radar.entries)
    assert radar.mean_r(1) is None
    assert "r undefined" in caplog.text


def test_upstream_errors(fig6_topology):
    values = np.ones((fig6_topology.num_routes, SPD))
    with pytest.raises(ConfigError):
        upstream_correlation(series(values), fig6_topology, 0, 0, hops=3)
    with pytest.raises(TopologyError):
        upstream_correlation(series(values), fig6_topology, 99, 0)
    with pytest.raises(DataError):
        upstream_correlation(series(values), fig6_topology, 0, 1)


def test_weekly_profile_matches_loops(rng):
    steps = 14 * SPD + 10
    values = rng.integers(0, 30, (2, steps))
    profile = weekly_profile(series(values, labels=("a", "b")), "b")
    assert profile.entity == 1
    assert profile.values.shape == (7, SPD)
    assert profile.days_per_weekday.tolist() == [2] * 7
    # the series starts on a Sunday
    for day in range(14):
        weekday = (6 + day) % 7
        other = day + 7 if day < 7 else day - 7
        for slot in (0, 33, 95):
            expected = (values[1, day * SPD + slot] + values[1, other * SPD + slot]) / 2
            assert profile.values[weekday, slot] == pytest.approx(expected)
    assert profile.slot_hours()[4] == pytest.approx(1.0)


def test_weekly_profile_of_constant_series():
    profile = weekly_profile(series(np.full((1, 7 * SPD), 4)), 0)
    assert np.all(profile.values == 4.0)


def test_weekly_profile_needs_a_week():
    with pytest.raises(DataError, match="7 whole days"):
        weekly_profile(series(np.ones((1, 6 * SPD))), 0)


def test_flow_relationship(chain_topology):
    x = np.arange(20.0)
    gct = series(np.tile(x, (4, 1)), kind=FlowKind.GCT)
    mob = series(np.vstack([2 * x + 1, x, x, np.zeros(20)]))
    rel = flow_relationship(gct, mob, chain_topology, 0)
    assert rel.segment == 0
    assert rel.r == pytest.approx(1.0)
    assert rel.slope == pytest.approx(2.0)
    assert rel.intercept == pytest.approx(1.0)
    assert flow_relationship(gct, mob, chain_topology, 3).r is None
