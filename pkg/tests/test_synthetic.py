import numpy as np
import pytest

from telto.data import (
    FlowKind,
    SyntheticConfig,
    aggregate_flows,
    generate_synthetic,
    pair_records,
    route_orientation,
)
from telto.data.synthetic import continuation_table, daily_profiles
from telto.errors import ConfigError
from telto.topology import generate_topology


def test_same_seed_same_data(micro_topology, micro_config):
    a = generate_synthetic(micro_topology, micro_config, seed=5)
    b = generate_synthetic(micro_topology, micro_config, seed=5)
    assert a.gct == b.gct
    assert a.mob == b.mob
    assert np.array_equal(a.records.user, b.records.user)
    c = generate_synthetic(micro_topology, micro_config, seed=6)
    assert c.mob != a.mob


@pytest.mark.parametrize("seed", range(10))
def test_mobility_is_what_pairing_recovers(micro_topology, seed):
    config = SyntheticConfig(days=1, gct_level=40.0, mobility_level=6.0, noise=0.3)
    data = generate_synthetic(micro_topology, config, seed=seed)
    assert data.records.is_sorted()
    pairs = pair_records(data.records, micro_topology, config.pairing_window)
    recovered = aggregate_flows(
        pairs, micro_topology, config.interval, data.mob.start_timestamp, data.mob.end_timestamp, FlowKind.MOBILITY
    )
    assert recovered == data.mob
    gct = aggregate_flows(
        data.records, micro_topology, config.interval, data.gct.start_timestamp, data.gct.end_timestamp
    )
    assert gct == data.gct


def test_background_only_city(micro_topology):
    config = SyntheticConfig(days=1, mobility_level=0.0, noise=0.0, profile="flat", level_dispersion=0.0, gct_level=10.0)
    data = generate_synthetic(micro_topology, config, seed=0)
    assert not data.mob.values.any()
    assert np.all(data.gct.values == 10)


def test_hidden_background_keeps_gct(micro_topology):
    config = SyntheticConfig(days=1, emit_background_records=False, noise=0.0, profile="flat", level_dispersion=0.0)
    data = generate_synthetic(micro_topology, config, seed=1)
    recorded = aggregate_flows(
        data.records, micro_topology, config.interval, data.gct.start_timestamp, data.gct.end_timestamp
    )
    assert np.all(data.gct.values >= recorded.values)
    assert data.gct.values.sum() > recorded.values.sum()


@pytest.mark.slow
def test_calibrated_levels():
    topology = generate_topology(num_segments=34, num_routes=84, seed=0)
    config = SyntheticConfig(emit_background_records=False)
    data = generate_synthetic(topology, config, seed=0)
    assert data.gct.values.shape == (34, 2976)
    assert data.mob.values.shape == (84, 2976)
    assert data.gct.values.mean() == pytest.approx(159.9, rel=0.1)
    assert data.mob.values.mean() == pytest.approx(12.9, rel=0.1)


def test_route_levels_are_right_skewed():
    from scipy.stats import skew

    topology = generate_topology(num_segments=34, num_routes=84, seed=0)
    config = SyntheticConfig(days=3, emit_background_records=False)
    data = generate_synthetic(topology, config, seed=2)
    assert skew(data.mob.values.mean(axis=1)) > 0


def test_inbound_route_peaks_in_the_morning():
    config = SyntheticConfig(days=7)
    orientation = np.array([1.0, -1.0])
    routes, background = daily_profiles(config, orientation, 3)
    assert routes.shape == (2, config.num_steps)
    assert np.allclose(routes.mean(axis=1), 1.0)
    assert np.allclose(background.mean(axis=1), 1.0)
    per_day = 86400 // config.interval
    # the default start is a Sunday, so day 1 is a Monday
    monday = routes[:, per_day : 2 * per_day]
    morning, evening = monday[:, 8 * 4], monday[:, 18 * 4]
    assert morning[0] > evening[0]
    assert evening[1] > morning[1]
    sunday = routes[:, :per_day]
    assert sunday[0, 8 * 4] < monday[0, 8 * 4]


def test_orientation_range(micro_topology):
    o = route_orientation(micro_topology)
    assert o.shape == (micro_topology.num_routes,)
    assert np.all(np.abs(o) <= 1.0)


def test_continuations_never_shortcut(micro_topology):
    allowed, count = continuation_table(micro_topology)
    for q, route in enumerate(micro_topology.routes):
        for r in allowed[q, : count[q]]:
            nxt = micro_topology.routes[r]
            assert nxt.start_segment == route.end_segment
            assert nxt.end_segment != route.start_segment
            assert micro_topology.route_id(route.start_segment, nxt.end_segment) is None
        assert np.all(allowed[q, count[q] :] == -1)


def test_level_factors(micro_topology):
    label = micro_topology.route_labels()[0]
    config = SyntheticConfig(
        days=1,
        noise=0.0,
        profile="flat",
        route_level_factors={label: 0.0},
        upstream_coupling=0.0,
        continuation_prob=0.0,
    )
    data = generate_synthetic(micro_topology, config, seed=0)
    assert not data.mob.values[0].any()
    with pytest.raises(ConfigError, match="unknown"):
        generate_synthetic(micro_topology, SyntheticConfig(days=1, route_level_factors={"99_98": 2.0}))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"days": 0},
        {"noise": -0.1},
        {"travel_time_max": 1000},
        {"profile": "rush"},
        {"interval": 7},
        {"continuation_prob": 1.5},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        SyntheticConfig(**kwargs)


def test_mobility_above_gct_is_rejected(micro_topology):
    with pytest.raises(ConfigError, match="gct_level"):
        generate_synthetic(micro_topology, SyntheticConfig(days=1, gct_level=1.0, mobility_level=50.0))


def test_config_dict_round_trip():
    config = SyntheticConfig(days=3, route_level_factors={"0_1": 2.0})
    assert SyntheticConfig.from_dict(config.to_dict()) == config
    with pytest.raises(ConfigError):
        SyntheticConfig.from_dict({"dayz": 3})
