import json
import math

import numpy as np
import pytest

from telto.backbone import BackboneConfig, TrainConfig
from telto.errors import ConfigError, DataError, ShapeError
from telto.evaluation import (
    ComparisonReport,
    HorizonMetrics,
    MetricsReport,
    ablation_markdown,
    comparison_markdown,
    compute_metrics,
    improvement_ratio,
    ir_value,
    mean_report,
    run_ablations,
    run_comparison,
    table_steps,
    write_report,
)
from telto.framework import ABLATION_SETTINGS, FrameworkConfig

SMALL = BackboneConfig(channels=4, end_channels=8, dropout=0.0)
TINY = FrameworkConfig(hidden=16, stage2=SMALL)
QUICK = TrainConfig(epochs=2, batch_size=32)

COLUMNS = ("15 min", "30 min", "60 min", "overall")

# (w/o, w) pairs for MAE, RMSE, MAPE per column, and the published IRs.
PUBLISHED = {
    "DMGCN": (
        [((3.99, 3.61), (7.21, 6.26), (39.9, 36.6)), ((4.05, 3.65), (7.38, 6.31), (40.7, 37.1)),
         ((4.39, 3.80), (8.35, 6.89), (42.7, 38.9)), ((4.14, 3.69), (7.65, 6.49), (41.1, 37.5))],
        [(9.5, 13.2, 8.3), (9.9, 14.5, 8.8), (13.4, 17.5, 8.9), (11.0, 15.2, 8.7)],
    ),
    "ESG": (
        [((3.87, 3.59), (6.63, 6.27), (39.7, 37.3)), ((4.01, 3.65), (7.28, 6.33), (41.1, 37.7)),
         ((4.21, 3.76), (7.89, 6.56), (43.2, 38.4)), ((4.03, 3.67), (7.27, 6.39), (41.3, 37.8))],
        [(7.2, 5.4, 6.0), (9.0, 13.1, 8.3), (10.7, 16.9, 11.1), (9.0, 12.1, 8.5)],
    ),
    "DGCRN": (
        [((3.86, 3.58), (7.09, 6.25), (39.4, 37.4)), ((3.92, 3.61), (7.22, 6.30), (39.9, 37.6)),
         ((4.10, 3.74), (7.69, 6.46), (42.2, 38.1)), ((3.96, 3.64), (7.33, 6.34), (40.5, 37.7))],
        [(7.3, 11.9, 5.1), (7.9, 12.7, 5.8), (8.8, 16.0, 9.7), (8.0, 13.6, 6.9)],
    ),
    "MFGM": (
        [((3.72, 3.45), (6.41, 5.69), (38.3, 34.7)), ((3.84, 3.54), (6.66, 5.89), (38.9, 34.9)),
         ((4.01, 3.69), (7.41, 6.41), (40.6, 36.2)), ((3.86, 3.56), (6.83, 6.00), (39.27, 35.29))],
        [(7.3, 11.2, 9.4), (7.8, 11.6, 10.2), (8.0, 13.5, 10.7), (7.68, 12.10, 10.11)],
    ),
}


def report_from(values: list[tuple[float, float, float]]) -> MetricsReport:
    """values per COLUMNS entry as (mae, rmse, mape)."""
    steps = (1, 2, 4)
    horizons = tuple(HorizonMetrics(s, s * 15.0, *values[i]) for i, s in enumerate(steps))
    return MetricsReport(horizons, HorizonMetrics(0, 0.0, *values[3]))


def test_hand_example():
    report = compute_metrics(np.array([1.0, 6.0]).reshape(2, 1, 1), np.array([2.0, 4.0]).reshape(2, 1, 1))
    h = report.horizon(1)
    assert h.mae == pytest.approx(1.5)
    assert h.rmse == pytest.approx(math.sqrt(2.5))
    assert h.mape == pytest.approx(50.0)
    assert report.overall.mae == pytest.approx(1.5)


def test_zero_targets_are_masked_for_mape():
    truth = np.array([0.0, 4.0]).reshape(2, 1, 1)
    pred = np.array([3.0, 2.0]).reshape(2, 1, 1)
    h = compute_metrics(pred, truth).horizon(1)
    assert h.mape == pytest.approx(50.0)
    assert h.masked == 1
    assert h.mae == pytest.approx(2.5)


def test_all_zero_targets(caplog):
    report = compute_metrics(np.ones((3, 2, 4)), np.zeros((3, 2, 4)))
    assert report.overall.mape is None
    assert "undefined" in caplog.text


@pytest.mark.parametrize("case", range(100))
def test_metrics_match_loops(case):
    rng = np.random.default_rng(case)
    s, m, d = rng.integers(1, 6), rng.integers(1, 5), rng.integers(1, 5)
    truth = rng.integers(0, 20, (s, m, d)).astype(float)
    pred = truth + rng.normal(0, 3, (s, m, d))
    report = compute_metrics(pred, truth)
    for step in range(d):
        errs, pcts = [], []
        for i in range(s):
            for j in range(m):
                e = pred[i, j, step] - truth[i, j, step]
                errs.append(e)
                if truth[i, j, step] != 0:
                    pcts.append(abs(e) / truth[i, j, step] * 100)
        h = report.horizon(step + 1)
        assert h.mae == pytest.approx(sum(abs(e) for e in errs) / len(errs))
        assert h.rmse == pytest.approx(math.sqrt(sum(e * e for e in errs) / len(errs)))
        if pcts:
            assert h.mape == pytest.approx(sum(pcts) / len(pcts))
        else:
            assert h.mape is None
        assert h.mae <= h.rmse + 1e-12
    assert report.overall.mae == pytest.approx(np.mean([h.mae for h in report.horizons]))


def test_metric_errors():
    with pytest.raises(ShapeError):
        compute_metrics(np.zeros((2, 3, 4)), np.zeros((2, 3, 3)))
    with pytest.raises(DataError):
        compute_metrics(np.zeros((0, 3, 4)), np.zeros((0, 3, 4)))
    with pytest.raises(DataError, match="negative"):
        compute_metrics(np.zeros((1, 1, 1)), -np.ones((1, 1, 1)))


@pytest.mark.parametrize("model", sorted(PUBLISHED))
def test_published_improvement_ratios(model):
    pairs, published = PUBLISHED[model]
    without = report_from([tuple(p[0] for p in col) for col in pairs])
    with_ = report_from([tuple(p[1] for p in col) for col in pairs])
    ir = improvement_ratio(without, with_).ir
    for i, column in enumerate(COLUMNS):
        for k, metric in enumerate(("mae", "rmse", "mape")):
            assert ir[metric][column] == pytest.approx(published[i][k], abs=0.15), (model, column, metric)


def test_ir_edge_cases():
    assert ir_value(4.0, 4.0) == 0.0
    assert ir_value(4.0, 5.0) == pytest.approx(-25.0)
    assert ir_value(0.0, 1.0) is None
    assert ir_value(None, 1.0) is None


def test_table_steps():
    assert table_steps(4, 900) == {"15 min": 1, "30 min": 2, "60 min": 4}
    assert table_steps(2, 900) == {"15 min": 1, "30 min": 2}
    assert table_steps(12, 300) == {"15 min": 3, "30 min": 6, "60 min": 12}


def test_horizon_labels():
    report = compute_metrics(np.ones((2, 1, 4)), np.ones((2, 1, 4)))
    assert list(report.by_label()) == ["15 min", "30 min", "45 min", "60 min", "overall"]
    assert MetricsReport.from_dict(json.loads(json.dumps(report.to_dict()))) == report


def test_mean_report():
    a = compute_metrics(np.full((2, 1, 2), 3.0), np.full((2, 1, 2), 2.0))
    b = compute_metrics(np.full((2, 1, 2), 5.0), np.full((2, 1, 2), 2.0))
    mean = mean_report([a, b])
    assert mean.overall.mae == pytest.approx(2.0)
    assert mean.horizon(2).mape == pytest.approx(100.0)


def test_comparison_markdown():
    pairs, _ = PUBLISHED["DMGCN"]
    report = improvement_ratio(
        report_from([tuple(p[0] for p in col) for col in pairs]),
        report_from([tuple(p[1] for p in col) for col in pairs]),
    )
    text = comparison_markdown(report, model="DMGCN")
    lines = text.splitlines()
    assert lines[0].startswith("| Model | 15 min MAE | 15 min RMSE | 15 min MAPE | 30 min MAE")
    assert lines[2].startswith("| DMGCN(w/o) | 3.99 | 7.21 | 39.9% |")
    assert lines[4].startswith("| IR | 9.5% |")


def test_failed_arm_is_marked():
    report = ComparisonReport(None, None)
    assert "failed" in comparison_markdown(report)


def test_comparison_smoke(tmp_path, micro_topology, micro_splits):
    report = run_comparison(micro_splits, micro_topology, SMALL, TINY, QUICK, runs=1, seed=0)
    assert report.errors == {}
    assert report.seeds == (0,)
    assert set(report.ir) == {"mae", "rmse", "mape"}
    assert report.overall_ir("mae") is not None
    paths = write_report(report, tmp_path, "comparison")
    assert json.loads(paths["json"].read_text())["runs"] == 1
    assert "STGNN(w)" in paths["md"].read_text()


def test_ablation_smoke(tmp_path, micro_topology, micro_splits):
    table = run_ablations(micro_splits, micro_topology, SMALL, TINY, QUICK, runs=1, seed=0)
    assert [r.label for r in table.rows] == [label for label, _ in ABLATION_SETTINGS]
    assert all(r.error is None and r.report is not None for r in table.rows)
    assert [r.baseline for r in table.rows] == [False] * 4 + [True]
    text = ablation_markdown(table)
    assert "| Full Framework * |" in text
    paths = write_report(table, tmp_path, "ablation")
    assert len(json.loads(paths["json"].read_text())["rows"]) == 5


def test_write_report_formats(tmp_path):
    report = compute_metrics(np.full((3, 2, 4), 2.0), np.full((3, 2, 4), 4.0))
    paths = write_report(report, tmp_path, "metrics", formats=("markdown",))
    assert set(paths) == {"md"}
    assert "| 15 min | 2.00 | 2.00 | 50.0% |" in paths["md"].read_text()
    assert not (tmp_path / "metrics.json").exists()
    assert set(write_report(report, tmp_path, "metrics")) == {"json", "csv", "md"}
    with pytest.raises(ConfigError):
        write_report(report, tmp_path, "metrics", formats=("yaml",))


def test_same_seed_same_report(micro_topology, micro_splits):
    first = run_comparison(micro_splits, micro_topology, SMALL, TINY, QUICK, runs=1, seed=7)
    second = run_comparison(micro_splits, micro_topology, SMALL, TINY, QUICK, runs=1, seed=7)
    assert first.to_dict() == second.to_dict()


@pytest.mark.slow
def test_full_framework_leads_the_ablations():
    from telto.data import SyntheticConfig, generate_synthetic, make_windows
    from telto.topology import generate_topology

    topology = generate_topology(num_segments=34, num_routes=84, seed=0)
    data = generate_synthetic(topology, SyntheticConfig(days=7, emit_background_records=False), seed=0)
    splits = make_windows(data.gct, data.mob)
    train = TrainConfig(epochs=30, patience=5)
    backbone = BackboneConfig(channels=16, end_channels=32)
    framework = FrameworkConfig(hidden=64, stage2=backbone)

    table = run_ablations(splits, topology, backbone, framework, train, runs=5, seed=0)
    full = table.row("Full Framework").report.overall.mae
    for row in table.rows[:-1]:
        assert full <= row.report.overall.mae * 1.02, row.label

    comparison = run_comparison(splits, topology, backbone, framework, train, runs=5, seed=0)
    assert comparison.overall_ir("mae") > 0
