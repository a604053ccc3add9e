"""With/without comparison and ablation runners over matched seeds."""
import logging
import time
from dataclasses import replace
from typing import Optional

import numpy as np

from ..backbone.models import BackboneConfig, TrainConfig
from ..backbone.training import TrainResult, predict_array, pretrain_stage1, route_inputs, train_route_backbone
from ..data.models import Splits, WindowedDataset
from ..errors import DataError, TeltoError
from ..framework.models import ABLATION_SETTINGS, FrameworkConfig
from ..framework.training import train_framework
from ..topology import RoadTopology
from .metrics import compute_metrics, improvement_ratio, mean_report
from .models import AblationRow, AblationTable, ComparisonReport, MetricsReport

logger = logging.getLogger(__name__)


def _score(result: TrainResult, inputs: np.ndarray, dataset: WindowedDataset, interval: int) -> MetricsReport:
    if len(dataset) == 0:
        raise DataError(f"{dataset.split} split is empty")
    started = time.perf_counter()
    pred = predict_array(result.model, result.normalizer.apply(inputs))
    logger.info("inference on %d %s windows took %.2fs", len(dataset), dataset.split, time.perf_counter() - started)
    return compute_metrics(pred, dataset.targets, interval)


def evaluate_framework(result: TrainResult, dataset: WindowedDataset, interval: int = 900) -> MetricsReport:
    return _score(result, dataset.inputs, dataset, interval)


def evaluate_baseline(
    result: TrainResult, dataset: WindowedDataset, topology: RoadTopology, interval: int = 900
) -> MetricsReport:
    return _score(result, route_inputs(dataset.inputs, topology), dataset, interval)


def run_comparison(
    splits: Splits,
    topology: RoadTopology,
    backbone_config: Optional[BackboneConfig] = None,
    framework_config: Optional[FrameworkConfig] = None,
    train_config: Optional[TrainConfig] = None,
    runs: int = 5,
    seed: int = 0,
    stage1: Optional[TrainResult] = None,
    interval: int = 900,
) -> ComparisonReport:
    """Train the bare backbone (w/o) and the framework (w) on the same seeds
    and report test metrics averaged over `runs`, with IRs on the means."""
    backbone_config = backbone_config or BackboneConfig()
    train_config = train_config or TrainConfig()
    seeds = tuple(seed + i for i in range(runs))
    without, with_ = [], []
    errors: dict[str, list[str]] = {}

    for s in seeds:
        tc = replace(train_config, seed=s)
        logger.info("comparison run seed=%d", s)
        try:
            baseline = train_route_backbone(splits, topology, backbone_config, tc)
            without.append(evaluate_baseline(baseline, splits.test, topology, interval))
        except TeltoError as e:
            logger.error("w/o arm failed for seed %d: %s", s, e)
            errors.setdefault("without", []).append(f"seed {s}: {e}")
        try:
            first = stage1 if stage1 is not None else pretrain_stage1(splits, topology, backbone_config, tc)
            framework = train_framework(first, splits, topology, framework_config, tc)
            with_.append(evaluate_framework(framework, splits.test, interval))
        except TeltoError as e:
            logger.error("w arm failed for seed %d: %s", s, e)
            errors.setdefault("with", []).append(f"seed {s}: {e}")

    mean_without = mean_report(without) if without else None
    mean_with = mean_report(with_) if with_ else None
    ir = {}
    if mean_without is not None and mean_with is not None:
        ir = improvement_ratio(mean_without, mean_with).ir
    report = ComparisonReport(mean_without, mean_with, ir, runs=runs, seeds=seeds, errors=errors)
    logger.info("comparison: overall MAE IR %s", report.overall_ir("mae"))
    return report


def run_ablations(
    splits: Splits,
    topology: RoadTopology,
    backbone_config: Optional[BackboneConfig] = None,
    framework_config: Optional[FrameworkConfig] = None,
    train_config: Optional[TrainConfig] = None,
    runs: int = 5,
    seed: int = 0,
    stage1: Optional[TrainResult] = None,
    interval: int = 900,
) -> AblationTable:
    """Four ablated settings plus the full framework, one row each.

    Each seed pretrains (or reuses) a single Stage 1 shared by every
    setting; a failing setting records its error without touching the rest.
    """
    backbone_config = backbone_config or BackboneConfig()
    framework_config = framework_config or FrameworkConfig()
    train_config = train_config or TrainConfig()
    seeds = tuple(seed + i for i in range(runs))
    reports: dict[str, list[MetricsReport]] = {label: [] for label, _ in ABLATION_SETTINGS}
    failures: dict[str, str] = {}

    for s in seeds:
        tc = replace(train_config, seed=s)
        first = stage1
        if first is None:
            try:
                first = pretrain_stage1(splits, topology, backbone_config, tc)
            except TeltoError as e:
                logger.error("stage1 pretraining failed for seed %d: %s", s, e)
        for label, flags in ABLATION_SETTINGS:
            if label in failures:
                continue
            try:
                if first is None and not flags.no_stage1_features:
                    raise TeltoError(f"no Stage-1 model for seed {s}")
                result = train_framework(first, splits, topology, framework_config, tc, ablation=flags)
                reports[label].append(evaluate_framework(result, splits.test, interval))
            except TeltoError as e:
                logger.error("ablation %r failed for seed %d: %s", label, s, e)
                failures[label] = f"seed {s}: {e}"

    rows = []
    for label, flags in ABLATION_SETTINGS:
        if label in failures:
            rows.append(AblationRow(label, flags, error=failures[label]))
        else:
            rows.append(AblationRow(label, flags, report=mean_report(reports[label])))
    return AblationTable(tuple(rows), runs=runs, seeds=seeds)
