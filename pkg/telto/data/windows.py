import logging
import math
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, DataError
from .models import (
    DEFAULT_SPLIT_RATIOS,
    DEFAULT_T_IN,
    DEFAULT_T_OUT,
    FlowKind,
    FlowSeries,
    NormalizationStats,
    Splits,
    WindowedDataset,
)

logger = logging.getLogger(__name__)


def split_sizes(num_samples: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    """(train, test, valid) sizes; train and test are floored, valid takes the rest."""
    if len(ratios) != 3:
        raise ConfigError(f"expected three split ratios (train, test, valid), got {len(ratios)}")
    if any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ConfigError(f"split ratios must be non-negative and sum to 1, got {tuple(ratios)}")
    train = int(math.floor(num_samples * ratios[0]))
    test = int(math.floor(num_samples * ratios[1]))
    return train, test, num_samples - train - test


def make_windows(
    gct: FlowSeries,
    mob: FlowSeries,
    t_in: int = DEFAULT_T_IN,
    t_out: int = DEFAULT_T_OUT,
    ratios: Sequence[float] = DEFAULT_SPLIT_RATIOS,
) -> Splits:
    """Stride-1 windows of t_in GCT steps followed by t_out mobility steps,
    split chronologically into train, test and valid in that order."""
    if gct.kind is not FlowKind.GCT or mob.kind is not FlowKind.MOBILITY:
        raise DataError("make_windows expects a GCT series and a mobility series")
    if t_in < 1 or t_out < 1:
        raise ConfigError(f"t_in and t_out must be >= 1, got {t_in}, {t_out}")
    if (gct.interval, gct.start_timestamp, gct.num_steps) != (mob.interval, mob.start_timestamp, mob.num_steps):
        raise DataError("GCT and mobility series must share interval, start and length")
    span = t_in + t_out
    if gct.num_steps < span:
        raise DataError(f"series has {gct.num_steps} steps, need at least {span}")
    train_n, test_n, _ = split_sizes(gct.num_steps - span + 1, ratios)

    gct_win = sliding_window_view(np.asarray(gct.values, dtype=np.float64), span, axis=1).transpose(1, 0, 2)
    mob_win = sliding_window_view(np.asarray(mob.values, dtype=np.float64), span, axis=1).transpose(1, 0, 2)
    offsets = np.arange(gct_win.shape[0], dtype=np.int64)

    def take(lo: int, hi: int, name: str) -> WindowedDataset:
        return WindowedDataset(
            inputs=np.ascontiguousarray(gct_win[lo:hi, :, :t_in]),
            targets=np.ascontiguousarray(mob_win[lo:hi, :, t_in:]),
            gct_targets=np.ascontiguousarray(gct_win[lo:hi, :, t_in:]),
            offsets=offsets[lo:hi],
            t_in=t_in,
            t_out=t_out,
            split=name,
        )

    total = gct_win.shape[0]
    splits = Splits(
        train=take(0, train_n, "train"),
        test=take(train_n, train_n + test_n, "test"),
        valid=take(train_n + test_n, total, "valid"),
    )
    logger.info(
        "windows: %d samples -> train %d / test %d / valid %d",
        total, len(splits.train), len(splits.test), len(splits.valid),
    )
    return splits


def fit_normalizer(train_inputs: np.ndarray, per_entity: bool = False) -> NormalizationStats:
    """Population mean/std of the training inputs; a zero std is clamped to 1.

    Per-entity stats reduce over every axis except the entity axis, which is
    the second-to-last one ([samples, entities, steps]).
    """
    x = np.asarray(train_inputs, dtype=np.float64)
    if x.size == 0:
        raise DataError("cannot fit a normalizer on empty input")
    if per_entity:
        if x.ndim < 2:
            raise DataError("per-entity normalization needs an entity axis")
        axes = tuple(i for i in range(x.ndim) if i != x.ndim - 2)
        mean = x.mean(axis=axes)[:, None]
        std = x.std(axis=axes)[:, None]
        flat = std <= 0
        if flat.any():
            logger.warning("std is zero for %d entities; clamping to 1", int(flat.sum()))
            std = np.where(flat, 1.0, std)
    else:
        mean = np.asarray(x.mean())
        std = np.asarray(x.std())
        if std <= 0:
            logger.warning("training data has zero std; clamping to 1")
            std = np.asarray(1.0)
    return NormalizationStats(mean=mean, std=std, per_entity=per_entity)
