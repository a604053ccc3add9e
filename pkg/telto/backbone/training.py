import copy
import hashlib
import logging
import math
import time
from typing import NamedTuple, Optional

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader, TensorDataset

from ..data.models import NormalizationStats, Splits
from ..data.windows import fit_normalizer
from ..errors import DataError, TrainingDivergedError
from ..topology import RoadTopology
from .models import BackboneConfig, EpochRecord, TrainConfig, TrainingLog
from .network import BackboneModel

logger = logging.getLogger(__name__)


class TrainResult(NamedTuple):
    model: nn.Module
    log: TrainingLog
    normalizer: NormalizationStats


def _tensor(x: np.ndarray, model: nn.Module) -> torch.Tensor:
    buffer = next(iter(model.buffers()), None)
    dtype = buffer.dtype if buffer is not None else torch.get_default_dtype()
    return torch.as_tensor(np.asarray(x), dtype=dtype)


def state_hash(model: nn.Module) -> str:
    """sha256 over the model's state tensors in name order."""
    digest = hashlib.sha256()
    for name, value in sorted(model.state_dict().items()):
        digest.update(name.encode("utf-8"))
        digest.update(value.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


@torch.no_grad()
def predict_array(model: nn.Module, inputs: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Run `model` over normalised inputs in eval mode; raw-unit numpy output."""
    model.eval()
    x = _tensor(inputs, model)
    if len(x) == 0:
        return np.zeros((0,), dtype=np.float64)
    out = [model(x[i : i + batch_size]) for i in range(0, len(x), batch_size)]
    return torch.cat(out).double().cpu().numpy()


def _mae(model: nn.Module, x: torch.Tensor, y: torch.Tensor, batch_size: int) -> float:
    if len(x) == 0:
        return float("nan")
    model.eval()
    total = 0.0
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            total += (model(x[i : i + batch_size]) - y[i : i + batch_size]).abs().sum().item()
    return total / y.numel()


def fit(
    model: nn.Module,
    train: tuple[np.ndarray, np.ndarray],
    valid: tuple[np.ndarray, np.ndarray],
    config: TrainConfig,
    stage: str,
) -> TrainingLog:
    """MAE training with Adam, gradient clipping and early stopping on valid MAE.

    Only parameters with requires_grad are optimised. The model is left
    holding its best-validation state.
    """
    x_train, y_train = _tensor(train[0], model), _tensor(train[1], model)
    x_valid, y_valid = _tensor(valid[0], model), _tensor(valid[1], model)
    if len(x_train) == 0:
        raise DataError(f"[{stage}] empty training set")

    params = [p for p in model.parameters() if p.requires_grad]
    frozen = sum(p.numel() for p in model.parameters() if not p.requires_grad)
    logger.info(
        "[%s] %d trainable / %d frozen parameters", stage, sum(p.numel() for p in params), frozen
    )
    optimizer = torch.optim.Adam(params, lr=config.learning_rate, weight_decay=config.weight_decay) if params else None
    generator = torch.Generator().manual_seed(config.seed)
    loader = DataLoader(
        TensorDataset(x_train, y_train), batch_size=config.batch_size, shuffle=True, generator=generator
    )

    log = TrainingLog(stage=stage)
    best_state = copy.deepcopy(model.state_dict())
    stale = 0
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        last_good = copy.deepcopy(model.state_dict())
        model.train()
        total = 0.0
        for xb, yb in loader:
            loss = (model(xb) - yb).abs().mean()
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"[{stage}] loss became {loss.item()} at epoch {epoch}", last_good_state=last_good, epoch=epoch
                )
            if optimizer is not None:
                optimizer.zero_grad()
                loss.backward()
                if config.clip_norm is not None:
                    nn.utils.clip_grad_norm_(params, config.clip_norm)
                optimizer.step()
            total += loss.item() * len(xb)
        train_mae = total / len(x_train)
        valid_mae = _mae(model, x_valid, y_valid, config.batch_size)
        score = valid_mae if math.isfinite(valid_mae) else train_mae
        log.epochs.append(EpochRecord(epoch, train_mae, valid_mae, time.perf_counter() - started))
        logger.info(
            "[%s] epoch %d/%d train_mae=%.4f valid_mae=%.4f", stage, epoch, config.epochs, train_mae, valid_mae
        )

        if score < log.best_valid_mae:
            log.best_valid_mae = score
            log.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if config.early_stopping and stale >= config.patience:
                log.stopped_early = True
                logger.info("[%s] early stop at epoch %d (best %d)", stage, epoch, log.best_epoch)
                break

    model.load_state_dict(best_state)
    logger.info(
        "[%s] done in %.1fs, best valid_mae=%.4f at epoch %d",
        stage, log.train_seconds, log.best_valid_mae, log.best_epoch,
    )
    return log


def pretrain_stage1(
    splits: Splits,
    topology: RoadTopology,
    config: Optional[BackboneConfig] = None,
    train_config: Optional[TrainConfig] = None,
    normalizer: Optional[NormalizationStats] = None,
) -> TrainResult:
    """Train the Stage-1 STGNN to forecast GCT flows from GCT flows."""
    config = config or BackboneConfig()
    train_config = train_config or TrainConfig()
    normalizer = normalizer or fit_normalizer(splits.train.inputs)
    torch.manual_seed(train_config.seed)
    model = BackboneModel(
        config,
        topology.segment_adjacency,
        in_channels=1,
        t_in=splits.train.t_in,
        horizon=splits.train.t_out,
        name="stage1",
        trained_on="gct",
    )
    model.set_output_scale(normalizer.mean, normalizer.std)
    log = fit(
        model,
        (normalizer.apply(splits.train.inputs), splits.train.gct_targets),
        (normalizer.apply(splits.valid.inputs), splits.valid.gct_targets),
        train_config,
        stage="stage1",
    )
    return TrainResult(model, log, normalizer)


def route_inputs(gct_inputs: np.ndarray, topology: RoadTopology) -> np.ndarray:
    """Each route gets its start segment's GCT window: [S, N, D] -> [S, M, D]."""
    return np.asarray(gct_inputs)[:, topology.route_starts, :]


def train_route_backbone(
    splits: Splits,
    topology: RoadTopology,
    config: Optional[BackboneConfig] = None,
    train_config: Optional[TrainConfig] = None,
    normalizer: Optional[NormalizationStats] = None,
) -> TrainResult:
    """The bare backbone on the route graph, fed start-segment GCT flows."""
    config = config or BackboneConfig()
    train_config = train_config or TrainConfig()
    normalizer = normalizer or fit_normalizer(splits.train.inputs)
    targets = fit_normalizer(splits.train.targets)
    torch.manual_seed(train_config.seed)
    model = BackboneModel(
        config,
        topology.route_adjacency,
        in_channels=1,
        t_in=splits.train.t_in,
        horizon=splits.train.t_out,
        name="baseline",
        trained_on="routes",
    )
    model.set_output_scale(targets.mean, targets.std)
    log = fit(
        model,
        (normalizer.apply(route_inputs(splits.train.inputs, topology)), splits.train.targets),
        (normalizer.apply(route_inputs(splits.valid.inputs, topology)), splits.valid.targets),
        train_config,
        stage="baseline",
    )
    return TrainResult(model, log, normalizer)
