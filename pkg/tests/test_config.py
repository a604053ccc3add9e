import logging

import pytest
import torch

from telto.backbone import BackboneConfig
from telto.config import RunConfig, configure_logging, get_dtype, get_precision, load_run_config, set_precision
from telto.data import WindowConfig
from telto.errors import ConfigError
from telto.framework import AblationFlags


def test_round_trip(tmp_path):
    config = RunConfig(seed=4, window=WindowConfig(t_in=12), backbone=BackboneConfig(channels=16))
    config = config.override("framework", ablation=AblationFlags(no_enhance=True))
    loaded = load_run_config(config.save(tmp_path))
    assert loaded == config


def test_override_skips_none():
    config = RunConfig()
    assert config.override(seed=None) is config
    assert config.override("train", epochs=3, patience=None).train.patience == config.train.patience
    with pytest.raises(ConfigError):
        config.override("nowhere", x=1)
    with pytest.raises(ConfigError):
        config.override("window", t_in=0)


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_run_config(bad)
    bad.write_text('{"sead": 1}')
    with pytest.raises(ConfigError, match="unknown keys"):
        load_run_config(bad)


def test_precision(float64):
    assert get_precision() == "float64"
    assert get_dtype() is torch.float64
    assert torch.zeros(1).dtype is torch.float64
    with pytest.raises(ConfigError):
        set_precision("float16")


def test_logging_handlers_are_replaced(tmp_path):
    logger = configure_logging(logging.INFO, tmp_path / "a.log")
    configure_logging(logging.DEBUG, tmp_path / "b.log")
    ours = [h for h in logger.handlers if getattr(h, "_telto", False)]
    assert len(ours) == 2
    assert logger.level == logging.DEBUG
    logging.getLogger("telto.test").info("hello")
    for handler in ours:
        handler.flush()
    assert "hello" in (tmp_path / "b.log").read_text()
    assert "hello" not in (tmp_path / "a.log").read_text()
