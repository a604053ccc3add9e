import json

import pandas as pd
import pytest

from telto.backbone import BackboneConfig, TrainConfig
from telto.cli import build_parser, main, resolve_config
from telto.config import RunConfig, load_run_config
from telto.data import SyntheticConfig
from telto.framework import FrameworkConfig

SMALL = BackboneConfig(channels=4, end_channels=8, dropout=0.0)


@pytest.fixture
def tiny_config(tmp_path):
    config = RunConfig(
        runs=1,
        num_segments=6,
        num_routes=10,
        synthetic=SyntheticConfig(days=2),
        backbone=SMALL,
        framework=FrameworkConfig(hidden=16, stage2=SMALL),
        train=TrainConfig(epochs=1, batch_size=32),
    )
    return config.save(tmp_path / "config")


@pytest.fixture
def generated(tmp_path, tiny_config):
    out = tmp_path / "run"
    assert main(["generate", "-o", str(out), "--config", str(tiny_config)]) == 0
    return out


def run(command, out, config, *extra):
    return main([command, "-o", str(out), "--config", str(config), "--data", str(out), *extra])


def test_generate_writes_dataset(generated):
    for name in ("topology.json", "gct.csv", "mobility.csv", "records.csv", "run_config.json", "telto.log"):
        assert (generated / name).exists(), name
    gct = pd.read_csv(generated / "gct.csv")
    mob = pd.read_csv(generated / "mobility.csv")
    assert gct.shape == (192, 7)
    assert mob.shape == (192, 11)
    assert json.loads((generated / "synthetic_config.json").read_text())["days"] == 2


def test_generate_from_records(tmp_path, generated, tiny_config):
    out = tmp_path / "paired"
    code = main([
        "generate", "-o", str(out), "--config", str(tiny_config),
        "--topology", str(generated / "topology.json"), "--records", str(generated / "records.csv"),
    ])
    assert code == 0
    assert pd.read_csv(out / "mobility.csv").drop(columns="timestamp").to_numpy().sum() > 0


def test_pipeline(generated, tiny_config):
    assert run("pretrain", generated, tiny_config) == 0
    assert (generated / "stage1.pt").exists()
    assert json.loads((generated / "stage1_log.json").read_text())["stage"] == "stage1"
    assert run("train", generated, tiny_config) == 0
    assert (generated / "framework.pt").exists()
    assert run("evaluate", generated, tiny_config) == 0
    metrics = json.loads((generated / "metrics.json").read_text())
    assert len(metrics["horizons"]) == 4

    code = main([
        "predict", "-o", str(generated),
        "--checkpoint", str(generated / "framework.pt"),
        "--topology", str(generated / "topology.json"),
        "--gct", str(generated / "gct.csv"),
    ])
    assert code == 0
    pred = pd.read_csv(generated / "predictions.csv")
    assert pred.shape == ((192 - 8 + 1) * 4, 3 + 10)
    assert pred["step"].max() == 4
    assert "[stage1] epoch 1/1" in (generated / "telto.log").read_text()


def test_train_after_float64_pretrain(generated, tiny_config):
    assert run("pretrain", generated, tiny_config, "--precision", "float64") == 0
    assert run("train", generated, tiny_config) == 0
    assert run("evaluate", generated, tiny_config) == 0
    assert "casting to torch.float32" in (generated / "telto.log").read_text()


def test_train_ablated_setting(generated, tiny_config):
    assert run("train", generated, tiny_config, "--ablation", "no_stage1_features") == 0
    saved = load_run_config(generated / "run_config.json")
    assert saved.framework.ablation.no_stage1_features


def test_ablate(generated, tiny_config):
    assert run("ablate", generated, tiny_config) == 0
    table = json.loads((generated / "ablation.json").read_text())
    assert [r["setting"] for r in table["rows"]][-1] == "Full Framework"
    assert len(table["rows"]) == 5
    assert "Full Framework *" in (generated / "ablation.md").read_text()


def test_compare(generated, tiny_config):
    assert run("compare", generated, tiny_config) == 0
    report = json.loads((generated / "comparison.json").read_text())
    assert report["errors"] == {}
    assert set(report["ir"]) == {"mae", "rmse", "mape"}


def test_analyze(generated, tiny_config):
    assert run("analyze", generated, tiny_config, "--stats", "--hist", "5", "--radar", "0", "--relationship", "0") == 0
    assert (generated / "stats.json").exists()
    assert len(pd.read_csv(generated / "hist_mobility.csv")) == 5
    assert run("analyze", generated, tiny_config) == 1
    assert run("analyze", generated, tiny_config, "--weekly", "0") == 1


def test_usage_error():
    assert main(["bogus"]) == 2
    assert main([]) == 2


def test_missing_data(tmp_path):
    assert main(["pretrain", "-o", str(tmp_path / "out"), "--data", str(tmp_path / "missing")]) == 1
    assert main(["pretrain", "-o", str(tmp_path / "out")]) == 1


def test_show_config(tmp_path, capsys):
    assert main(["generate", "-o", str(tmp_path), "--days", "3", "--show-config"]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["days"] == 3
    assert not (tmp_path / "gct.csv").exists()


def test_flags_override_config(tiny_config):
    args = build_parser().parse_args(
        ["pretrain", "--config", str(tiny_config), "--epochs", "7", "--channels", "6", "--seed", "3", "--t-in", "12"]
    )
    config = resolve_config(args)
    assert config.train.epochs == 7
    assert config.train.seed == 3
    assert config.seed == 3
    assert config.backbone.channels == 6
    assert config.framework.stage2.channels == 6
    assert config.window.t_in == 12
    assert config.train.batch_size == 32


def test_evaluate_markdown_only(generated, tiny_config):
    assert run("pretrain", generated, tiny_config) == 0
    assert run("train", generated, tiny_config) == 0
    assert run("evaluate", generated, tiny_config, "--format", "markdown") == 0
    assert (generated / "metrics.md").read_text().startswith("| Horizon |")
    assert not (generated / "metrics.json").exists()
    assert not (generated / "metrics.csv").exists()
    assert run("evaluate", generated, tiny_config, "--format", "yaml") == 2


def test_help_lists_experiment_defaults(capsys):
    assert main(["train", "--help"]) == 0
    text = " ".join(capsys.readouterr().out.split())
    assert "70/20/10" in text
    assert "180 epochs" in text
    assert "default 1e-3" in text
