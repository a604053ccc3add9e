import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd
from rich.console import Console

from .analysis import describe, flow_relationship, histogram, upstream_correlation, weekly_profile
from .backbone import load_backbone, predict_array, pretrain_stage1, save_backbone
from .config import RunConfig, configure_logging, load_run_config, set_precision
from .data import (
    FlowKind,
    aggregate_flows,
    generate_synthetic,
    load_flows,
    load_records,
    make_windows,
    pair_records,
    save_flows,
    save_records,
)
from .errors import ConfigError, DataError, TeltoError
from .evaluation import REPORT_FORMATS, evaluate_framework, run_ablations, run_comparison, write_report
from .framework import AblationFlags, load_framework, save_framework, train_framework
from .topology import generate_topology, load_topology, save_topology

logger = logging.getLogger("telto.cli")
console = Console()

COMMANDS = [
    ("generate", "Build flow series: synthesize a city, or pair and aggregate a records CSV"),
    ("pretrain", "Pretrain the Stage-1 STGNN on GCT flows"),
    ("train", "Train the framework with Stage 1 frozen"),
    ("evaluate", "Score a framework checkpoint on the test split"),
    ("compare", "Bare backbone (w/o) versus framework (w), with improvement ratios"),
    ("ablate", "Four ablated settings plus the full framework"),
    ("analyze", "Descriptive statistics, histograms, correlations and weekly profiles"),
    ("predict", "Forecast route mobility from a GCT flows CSV"),
]

TOPOLOGY_FILE = "topology.json"
GCT_FILE = "gct.csv"
MOBILITY_FILE = "mobility.csv"
RECORDS_FILE = "records.csv"
STAGE1_FILE = "stage1.pt"
FRAMEWORK_FILE = "framework.pt"

EXPERIMENT_DEFAULTS = (
    "Defaults reproduce the reference experimental setup: 15-minute intervals, 8 input and 4 output steps, "
    "a 70/20/10 chronological train/test/valid split, Adam at 1e-3 for up to 180 epochs with early stopping "
    "(patience 20) on validation MAE, and 5 matched-seed runs per comparison."
)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-o", "--output", help="output directory (default runs/latest)")
    parser.add_argument("--config", help="RunConfig JSON; flags override it")
    parser.add_argument("--seed", type=int, help="random seed (default 0)")
    parser.add_argument("--precision", choices=["float32", "float64"], help="tensor precision (default float32)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def _data(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help=f"directory holding {TOPOLOGY_FILE}, {GCT_FILE} and {MOBILITY_FILE}")


def _training(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, help="max epochs (default 180, early stopping on)")
    parser.add_argument("--patience", type=int, help="early-stopping patience (default 20)")
    parser.add_argument("--lr", type=float, help="Adam learning rate (default 1e-3)")
    parser.add_argument("--batch-size", type=int, help="batch size (default 64)")
    parser.add_argument("--channels", type=int, help="STGNN channels C (default 32)")
    parser.add_argument("--t-in", type=int, help="input steps (default 8)")
    parser.add_argument("--t-out", type=int, help="forecast steps (default 4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telto",
        description="Forecast directional route mobility flows from cellular (GCT) flows.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        epilog=EXPERIMENT_DEFAULTS,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    parsers = {
        name: sub.add_parser(name, help=text, description=text, epilog=EXPERIMENT_DEFAULTS) for name, text in COMMANDS
    }
    for p in parsers.values():
        _common(p)

    g = parsers["generate"]
    g.add_argument("--days", type=int, help="days to simulate (default 31, i.e. 2976 steps at 15 min)")
    g.add_argument("--segments", type=int, help="segments N of a generated topology (default 34)")
    g.add_argument("--routes", type=int, help="routes M of a generated topology (default 84)")
    g.add_argument("--noise", type=float, help="overdispersion of counts (default 0.2)")
    g.add_argument("--topology", help="use this topology JSON instead of generating one")
    g.add_argument("--records", help="pair and aggregate this records CSV instead of simulating")
    g.add_argument("--no-records", action="store_true", help="do not write the simulated records CSV")
    g.add_argument("--show-config", action="store_true", help="print the resolved generator config and exit")

    for name in ("pretrain", "train", "evaluate", "compare", "ablate", "analyze"):
        _data(parsers[name])
    for name in ("pretrain", "train", "compare", "ablate"):
        _training(parsers[name])
    for name in ("evaluate", "compare", "ablate"):
        parsers[name].add_argument(
            "--format",
            choices=["all", *REPORT_FORMATS],
            action="append",
            help="report format to write (repeatable; default all)",
        )
    for name in ("compare", "ablate"):
        parsers[name].add_argument("--runs", type=int, help="matched-seed repetitions (default 5)")
    parsers["train"].add_argument("--stage1", help=f"Stage-1 checkpoint (default <output>/{STAGE1_FILE})")
    parsers["train"].add_argument(
        "--ablation",
        choices=["no_stage1_features", "no_transform", "no_enhance", "no_stage2"],
        action="append",
        help="train an ablated setting (repeatable)",
    )
    parsers["evaluate"].add_argument("--checkpoint", help=f"framework checkpoint (default <output>/{FRAMEWORK_FILE})")

    a = parsers["analyze"]
    a.add_argument("--stats", action="store_true", help="descriptive statistics of both series")
    a.add_argument("--hist", type=int, nargs="?", const=10, metavar="BINS", help="per-entity mean histogram")
    a.add_argument("--radar", metavar="ROUTE", help="upstream correlation of a route (id or start_end)")
    a.add_argument("--day", type=int, default=0, help="day index for --radar")
    a.add_argument("--weekly", metavar="ENTITY", help="weekly profile of an entity (id or label)")
    a.add_argument("--kind", choices=["gct", "mobility"], default="mobility", help="series for --hist/--weekly")
    a.add_argument("--relationship", metavar="ROUTE", help="route mobility against its start-segment GCT")

    p = parsers["predict"]
    p.add_argument("--checkpoint", required=True, help="framework checkpoint")
    p.add_argument("--topology", required=True, help="topology JSON the checkpoint was trained on")
    p.add_argument("--gct", required=True, help="GCT flows CSV")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_run_config(args.config) if args.config else RunConfig()
    config = config.override(output=args.output, seed=args.seed, precision=args.precision)
    config = config.override(data_dir=getattr(args, "data", None), runs=getattr(args, "runs", None))
    config = config.override(
        "train",
        epochs=getattr(args, "epochs", None),
        patience=getattr(args, "patience", None),
        learning_rate=getattr(args, "lr", None),
        batch_size=getattr(args, "batch_size", None),
        seed=args.seed,
    )
    channels = getattr(args, "channels", None)
    config = config.override("backbone", channels=channels)
    if channels is not None:
        config = config.override("framework", stage2=config.backbone)
    config = config.override("window", t_in=getattr(args, "t_in", None), t_out=getattr(args, "t_out", None))
    if args.command == "generate":
        config = config.override(
            topology=args.topology, num_segments=args.segments, num_routes=args.routes
        )
        config = config.override("synthetic", days=args.days, noise=args.noise)
    if args.command == "train" and args.ablation:
        flags = {name: True for name in args.ablation}
        config = config.override("framework", ablation=AblationFlags(**flags))
    return config


def _load_data(config: RunConfig):
    if not config.data_dir:
        raise ConfigError("no data directory; pass --data or set data_dir in the config")
    data = Path(config.data_dir)
    topology = load_topology(data / TOPOLOGY_FILE)
    gct = load_flows(data / GCT_FILE, FlowKind.GCT, topology)
    mob = load_flows(data / MOBILITY_FILE, FlowKind.MOBILITY, topology)
    return topology, gct, mob


def _splits(config: RunConfig, gct, mob):
    return make_windows(gct, mob, config.window.t_in, config.window.t_out, config.window.ratios)


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2))


def _formats(args: argparse.Namespace) -> tuple[str, ...]:
    chosen = args.format or ["all"]
    return REPORT_FORMATS if "all" in chosen else tuple(dict.fromkeys(chosen))


def cmd_generate(args, config: RunConfig, out: Path) -> int:
    if args.show_config:
        console.print_json(json.dumps(config.synthetic.to_dict()))
        return 0
    if config.topology:
        topology = load_topology(config.topology)
    else:
        topology = generate_topology(config.num_segments, config.num_routes, seed=config.seed)
    save_topology(topology, out / TOPOLOGY_FILE)

    if args.records:
        records = load_records(args.records, topology)
        if len(records) == 0:
            raise DataError(f"{args.records}: no usable records")
        interval = config.synthetic.interval
        start = int(records.timestamp[0]) // interval * interval
        end = (int(records.timestamp[-1]) // interval + 1) * interval
        pairings = pair_records(records, topology, config.synthetic.pairing_window)
        gct = aggregate_flows(records, topology, interval, start, end, FlowKind.GCT)
        mob = aggregate_flows(pairings, topology, interval, start, end, FlowKind.MOBILITY)
        logger.info("%d records -> %d pairings over %d steps", len(records), len(pairings), gct.num_steps)
    else:
        dataset = generate_synthetic(topology, config.synthetic, seed=config.seed)
        gct, mob = dataset.gct, dataset.mob
        _write_json(config.synthetic.to_dict(), out / "synthetic_config.json")
        if not args.no_records:
            save_records(dataset.records, out / RECORDS_FILE)
    save_flows(gct, out / GCT_FILE)
    save_flows(mob, out / MOBILITY_FILE)
    console.print(f"wrote N={topology.num_segments} M={topology.num_routes} T={gct.num_steps} to {out}")
    return 0


def cmd_pretrain(args, config: RunConfig, out: Path) -> int:
    topology, gct, mob = _load_data(config)
    result = pretrain_stage1(_splits(config, gct, mob), topology, config.backbone, config.train)
    save_backbone(result, topology, out / STAGE1_FILE)
    _write_json(result.log.to_dict(), out / "stage1_log.json")
    return 0


def cmd_train(args, config: RunConfig, out: Path) -> int:
    topology, gct, mob = _load_data(config)
    splits = _splits(config, gct, mob)
    stage1 = None
    if not config.framework.ablation.no_stage1_features:
        stage1 = load_backbone(args.stage1 or out / STAGE1_FILE, topology)
    result = train_framework(stage1, splits, topology, config.framework, config.train)
    save_framework(result, topology, out / FRAMEWORK_FILE, stage1)
    _write_json(result.log.to_dict(), out / "framework_log.json")
    return 0


def cmd_evaluate(args, config: RunConfig, out: Path) -> int:
    topology, gct, mob = _load_data(config)
    splits = _splits(config, gct, mob)
    result, _ = load_framework(args.checkpoint or out / FRAMEWORK_FILE, topology)
    report = evaluate_framework(result, splits.test, gct.interval)
    write_report(report, out, "metrics", console, _formats(args))
    return 0


def cmd_compare(args, config: RunConfig, out: Path) -> int:
    topology, gct, mob = _load_data(config)
    report = run_comparison(
        _splits(config, gct, mob), topology, config.backbone, config.framework, config.train,
        runs=config.runs, seed=config.seed, interval=gct.interval,
    )
    write_report(report, out, "comparison", console, _formats(args))
    return 0 if report.with_ is not None and report.without is not None else 1


def cmd_ablate(args, config: RunConfig, out: Path) -> int:
    topology, gct, mob = _load_data(config)
    table = run_ablations(
        _splits(config, gct, mob), topology, config.backbone, config.framework, config.train,
        runs=config.runs, seed=config.seed, interval=gct.interval,
    )
    write_report(table, out, "ablation", console, _formats(args))
    return 0


def cmd_analyze(args, config: RunConfig, out: Path) -> int:
    topology, gct, mob = _load_data(config)
    chosen = mob if args.kind == "mobility" else gct
    did = False
    if args.stats:
        payload = {"gct": describe(gct).to_dict(), "mobility": describe(mob).to_dict()}
        _write_json(payload, out / "stats.json")
        pd.DataFrame(payload.values()).to_csv(out / "stats.csv", index=False)
        console.print_json(json.dumps(payload))
        did = True
    if args.hist is not None:
        hist = histogram(chosen, args.hist)
        _write_json(hist.to_dict(), out / f"hist_{args.kind}.json")
        pd.DataFrame({"left": hist.edges[:-1], "right": hist.edges[1:], "count": hist.counts}).to_csv(
            out / f"hist_{args.kind}.csv", index=False
        )
        console.print(f"{args.kind} histogram counts {hist.counts.tolist()}, skewness {hist.skewness}")
        did = True
    if args.radar is not None:
        radar = upstream_correlation(mob, topology, topology.parse_route(args.radar), args.day)
        _write_json(radar.to_dict(), out / f"radar_{radar.focal_label}_day{args.day}.json")
        pd.DataFrame([e.__dict__ for e in radar.entries]).to_csv(
            out / f"radar_{radar.focal_label}_day{args.day}.csv", index=False
        )
        console.print(f"route {radar.focal_label}: mean r 1-hop {radar.mean_r(1)}, 2-hop {radar.mean_r(2)}")
        did = True
    if args.weekly is not None:
        entity = args.weekly
        if args.kind == "mobility" and "_" in entity:
            entity = topology.parse_route(entity)
        profile = weekly_profile(chosen, entity)
        _write_json(profile.to_dict(), out / f"weekly_{profile.label}.json")
        frame = pd.DataFrame(profile.values.T, columns=["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"])
        frame.insert(0, "hour", profile.slot_hours())
        frame.to_csv(out / f"weekly_{profile.label}.csv", index=False)
        did = True
    if args.relationship is not None:
        rel = flow_relationship(gct, mob, topology, topology.parse_route(args.relationship))
        _write_json(rel.to_dict(), out / f"relationship_{rel.label}.json")
        console.print_json(json.dumps(rel.to_dict()))
        did = True
    if not did:
        raise ConfigError("analyze needs at least one of --stats, --hist, --radar, --weekly, --relationship")
    return 0


def cmd_predict(args, config: RunConfig, out: Path) -> int:
    topology = load_topology(args.topology)
    result, _ = load_framework(args.checkpoint, topology)
    model = result.model
    gct = load_flows(args.gct, FlowKind.GCT, topology)
    if gct.num_steps < model.t_in:
        raise DataError(f"{args.gct}: {gct.num_steps} steps, need at least {model.t_in}")
    windows = np.lib.stride_tricks.sliding_window_view(gct.values.astype(np.float64), model.t_in, axis=1)
    windows = np.ascontiguousarray(windows.transpose(1, 0, 2))
    pred = predict_array(model, result.normalizer.apply(windows))

    rows = []
    for w in range(pred.shape[0]):
        for h in range(model.horizon):
            stamp = gct.start_timestamp + (w + model.t_in + h) * gct.interval
            rows.append([w, h + 1, stamp, *pred[w, :, h]])
    frame = pd.DataFrame(rows, columns=["window", "step", "timestamp", *topology.route_labels()])
    frame.to_csv(out / "predictions.csv", index=False)
    console.print(f"wrote {pred.shape[0]} windows x {model.horizon} steps to {out / 'predictions.csv'}")
    return 0


HANDLERS: dict[str, Callable[[argparse.Namespace, RunConfig, Path], int]] = {
    "generate": cmd_generate,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "ablate": cmd_ablate,
    "analyze": cmd_analyze,
    "predict": cmd_predict,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = resolve_config(args)
        out = Path(config.output)
        out.mkdir(parents=True, exist_ok=True)
        configure_logging(logging.DEBUG if args.verbose else logging.INFO, out / "telto.log")
        set_precision(config.precision)
        config.save(out)
        logger.info("telto %s -> %s", args.command, out)
        return HANDLERS[args.command](args, config, out)
    except TeltoError as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
