import json
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import pandas as pd
from rich.console import Console
from rich.table import Table

from ..errors import ConfigError
from .metrics import table_steps
from .models import METRICS, OVERALL, AblationTable, ComparisonReport, MetricsReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

REPORT_FORMATS = ("json", "csv", "markdown")


def _columns(report: MetricsReport) -> list[str]:
    return [*table_steps(len(report.horizons), report.interval), OVERALL]


def _fmt(metric: str, value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    return f"{value:.1f}%" if metric == "mape" else f"{value:.2f}"


def _cells(report: Optional[MetricsReport], columns: list[str]) -> list[str]:
    if report is None:
        return ["failed"] * (len(columns) * len(METRICS))
    rows = report.by_label()
    return [_fmt(m, rows[c].value(m)) for c in columns for m in METRICS]


def metrics_frame(report: MetricsReport, **tags) -> pd.DataFrame:
    """Long format: one row per (horizon, metric)."""
    rows = [
        {**tags, "horizon": label, "metric": m, "value": h.value(m)}
        for label, h in report.by_label().items()
        for m in METRICS
    ]
    return pd.DataFrame(rows)


def comparison_frame(report: ComparisonReport) -> pd.DataFrame:
    frames = [
        metrics_frame(r, arm=arm) for arm, r in (("w/o", report.without), ("w", report.with_)) if r is not None
    ]
    frames.append(
        pd.DataFrame(
            [
                {"arm": "IR", "horizon": label, "metric": m, "value": value}
                for m, by_label in report.ir.items()
                for label, value in by_label.items()
            ],
            columns=["arm", "horizon", "metric", "value"],
        )
    )
    return pd.concat(frames, ignore_index=True)


def ablation_frame(table: AblationTable) -> pd.DataFrame:
    frames = [
        metrics_frame(r.report, setting=r.label, baseline=r.baseline)
        if r.report is not None
        else pd.DataFrame([{"setting": r.label, "baseline": r.baseline, "error": r.error}])
        for r in table.rows
    ]
    return pd.concat(frames, ignore_index=True)


def _markdown(header: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def _header(first: str, columns: list[str]) -> list[str]:
    return [first] + [f"{c} {m.upper()}" for c in columns for m in METRICS]


def comparison_markdown(report: ComparisonReport, model: str = "STGNN") -> str:
    reference = report.without or report.with_
    if reference is None:
        return f"{model}: both arms failed\n"
    columns = _columns(reference)
    ir_row = ["IR"] + [
        _fmt("mape", report.ir.get(m, {}).get(c)) if report.ir else "n/a" for c in columns for m in METRICS
    ]
    rows = [
        [f"{model}(w/o)", *_cells(report.without, columns)],
        [f"{model}(w)", *_cells(report.with_, columns)],
        ir_row,
    ]
    note = f"\nOverall = {reference.overall_rule}; means over {report.runs} run(s), seeds {list(report.seeds)}.\n"
    return _markdown(_header("Model", columns), rows) + note


def ablation_markdown(table: AblationTable) -> str:
    reference = next((r.report for r in table.rows if r.report is not None), None)
    if reference is None:
        return "every ablation setting failed\n"
    columns = _columns(reference)
    rows = [[r.label + (" *" if r.baseline else ""), *_cells(r.report, columns)] for r in table.rows]
    return _markdown(_header("Setting", columns), rows) + f"\n* baseline; means over {table.runs} run(s).\n"


def rich_table(title: str, markdown: str) -> Table:
    """Rebuild a rendered markdown table as a rich Table for the console."""
    lines = [l for l in markdown.splitlines() if l.startswith("|") and not l.startswith("|---")]
    cells = [[c.strip() for c in l.strip("|").split("|")] for l in lines]
    table = Table(title=title)
    for i, name in enumerate(cells[0]):
        table.add_column(name, justify="left" if i == 0 else "right")
    for row in cells[1:]:
        table.add_row(*row)
    return table


def metrics_markdown(report: MetricsReport) -> str:
    header = ["Horizon", *(m.upper() for m in METRICS)]
    rows = [[label, *(_fmt(m, h.value(m)) for m in METRICS)] for label, h in report.by_label().items()]
    return _markdown(header, rows)


def write_report(
    payload: Union[MetricsReport, ComparisonReport, AblationTable],
    directory: PathLike,
    stem: str,
    console: Optional[Console] = None,
    formats: Sequence[str] = REPORT_FORMATS,
) -> dict[str, Path]:
    """Write <stem>.json, <stem>.csv and <stem>.md, restricted to `formats`."""
    unknown = sorted(set(formats) - set(REPORT_FORMATS))
    if unknown or not formats:
        raise ConfigError(f"report formats must be a non-empty subset of {REPORT_FORMATS}, got {list(formats)}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    if isinstance(payload, ComparisonReport):
        frame, markdown = comparison_frame(payload), comparison_markdown(payload)
    elif isinstance(payload, AblationTable):
        frame, markdown = ablation_frame(payload), ablation_markdown(payload)
    else:
        frame, markdown = metrics_frame(payload), metrics_markdown(payload)

    paths: dict[str, Path] = {}
    if "json" in formats:
        paths["json"] = directory / f"{stem}.json"
        paths["json"].write_text(json.dumps(payload.to_dict(), indent=2))
    if "csv" in formats:
        paths["csv"] = directory / f"{stem}.csv"
        frame.to_csv(paths["csv"], index=False)
    if "markdown" in formats:
        paths["md"] = directory / f"{stem}.md"
        paths["md"].write_text(markdown)
    if console is not None:
        console.print(rich_table(stem, markdown))
    logger.info("wrote %s report (%s) to %s", stem, ", ".join(sorted(paths)), directory)
    return paths
