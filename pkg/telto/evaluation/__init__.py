from .experiments import evaluate_baseline, evaluate_framework, run_ablations, run_comparison
from .metrics import compute_metrics, horizon_minutes, improvement_ratio, ir_value, mean_report, table_steps
from .models import AblationRow, AblationTable, ComparisonReport, HorizonMetrics, MetricsReport
from .report import REPORT_FORMATS, ablation_markdown, comparison_markdown, metrics_markdown, write_report

__all__ = [
    "AblationRow",
    "AblationTable",
    "ComparisonReport",
    "HorizonMetrics",
    "MetricsReport",
    "REPORT_FORMATS",
    "ablation_markdown",
    "comparison_markdown",
    "compute_metrics",
    "evaluate_baseline",
    "evaluate_framework",
    "horizon_minutes",
    "improvement_ratio",
    "ir_value",
    "mean_report",
    "metrics_markdown",
    "run_ablations",
    "run_comparison",
    "table_steps",
    "write_report",
]
