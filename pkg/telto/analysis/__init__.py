from .models import CorrelationEntry, CorrelationRadar, DescriptiveStats, FlowRelationship, Histogram, WeeklyProfile
from .stats import describe, flow_relationship, histogram, pearson, upstream_correlation, weekly_profile

__all__ = [
    "CorrelationEntry",
    "CorrelationRadar",
    "DescriptiveStats",
    "FlowRelationship",
    "Histogram",
    "WeeklyProfile",
    "describe",
    "flow_relationship",
    "histogram",
    "pearson",
    "upstream_correlation",
    "weekly_profile",
]
