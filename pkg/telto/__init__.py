"""Directional mobility-flow forecasting from undirected cellular traffic counts."""

__version__ = "1.0.0"
