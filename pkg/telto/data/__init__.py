from .io import load_flows, load_records, save_flows, save_records, snap_to_segments
from .models import (
    FlowKind,
    FlowSeries,
    GctPairing,
    GctRecord,
    NormalizationStats,
    PairingTable,
    RecordTable,
    Splits,
    SyntheticConfig,
    WindowConfig,
    WindowedDataset,
)
from .pairing import aggregate_flows, pair_records
from .synthetic import SyntheticDataset, generate_synthetic, route_orientation
from .windows import fit_normalizer, make_windows, split_sizes

__all__ = [
    "FlowKind",
    "FlowSeries",
    "GctPairing",
    "GctRecord",
    "NormalizationStats",
    "PairingTable",
    "RecordTable",
    "Splits",
    "SyntheticConfig",
    "SyntheticDataset",
    "WindowConfig",
    "WindowedDataset",
    "aggregate_flows",
    "fit_normalizer",
    "generate_synthetic",
    "load_flows",
    "load_records",
    "make_windows",
    "pair_records",
    "route_orientation",
    "save_flows",
    "save_records",
    "snap_to_segments",
    "split_sizes",
]
