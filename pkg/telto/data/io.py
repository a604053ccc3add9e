"""CSV ingestion and emission for records and flow series."""
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from ..errors import DataError
from ..topology import RoadTopology
from .models import DEFAULT_INTERVAL, FlowKind, FlowSeries, RecordTable

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SNAP_RADIUS_M = 20.0
EARTH_RADIUS_M = 6_371_000.0


def parse_timestamps(column: pd.Series) -> np.ndarray:
    """Epoch seconds from a column of epoch numbers or ISO-8601 strings."""
    numeric = pd.to_numeric(column, errors="coerce")
    if numeric.notna().all():
        return numeric.to_numpy().astype(np.int64)
    parsed = pd.to_datetime(column, utc=True, errors="coerce")
    if parsed.isna().any():
        bad = int(np.argmax(parsed.isna().to_numpy()))
        raise DataError(f"row {bad}: cannot parse timestamp {column.iloc[bad]!r}")
    seconds = (parsed - pd.Timestamp(0, tz="UTC")) // pd.Timedelta(seconds=1)
    return seconds.to_numpy().astype(np.int64)


def _project(lat: np.ndarray, lon: np.ndarray, origin: tuple[float, float]) -> np.ndarray:
    lat0, lon0 = origin
    x = np.radians(np.asarray(lon) - lon0) * EARTH_RADIUS_M * np.cos(np.radians(lat0))
    y = np.radians(np.asarray(lat) - lat0) * EARTH_RADIUS_M
    return np.column_stack([x, y])


def snap_to_segments(
    lat: np.ndarray,
    lon: np.ndarray,
    topology: RoadTopology,
    radius: float = SNAP_RADIUS_M,
) -> np.ndarray:
    """Nearest segment id within `radius` metres of each point, -1 when none."""
    if topology.num_segments == 0:
        return np.full(len(lat), -1, dtype=np.int64)
    origin = topology.centroid()
    centres = _project(
        np.array([s.latitude for s in topology.segments]),
        np.array([s.longitude for s in topology.segments]),
        origin,
    )
    dist, idx = cKDTree(centres).query(_project(lat, lon, origin), distance_upper_bound=radius)
    return np.where(np.isfinite(dist), idx, -1).astype(np.int64)


def load_records(
    path: PathLike,
    topology: Optional[RoadTopology] = None,
    snap_radius: float = SNAP_RADIUS_M,
) -> RecordTable:
    """Read `user_hash,timestamp,segment_id` (or `user_hash,timestamp,lat,lon`)
    rows; the result is sorted by timestamp."""
    try:
        frame = pd.read_csv(path, dtype={"user_hash": str})
    except FileNotFoundError as e:
        raise DataError(f"records file not found: {path}") from e
    missing = {"user_hash", "timestamp"} - set(frame.columns)
    if missing:
        raise DataError(f"{path}: missing columns {sorted(missing)}")

    when = parse_timestamps(frame["timestamp"])
    if "segment_id" in frame.columns:
        segment = pd.to_numeric(frame["segment_id"], errors="coerce")
        if segment.isna().any():
            raise DataError(f"{path}: row {int(np.argmax(segment.isna().to_numpy()))} has no segment_id")
        segment = segment.to_numpy().astype(np.int64)
    elif {"lat", "lon"} <= set(frame.columns):
        if topology is None:
            raise DataError("lat/lon records need a topology to snap against")
        segment = snap_to_segments(frame["lat"].to_numpy(float), frame["lon"].to_numpy(float), topology, snap_radius)
    else:
        raise DataError(f"{path}: need a segment_id column or lat/lon columns")

    keep = segment >= 0
    if not keep.all():
        logger.warning("dropped %d of %d records outside every segment", int((~keep).sum()), len(keep))
    if topology is not None:
        bad = keep & (segment >= topology.num_segments)
        if bad.any():
            row = int(np.argmax(bad))
            raise DataError(f"{path}: row {row} has unknown segment_id {int(segment[row])}")

    users = frame["user_hash"].to_numpy()[keep]
    when, segment = when[keep], segment[keep]
    order = np.argsort(when, kind="stable")
    codes, labels = pd.factorize(pd.Series(users[order], dtype=object))
    logger.info("loaded %d records from %s", len(order), path)
    return RecordTable(
        user=codes.astype(np.int64),
        timestamp=when[order],
        segment=segment[order],
        user_labels=np.asarray(labels, dtype=object),
    )


def save_records(records: RecordTable, path: PathLike) -> None:
    records.to_frame().to_csv(path, index=False)


def save_flows(series: FlowSeries, path: PathLike) -> None:
    labels = list(series.labels) or [str(i) for i in range(series.entity_count)]
    frame = pd.DataFrame(series.values.T, columns=labels)
    frame.insert(0, "timestamp", series.timestamps())
    frame.to_csv(path, index=False)


def load_flows(
    path: PathLike,
    kind: Union[FlowKind, str],
    topology: Optional[RoadTopology] = None,
    interval: Optional[int] = None,
) -> FlowSeries:
    """Read a `timestamp,<entity...>` CSV. With a topology, columns are
    matched to segment labels or route "start_end" labels and reordered."""
    kind = FlowKind(kind)
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as e:
        raise DataError(f"flows file not found: {path}") from e
    if "timestamp" not in frame.columns:
        raise DataError(f"{path}: missing timestamp column")
    if frame.empty:
        raise DataError(f"{path}: no rows")

    stamps = parse_timestamps(frame.pop("timestamp"))
    steps = np.unique(np.diff(stamps))
    if len(steps) > 1 or (len(steps) == 1 and steps[0] <= 0):
        raise DataError(f"{path}: timestamps are not evenly spaced")
    if len(steps) == 1:
        if interval is not None and interval != int(steps[0]):
            raise DataError(f"{path}: rows are {int(steps[0])}s apart, expected {interval}s")
        interval = int(steps[0])
    interval = interval or DEFAULT_INTERVAL

    frame.columns = [str(c) for c in frame.columns]
    if topology is not None:
        expected = topology.segment_labels() if kind is FlowKind.GCT else topology.route_labels()
        if set(frame.columns) != set(expected):
            extra = sorted(set(frame.columns) - set(expected))
            lacking = sorted(set(expected) - set(frame.columns))
            raise DataError(f"{path}: columns do not match topology (unexpected {extra[:5]}, missing {lacking[:5]})")
        frame = frame[expected]

    values = frame.to_numpy()
    if not np.issubdtype(values.dtype, np.number):
        raise DataError(f"{path}: non-numeric flow values")
    if np.allclose(values, np.rint(values)):
        values = np.rint(values).astype(np.int64)
    return FlowSeries(
        kind=kind,
        values=np.ascontiguousarray(values.T),
        interval=interval,
        start_timestamp=int(stamps[0]),
        labels=tuple(frame.columns),
    )
