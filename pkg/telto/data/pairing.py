import logging
from typing import Sequence, Union

import numpy as np
import pandas as pd

from ..errors import DataError
from ..topology import RoadTopology
from .models import (
    DEFAULT_INTERVAL,
    DEFAULT_PAIRING_WINDOW,
    FlowKind,
    FlowSeries,
    GctPairing,
    GctRecord,
    PairingTable,
    RecordTable,
)

logger = logging.getLogger(__name__)

Records = Union[RecordTable, Sequence[GctRecord]]
Pairings = Union[PairingTable, Sequence[GctPairing]]


def as_record_table(records: Records) -> RecordTable:
    if isinstance(records, RecordTable):
        return records
    return RecordTable.from_records(list(records))


def as_pairing_table(pairings: Pairings) -> PairingTable:
    if isinstance(pairings, PairingTable):
        return pairings
    return PairingTable.from_pairings(list(pairings))


def _greedy_match(group: pd.DataFrame, window: int) -> list[tuple[int, int]]:
    starts = group[["idx_a", "t_a"]].drop_duplicates().sort_values(["t_a", "idx_a"])
    ends = group[["idx_b", "t_b"]].drop_duplicates().sort_values(["t_b", "idx_b"])
    used: set[int] = set()
    matches = []
    end_rows = list(ends.itertuples(index=False))
    for idx_a, t_a in starts.itertuples(index=False):
        for idx_b, t_b in end_rows:
            if idx_b in used:
                continue
            if 0 < t_b - t_a <= window:
                used.add(idx_b)
                matches.append((idx_a, idx_b))
                break
    return matches


def pair_records(
    records: Records,
    topology: RoadTopology,
    pairing_window: int = DEFAULT_PAIRING_WINDOW,
) -> PairingTable:
    """Pair each user's record on a route's start segment with a later record
    on its end segment at most `pairing_window` seconds after.

    Per user and route, start records are taken in time order and each one
    claims the earliest unclaimed end record inside the window, so a record
    joins at most one pairing per route.
    """
    table = as_record_table(records)
    if pairing_window <= 0:
        raise DataError(f"pairing_window must be positive, got {pairing_window}")
    if not table.is_sorted():
        first = int(np.argmax(np.diff(table.timestamp) < 0)) + 1
        raise DataError(f"records are not sorted by timestamp (first violation at row {first})")
    bad = (table.segment < 0) | (table.segment >= topology.num_segments)
    if bad.any():
        raise DataError(f"record {int(np.argmax(bad))} has unknown segment_id {int(table.segment[bad][0])}")
    if len(table) == 0 or topology.num_routes == 0:
        return PairingTable(*(np.empty(0, dtype=np.int64) for _ in range(4)), user_labels=table.user_labels)

    frame = pd.DataFrame(
        {
            "user": table.user,
            "t": table.timestamp,
            "seg": table.segment,
            "idx": np.arange(len(table), dtype=np.int64),
        }
    )
    # Users seen on a single segment can never pair.
    distinct = frame.groupby("user")["seg"].transform("nunique")
    frame = frame[distinct.to_numpy() >= 2]

    routes = pd.DataFrame(
        {
            "route": np.arange(topology.num_routes, dtype=np.int64),
            "seg_a": topology.route_starts,
            "seg_b": topology.route_ends,
        }
    )
    side_a = frame.rename(columns={"t": "t_a", "seg": "seg_a", "idx": "idx_a"})
    side_b = frame.rename(columns={"t": "t_b", "seg": "seg_b", "idx": "idx_b"})
    candidates = side_a.merge(routes, on="seg_a").merge(side_b, on=["user", "seg_b"])
    delta = candidates["t_b"] - candidates["t_a"]
    candidates = candidates[(delta > 0) & (delta <= pairing_window)]

    sizes = candidates.groupby(["user", "route"])["idx_a"].transform("size")
    single = candidates[sizes.to_numpy() == 1]
    matched = [single[["user", "route", "t_a", "t_b"]]]

    multi = candidates[sizes.to_numpy() > 1]
    if len(multi):
        logger.debug("greedy matching %d ambiguous (user, route) groups", multi.groupby(["user", "route"]).ngroups)
        rows = []
        times = table.timestamp
        for (user, route), group in multi.groupby(["user", "route"], sort=False):
            for idx_a, idx_b in _greedy_match(group, pairing_window):
                rows.append((user, route, times[idx_a], times[idx_b]))
        matched.append(pd.DataFrame(rows, columns=["user", "route", "t_a", "t_b"]))

    result = pd.concat(matched, ignore_index=True).astype(np.int64)
    result = result.sort_values(["t_a", "route", "user", "t_b"], kind="mergesort")
    return PairingTable(
        user=result["user"].to_numpy(),
        route=result["route"].to_numpy(),
        start_time=result["t_a"].to_numpy(),
        end_time=result["t_b"].to_numpy(),
        user_labels=table.user_labels,
    )


def aggregate_flows(
    items: Union[Records, Pairings],
    topology: RoadTopology,
    interval: int = DEFAULT_INTERVAL,
    start: int = 0,
    end: int = DEFAULT_INTERVAL,
    kind: FlowKind = FlowKind.GCT,
) -> FlowSeries:
    """Bucket records (by timestamp, per segment) or pairings (by start_time,
    per route) into [start + t*interval, start + (t+1)*interval)."""
    if interval <= 0:
        raise DataError(f"interval must be positive, got {interval}")
    if start >= end or (end - start) % interval:
        raise DataError(f"[{start}, {end}) is not a positive whole number of {interval}s intervals")
    kind = FlowKind(kind)
    steps = (end - start) // interval

    if kind is FlowKind.GCT:
        table = as_record_table(items)
        entity, when = table.segment, table.timestamp
        count, labels = topology.num_segments, topology.segment_labels()
    else:
        table = as_pairing_table(items)
        entity, when = table.route, table.start_time
        count, labels = topology.num_routes, topology.route_labels()

    entity = np.asarray(entity, dtype=np.int64)
    when = np.asarray(when, dtype=np.int64)
    if len(entity) and (entity.min() < 0 or entity.max() >= count):
        raise DataError(f"{kind.value} item references entity outside [0, {count})")
    inside = (when >= start) & (when < end)
    bucket = (when[inside] - start) // interval
    flat = entity[inside] * steps + bucket
    values = np.bincount(flat, minlength=count * steps).reshape(count, steps).astype(np.int64)
    return FlowSeries(
        kind=kind,
        values=values,
        interval=interval,
        start_timestamp=start,
        labels=tuple(labels),
    )
