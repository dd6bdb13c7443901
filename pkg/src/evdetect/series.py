"""Load and label series types plus the CSV schemas shared by the package.

Two file schemas are defined here and used everywhere else:

* household CSV: header ``timestamp,load_kw,ev_kw``
* feeder CSV:    header ``timestamp,load_kw,label``

Timestamps are ISO-8601 UTC, values are decimal kW with ``.`` separator,
lines end with LF. Floats are written with shortest round-trip formatting,
so write -> read reproduces the underlying 64-bit values exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence, Union

import numpy as np

DEFAULT_INTERVAL_S = 60.0

HOUSEHOLD_CSV_HEADER = "timestamp,load_kw,ev_kw"
FEEDER_CSV_HEADER = "timestamp,load_kw,label"


class SeriesError(ValueError):
    """Base class for series validation and ingestion failures."""


class EmptySeriesError(SeriesError):
    pass


class NonFiniteValueError(SeriesError):
    def __init__(self, index: int):
        super().__init__(f"non-finite value at index {index}")
        self.index = index


class NegativeValueError(SeriesError):
    def __init__(self, index: int):
        super().__init__(f"negative value at index {index}")
        self.index = index


class SchemaMismatchError(SeriesError):
    pass


class MalformedRowError(SeriesError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"malformed row at line {line}: {reason}")
        self.line = line


class NonUniformTimestampsError(SeriesError):
    def __init__(self, line: int, expected: str, got: str):
        super().__init__(
            f"non-uniform timestamp at line {line}: expected {expected}, got {got}"
        )
        self.line = line


def validate_load_values(values: np.ndarray) -> np.ndarray:
    """Check a raw kW sample array against the load-series invariants.

    Returns the array as float64 on success; raises the first violation
    (EmptySeriesError, NonFiniteValueError, NegativeValueError) otherwise.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise SeriesError(f"expected 1-d values, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptySeriesError("series must contain at least one sample")
    finite = np.isfinite(arr)
    if not finite.all():
        raise NonFiniteValueError(int(np.argmin(finite)))
    negative = arr < 0.0
    if negative.any():
        raise NegativeValueError(int(np.argmax(negative)))
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def _utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return _utc(ts).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    # datetime.fromisoformat on 3.10 does not accept a trailing Z.
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class LoadSeries:
    """Uniformly sampled power sequence in kW.

    ``start`` is the UTC timestamp of the first sample, ``interval_s`` the
    fixed sample spacing (60 s for minute data). All values are finite and
    non-negative; the array is immutable after construction.
    """

    start: datetime
    values: np.ndarray
    interval_s: float = DEFAULT_INTERVAL_S

    def __post_init__(self):
        if not self.interval_s > 0:
            raise SeriesError(f"interval must be positive, got {self.interval_s}")
        arr = validate_load_values(self.values)
        object.__setattr__(self, "start", _utc(self.start))
        object.__setattr__(self, "values", _freeze(arr))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LoadSeries):
            return NotImplemented
        return (
            self.start == other.start
            and self.interval_s == other.interval_s
            and np.array_equal(self.values, other.values)
        )

    def timestamp_at(self, t: int) -> datetime:
        return self.start + timedelta(seconds=t * self.interval_s)


@dataclass(frozen=True)
class ChargingLabelSeries:
    """Binary per-time-step EV charging state, aligned to a LoadSeries."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 1 or arr.size == 0:
            raise SeriesError(f"labels must be a non-empty 1-d sequence")
        if not np.isin(arr, (0, 1)).all():
            bad = int(np.argmin(np.isin(arr, (0, 1))))
            raise SeriesError(f"label not in {{0,1}} at index {bad}")
        object.__setattr__(self, "labels", _freeze(arr.astype(np.uint8)))

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChargingLabelSeries):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    def positive_rate(self) -> float:
        return float(self.labels.mean())


def labels_from_ev_load(ev_values: np.ndarray) -> ChargingLabelSeries:
    """Label rule: charging is ON exactly where the EV draw is > 0 kW."""
    return ChargingLabelSeries((np.asarray(ev_values) > 0.0).astype(np.uint8))


@dataclass(frozen=True)
class HouseholdRecordSet:
    """One household's total load, EV-only load, and derived labels."""

    household_id: str
    load: LoadSeries
    ev_load: LoadSeries
    labels: ChargingLabelSeries

    def __post_init__(self):
        if len(self.load) != len(self.ev_load) or len(self.load) != len(self.labels):
            raise SeriesError("load, ev_load and labels must share one length")
        if self.load.start != self.ev_load.start:
            raise SeriesError("load and ev_load must share a start timestamp")
        if self.load.interval_s != self.ev_load.interval_s:
            raise SeriesError("load and ev_load must share an interval")
        over = self.ev_load.values > self.load.values
        if over.any():
            t = int(np.argmax(over))
            raise SeriesError(f"ev_load exceeds load at index {t}")
        expected = self.ev_load.values > 0.0
        if not np.array_equal(expected, self.labels.labels.astype(bool)):
            t = int(np.argmax(expected != self.labels.labels.astype(bool)))
            raise SeriesError(f"labels inconsistent with ev_load at index {t}")


@dataclass(frozen=True)
class FeederRecordSet:
    """Aggregate load of several households and the OR of their labels."""

    feeder_id: str
    household_ids: tuple
    load: LoadSeries
    labels: ChargingLabelSeries

    def __post_init__(self):
        object.__setattr__(self, "household_ids", tuple(self.household_ids))
        if len(self.load) != len(self.labels):
            raise SeriesError("load and labels must share one length")


def validate_load_series(series: LoadSeries) -> None:
    """Re-check an existing LoadSeries; raises the first violation found."""
    if not series.interval_s > 0:
        raise SeriesError(f"interval must be positive, got {series.interval_s}")
    validate_load_values(series.values)


def _format_kw(value: float) -> str:
    return repr(float(value))


def _parse_rows(path, expected_header: str, n_value_cols: int,
                interval_s: float):
    """Shared CSV reader: header check, timestamp uniformity, float parsing."""
    path = Path(path)
    start = None
    timestamps_ok = True
    cols = [[] for _ in range(n_value_cols)]
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        if header != expected_header:
            raise SchemaMismatchError(
                f"{path}: expected header {expected_header!r}, got {header!r}"
            )
        expected_fields = 1 + n_value_cols
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != expected_fields:
                raise MalformedRowError(line_no, f"expected {expected_fields} fields")
            try:
                ts = parse_timestamp(parts[0])
            except ValueError as exc:
                raise MalformedRowError(line_no, f"bad timestamp: {exc}") from exc
            if start is None:
                start = ts
            else:
                i = len(cols[0])
                expected_ts = start + timedelta(seconds=i * interval_s)
                if ts != expected_ts:
                    raise NonUniformTimestampsError(
                        line_no, format_timestamp(expected_ts), format_timestamp(ts)
                    )
            for k in range(n_value_cols):
                try:
                    cols[k].append(float(parts[1 + k]))
                except ValueError as exc:
                    raise MalformedRowError(
                        line_no, f"bad number {parts[1 + k]!r}"
                    ) from exc
    if start is None:
        raise EmptySeriesError(f"{path}: no data rows")
    return start, [np.asarray(c, dtype=np.float64) for c in cols]


def read_household_csv(path, interval_s: float = DEFAULT_INTERVAL_S,
                       household_id: str | None = None) -> HouseholdRecordSet:
    """Read a ``timestamp,load_kw,ev_kw`` file.

    Labels are always recomputed as ``ev_kw > 0`` rather than trusted from
    the file; timestamps must advance uniformly at ``interval_s``.
    """
    start, (load_kw, ev_kw) = _parse_rows(path, HOUSEHOLD_CSV_HEADER, 2, interval_s)
    if household_id is None:
        household_id = Path(path).stem
    return HouseholdRecordSet(
        household_id=household_id,
        load=LoadSeries(start, load_kw, interval_s),
        ev_load=LoadSeries(start, ev_kw, interval_s),
        labels=labels_from_ev_load(ev_kw),
    )


def write_household_csv(record: HouseholdRecordSet, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(HOUSEHOLD_CSV_HEADER + "\n")
        load = record.load
        ev = record.ev_load.values
        for t in range(len(load)):
            fh.write(
                f"{format_timestamp(load.timestamp_at(t))},"
                f"{_format_kw(load.values[t])},{_format_kw(ev[t])}\n"
            )


def read_feeder_csv(path, interval_s: float = DEFAULT_INTERVAL_S,
                    feeder_id: str | None = None) -> FeederRecordSet:
    """Read a ``timestamp,load_kw,label`` file.

    The member household ids are not part of the schema, so the returned
    record set carries an empty household_ids tuple.
    """
    start, (load_kw, label_col) = _parse_rows(path, FEEDER_CSV_HEADER, 2, interval_s)
    labels = np.empty(label_col.shape[0], dtype=np.uint8)
    for i, v in enumerate(label_col):
        if v not in (0.0, 1.0):
            raise MalformedRowError(i + 2, f"label must be 0 or 1, got {v!r}")
        labels[i] = int(v)
    if feeder_id is None:
        feeder_id = Path(path).stem
    return FeederRecordSet(
        feeder_id=feeder_id,
        household_ids=(),
        load=LoadSeries(start, load_kw, interval_s),
        labels=ChargingLabelSeries(labels),
    )


def write_feeder_csv(feeder: FeederRecordSet, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(FEEDER_CSV_HEADER + "\n")
        load = feeder.load
        labels = feeder.labels.labels
        for t in range(len(load)):
            fh.write(
                f"{format_timestamp(load.timestamp_at(t))},"
                f"{_format_kw(load.values[t])},{labels[t]}\n"
            )
