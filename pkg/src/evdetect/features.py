"""Assembly of per-time-step feature vectors from sliding windows.

Two fixed feature layouts are produced:

* offline (21 columns): the six window statistics plus the peak count for
  the centered, forward, and backward windows of one length, in that
  order. Uses past and future samples relative to each step.
* online (13 columns): statistics of two backward windows (a long and a
  short one) plus the peak count of the long backward window. Reads only
  samples at or before each step, so it is safe for real-time use.

Column names encode the window kind and length, e.g. ``c360_mean``,
``f360_peaks``, ``b90_median``. Within a window the statistic order is
mean, std, var, min, max, median.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .series import (
    ChargingLabelSeries,
    EmptySeriesError,
    LoadSeries,
    MalformedRowError,
    NonUniformTimestampsError,
    SchemaMismatchError,
    format_timestamp,
    parse_timestamp,
)
from .windows import (
    DEFAULT_PEAK_THRESHOLD,
    WindowKind,
    WindowSpec,
    rise_flags,
    window_bounds,
)

STAT_SUFFIXES = ("mean", "std", "var", "min", "max", "median")

OFFLINE_FEATURE_COUNT = 21
ONLINE_FEATURE_COUNT = 13

DEFAULT_WINDOW_LENGTH = 360
DEFAULT_SHORT_WINDOW_LENGTH = 90


class FeatureMode(enum.Enum):
    OFFLINE = "offline"
    ONLINE = "online"


@dataclass(frozen=True)
class OfflineFeatureConfig:
    """Window length, peak threshold, and centered offset for offline mode."""

    window_length: int = DEFAULT_WINDOW_LENGTH
    peak_threshold: float = DEFAULT_PEAK_THRESHOLD
    centered_offset: int = 0

    def __post_init__(self):
        if self.window_length < 1:
            raise ValueError("window_length must be >= 1")
        if self.peak_threshold <= 0:
            raise ValueError("peak_threshold must be > 0")

    @property
    def window_specs(self) -> tuple[WindowSpec, WindowSpec, WindowSpec]:
        n = self.window_length
        return (
            WindowSpec(WindowKind.CENTERED, n, self.centered_offset),
            WindowSpec(WindowKind.FORWARD, n),
            WindowSpec(WindowKind.BACKWARD, n),
        )

    @property
    def column_names(self) -> tuple[str, ...]:
        names = []
        for prefix in (f"c{self.window_length}", f"f{self.window_length}",
                       f"b{self.window_length}"):
            names.extend(f"{prefix}_{s}" for s in STAT_SUFFIXES)
            names.append(f"{prefix}_peaks")
        return tuple(names)


@dataclass(frozen=True)
class OnlineFeatureConfig:
    """Long/short backward window lengths and peak threshold for online mode."""

    window_length: int = DEFAULT_WINDOW_LENGTH
    short_window_length: int = DEFAULT_SHORT_WINDOW_LENGTH
    peak_threshold: float = DEFAULT_PEAK_THRESHOLD

    def __post_init__(self):
        if self.window_length < 1 or self.short_window_length < 1:
            raise ValueError("window lengths must be >= 1")
        if self.peak_threshold <= 0:
            raise ValueError("peak_threshold must be > 0")

    @classmethod
    def for_length(cls, window_length: int,
                   peak_threshold: float = DEFAULT_PEAK_THRESHOLD
                   ) -> "OnlineFeatureConfig":
        """Config for a sweep point: the short window keeps the default
        4:1 ratio to the long one (360 -> 90)."""
        return cls(window_length, max(1, window_length // 4), peak_threshold)

    @property
    def window_specs(self) -> tuple[WindowSpec, WindowSpec]:
        return (
            WindowSpec(WindowKind.BACKWARD, self.window_length),
            WindowSpec(WindowKind.BACKWARD, self.short_window_length),
        )

    @property
    def column_names(self) -> tuple[str, ...]:
        long_p = f"b{self.window_length}"
        short_p = f"b{self.short_window_length}"
        names = [f"{long_p}_{s}" for s in STAT_SUFFIXES]
        names += [f"{short_p}_{s}" for s in STAT_SUFFIXES]
        names.append(f"{long_p}_peaks")
        return tuple(names)


def default_feature_config(mode: FeatureMode):
    if mode is FeatureMode.OFFLINE:
        return OfflineFeatureConfig()
    return OnlineFeatureConfig()


@dataclass(frozen=True)
class FeatureMatrix:
    """One feature vector per time step with a named-column schema."""

    column_names: tuple
    values: np.ndarray
    mode: FeatureMode

    def __post_init__(self):
        object.__setattr__(self, "column_names", tuple(self.column_names))
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        expected = (OFFLINE_FEATURE_COUNT if self.mode is FeatureMode.OFFLINE
                    else ONLINE_FEATURE_COUNT)
        if arr.ndim != 2 or arr.shape[1] != expected:
            raise ValueError(
                f"{self.mode.value} features need {expected} columns, "
                f"got shape {arr.shape}"
            )
        if len(self.column_names) != expected:
            raise ValueError("column_names length does not match columns")
        if not np.isfinite(arr).all():
            raise ValueError("feature matrix contains non-finite entries")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.column_names == other.column_names
            and self.mode == other.mode
            and np.array_equal(self.values, other.values)
        )


def _slice_stats(window: np.ndarray) -> tuple:
    var = window.var()
    return (
        window.mean(),
        np.sqrt(var),
        var,
        window.min(),
        window.max(),
        np.median(window),
    )


def _full_range(spec: WindowSpec, series_length: int) -> tuple[int, int, int]:
    """Steps whose window is unclamped: inclusive [t0, t1] plus the offset
    from step index to sliding-view row index (row = t + shift)."""
    last = series_length - 1
    if spec.kind is WindowKind.FORWARD:
        return 0, last - spec.length, 0
    if spec.kind is WindowKind.BACKWARD:
        return spec.length, last, -spec.length
    h = spec.half_length
    o = spec.offset
    return max(h - o, 0), min(last - h - o, last), o - h


def _window_width(spec: WindowSpec) -> int:
    if spec.kind is WindowKind.CENTERED:
        return 2 * spec.half_length + 1
    return spec.length + 1


def _stats_block(x: np.ndarray, spec: WindowSpec) -> np.ndarray:
    """(T, 6) matrix of window statistics for every step.

    Interior steps are computed in bulk on a sliding view; the reductions
    there are bit-identical to the per-slice computation used at the
    clamped edges.
    """
    T = x.shape[0]
    out = np.empty((T, 6), dtype=np.float64)
    width = _window_width(spec)
    t0, t1, shift = _full_range(spec, T)
    if T >= width and t0 <= t1:
        view = sliding_window_view(x, width)[t0 + shift: t1 + shift + 1]
        var = view.var(axis=1)
        out[t0: t1 + 1, 0] = view.mean(axis=1)
        out[t0: t1 + 1, 1] = np.sqrt(var)
        out[t0: t1 + 1, 2] = var
        out[t0: t1 + 1, 3] = view.min(axis=1)
        out[t0: t1 + 1, 4] = view.max(axis=1)
        out[t0: t1 + 1, 5] = np.median(view, axis=1)
        edges = list(range(0, t0)) + list(range(t1 + 1, T))
    else:
        edges = range(T)
    for t in edges:
        lo, hi = window_bounds(spec, t, T)
        out[t] = _slice_stats(x[lo: hi + 1])
    return out


def _peaks_block(x: np.ndarray, spec: WindowSpec, threshold: float) -> np.ndarray:
    """(T,) peak counts of ``spec`` at every step, via a prefix sum over
    consecutive-pair rise flags."""
    T = x.shape[0]
    cum = np.cumsum(rise_flags(x, threshold))
    t = np.arange(T)
    last = T - 1
    if spec.kind is WindowKind.FORWARD:
        lo = t
        hi = np.minimum(t + spec.length, last)
    elif spec.kind is WindowKind.BACKWARD:
        lo = np.maximum(t - spec.length, 0)
        hi = t
    else:
        h = spec.half_length
        lo = np.clip(t - h + spec.offset, 0, last)
        hi = np.clip(t + h + spec.offset, 0, last)
    return (cum[hi] - cum[lo]).astype(np.float64)


def extract_offline_features(load: LoadSeries, t: int,
                             config: OfflineFeatureConfig | None = None
                             ) -> np.ndarray:
    """21-value feature vector at step ``t`` using all three window kinds."""
    if config is None:
        config = OfflineFeatureConfig()
    x = load.values
    T = x.shape[0]
    out = np.empty(OFFLINE_FEATURE_COUNT, dtype=np.float64)
    pos = 0
    for spec in config.window_specs:
        lo, hi = window_bounds(spec, t, T)
        window = x[lo: hi + 1]
        out[pos: pos + 6] = _slice_stats(window)
        out[pos + 6] = rise_flags(window, config.peak_threshold).sum()
        pos += 7
    return out


def extract_online_features(load: LoadSeries, t: int,
                            config: OnlineFeatureConfig | None = None
                            ) -> np.ndarray:
    """13-value feature vector at step ``t`` reading only samples [0..t]."""
    if config is None:
        config = OnlineFeatureConfig()
    x = load.values
    T = x.shape[0]
    if not 0 <= t < T:
        raise IndexError(f"t={t} out of range [0, {T})")
    long_spec, short_spec = config.window_specs
    out = np.empty(ONLINE_FEATURE_COUNT, dtype=np.float64)
    lo_l, hi_l = window_bounds(long_spec, t, T)
    lo_s, hi_s = window_bounds(short_spec, t, T)
    long_window = x[lo_l: hi_l + 1]
    out[0:6] = _slice_stats(long_window)
    out[6:12] = _slice_stats(x[lo_s: hi_s + 1])
    out[12] = rise_flags(long_window, config.peak_threshold).sum()
    return out


def featurize_series(load: LoadSeries, mode: FeatureMode,
                     config=None) -> FeatureMatrix:
    """Feature matrix with one row per time step.

    Row ``t`` equals the corresponding single-step extractor output
    exactly; interior rows are computed in bulk for speed.
    """
    if config is None:
        config = default_feature_config(mode)
    x = load.values
    if mode is FeatureMode.OFFLINE:
        if not isinstance(config, OfflineFeatureConfig):
            raise TypeError("offline mode requires an OfflineFeatureConfig")
        blocks = []
        for spec in config.window_specs:
            blocks.append(_stats_block(x, spec))
            blocks.append(_peaks_block(x, spec, config.peak_threshold)[:, None])
    else:
        if not isinstance(config, OnlineFeatureConfig):
            raise TypeError("online mode requires an OnlineFeatureConfig")
        long_spec, short_spec = config.window_specs
        blocks = [
            _stats_block(x, long_spec),
            _stats_block(x, short_spec),
            _peaks_block(x, long_spec, config.peak_threshold)[:, None],
        ]
    return FeatureMatrix(config.column_names, np.hstack(blocks), mode)


def mode_for_column_count(n_columns: int) -> FeatureMode:
    if n_columns == OFFLINE_FEATURE_COUNT:
        return FeatureMode.OFFLINE
    if n_columns == ONLINE_FEATURE_COUNT:
        return FeatureMode.ONLINE
    raise SchemaMismatchError(
        f"expected {OFFLINE_FEATURE_COUNT} or {ONLINE_FEATURE_COUNT} "
        f"feature columns, got {n_columns}"
    )


def write_feature_csv(path, matrix: FeatureMatrix, start: datetime,
                      interval_s: float,
                      labels: ChargingLabelSeries | None = None) -> None:
    """Write ``timestamp,<features...>[,label]`` with shortest round-trip
    decimal formatting."""
    path = Path(path)
    if labels is not None and len(labels) != len(matrix):
        raise ValueError("labels length does not match feature rows")
    header = "timestamp," + ",".join(matrix.column_names)
    if labels is not None:
        header += ",label"
    rows = matrix.values
    lab = labels.labels if labels is not None else None
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for t in range(rows.shape[0]):
            ts = start + timedelta(seconds=t * interval_s)
            cells = [format_timestamp(ts)]
            cells.extend(repr(float(v)) for v in rows[t])
            if lab is not None:
                cells.append(str(lab[t]))
            fh.write(",".join(cells) + "\n")


@dataclass(frozen=True)
class FeatureCsv:
    matrix: FeatureMatrix
    labels: ChargingLabelSeries | None
    start: datetime
    interval_s: float


def read_feature_csv(path, interval_s: float = 60.0) -> FeatureCsv:
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        names = header.split(",")
        if not names or names[0] != "timestamp":
            raise SchemaMismatchError(f"{path}: first column must be 'timestamp'")
        has_labels = names[-1] == "label"
        feature_names = names[1:-1] if has_labels else names[1:]
        mode = mode_for_column_count(len(feature_names))
        start = None
        rows = []
        labels = []
        n_fields = len(names)
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != n_fields:
                raise MalformedRowError(line_no, f"expected {n_fields} fields")
            try:
                ts = parse_timestamp(parts[0])
            except ValueError as exc:
                raise MalformedRowError(line_no, f"bad timestamp: {exc}") from exc
            if start is None:
                start = ts
            else:
                expected = start + timedelta(seconds=len(rows) * interval_s)
                if ts != expected:
                    raise NonUniformTimestampsError(
                        line_no, format_timestamp(expected), format_timestamp(ts)
                    )
            try:
                end = n_fields - 1 if has_labels else n_fields
                rows.append([float(v) for v in parts[1:end]])
                if has_labels:
                    labels.append(int(parts[-1]))
            except ValueError as exc:
                raise MalformedRowError(line_no, str(exc)) from exc
        if start is None:
            raise EmptySeriesError(f"{path}: no data rows")
    matrix = FeatureMatrix(tuple(feature_names), np.asarray(rows), mode)
    label_series = ChargingLabelSeries(np.asarray(labels)) if has_labels else None
    return FeatureCsv(matrix, label_series, start, interval_s)
