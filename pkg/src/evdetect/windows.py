"""Sliding-window geometry, per-window statistics, and peak counting.

Window index conventions (both edges inclusive, ranges clamped to the
series):

* forward  of length n at step t: ``[t, t+n]``
* backward of length n at step t: ``[t-n, t]``
* centered of length n at step t: ``[t-h+o, t+h+o]`` with ``h = ceil(n/2)``
  and offset ``o`` (0 unless centered)

Windows are truncated at the series boundary; no padding is ever applied,
so a window always covers at least the sample at ``t`` itself (single
sample at the extreme edges).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

#: Loads at or below this level (kW) are treated as zero when forming the
#: relative rise ratio; a jump from zero to a positive load counts as a peak.
ZERO_GUARD_KW = 1e-9

DEFAULT_PEAK_THRESHOLD = 1.0


class WindowKind(enum.Enum):
    FORWARD = "forward"
    CENTERED = "centered"
    BACKWARD = "backward"


class EmptyWindowError(ValueError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    """Window kind, length in samples, and (centered only) offset."""

    kind: WindowKind
    length: int
    offset: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"window length must be >= 1, got {self.length}")
        if self.offset != 0 and self.kind is not WindowKind.CENTERED:
            raise ValueError("offset is only meaningful for centered windows")

    @property
    def half_length(self) -> int:
        """Per-side reach of a centered window: length halved, rounded up."""
        return (self.length + 1) // 2


def window_bounds(spec: WindowSpec, t: int, series_length: int) -> tuple[int, int]:
    """Inclusive [lo, hi] index range covered by ``spec`` at step ``t``."""
    if series_length < 1:
        raise IndexError("series_length must be >= 1")
    if not 0 <= t < series_length:
        raise IndexError(f"t={t} out of range [0, {series_length})")
    last = series_length - 1
    if spec.kind is WindowKind.FORWARD:
        lo, hi = t, min(t + spec.length, last)
    elif spec.kind is WindowKind.BACKWARD:
        lo, hi = max(t - spec.length, 0), t
    else:
        h = spec.half_length
        lo = min(max(t - h + spec.offset, 0), last)
        hi = min(max(t + h + spec.offset, 0), last)
    return lo, hi


@dataclass(frozen=True)
class WindowStats:
    """The six aggregate statistics of one window of kW samples.

    Variance is the population variance (divide by the sample count) and
    ``std_dev == sqrt(variance)``; the median of an even-sized window is
    the mean of the two central order statistics.
    """

    mean: float
    variance: float
    std_dev: float
    minimum: float
    maximum: float
    median: float
    sample_count: int


def compute_window_stats(values) -> WindowStats:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyWindowError("window must contain at least one sample")
    if not np.isfinite(arr).all():
        raise ValueError("window contains non-finite samples")
    variance = float(arr.var())
    return WindowStats(
        mean=float(arr.mean()),
        variance=variance,
        std_dev=math.sqrt(variance),
        minimum=float(arr.min()),
        maximum=float(arr.max()),
        median=float(np.median(arr)),
        sample_count=int(arr.size),
    )


def rise_flags(values: np.ndarray, threshold: float) -> np.ndarray:
    """Boolean flag per consecutive pair: does value i-1 -> i rise by more
    than ``threshold`` relative to value i-1?

    Output has the same length as ``values``; position 0 is always False
    (no predecessor). Predecessors at or below ZERO_GUARD_KW make the
    ratio infinite, so any genuinely positive successor counts.
    """
    arr = np.asarray(values, dtype=np.float64)
    flags = np.zeros(arr.shape[0], dtype=bool)
    if arr.shape[0] < 2:
        return flags
    prev = arr[:-1]
    cur = arr[1:]
    guarded = prev > ZERO_GUARD_KW
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_rise = (cur - prev) / prev > threshold
    flags[1:] = np.where(guarded, ratio_rise, cur > ZERO_GUARD_KW)
    return flags


def count_peaks(values, threshold: float = DEFAULT_PEAK_THRESHOLD) -> int:
    """Number of consecutive-pair relative rises above ``threshold``.

    Only pairs with both endpoints inside ``values`` are considered, so
    the first sample never contributes a pair.
    """
    if threshold <= 0:
        raise ValueError(f"peak threshold must be > 0, got {threshold}")
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyWindowError("window must contain at least one sample")
    return int(rise_flags(arr, threshold).sum())
