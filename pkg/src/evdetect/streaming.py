"""Constant-memory streaming computation of the online feature vector.

`OnlineFeatureExtractor.push` consumes one sample and returns the same
13-value vector that batch extraction would produce at that step:

* rolling mean/variance/std via incrementally maintained sums (matches
  the batch values to ~1e-12 relative; the batch reduction order differs),
* rolling min/max via monotonic index deques (exact),
* rolling median via a two-heap order-statistics structure with lazy
  deletion (exact),
* rolling peak count via a deque of qualifying pair positions (exact).

Amortized work per push is O(log window); retained state is the ring
buffer of the largest window plus auxiliary structures proportional to
it (heaps are compacted once lazily deleted entries outnumber live ones).
"""

from __future__ import annotations

import math
from collections import deque
from heapq import heappop, heappush, heapify

from .features import OnlineFeatureConfig
from .windows import ZERO_GUARD_KW


class InvalidSampleError(ValueError):
    pass


class _SlidingMedian:
    """Median of a sliding multiset: max-heap of the lower half, min-heap
    of the upper half, deletions applied lazily when they reach a top."""

    __slots__ = ("lo", "hi", "lo_live", "hi_live", "dead", "n_dead")

    def __init__(self):
        self.lo = []            # negated values
        self.hi = []
        self.lo_live = 0
        self.hi_live = 0
        self.dead = {}
        self.n_dead = 0

    def _prune_lo(self):
        lo, dead = self.lo, self.dead
        while lo:
            v = -lo[0]
            cnt = dead.get(v, 0)
            if not cnt:
                break
            dead[v] = cnt - 1
            if cnt == 1:
                del dead[v]
            self.n_dead -= 1
            heappop(lo)

    def _prune_hi(self):
        hi, dead = self.hi, self.dead
        while hi:
            v = hi[0]
            cnt = dead.get(v, 0)
            if not cnt:
                break
            dead[v] = cnt - 1
            if cnt == 1:
                del dead[v]
            self.n_dead -= 1
            heappop(hi)

    def _rebalance(self):
        if self.lo_live > self.hi_live + 1:
            self._prune_lo()
            heappush(self.hi, -heappop(self.lo))
            self.lo_live -= 1
            self.hi_live += 1
        elif self.hi_live > self.lo_live:
            self._prune_hi()
            heappush(self.lo, -heappop(self.hi))
            self.hi_live -= 1
            self.lo_live += 1

    def add(self, v: float):
        self._prune_lo()
        if self.lo_live == 0 or v <= -self.lo[0]:
            heappush(self.lo, -v)
            self.lo_live += 1
        else:
            heappush(self.hi, v)
            self.hi_live += 1
        self._rebalance()

    def remove(self, v: float):
        # v is guaranteed to be in the window; identical values may sit on
        # either side, and charging the side by comparison with the lower
        # top keeps the partition point correct.
        self._prune_lo()
        self.dead[v] = self.dead.get(v, 0) + 1
        self.n_dead += 1
        if self.lo_live and v <= -self.lo[0]:
            self.lo_live -= 1
            self._prune_lo()
        else:
            self.hi_live -= 1
            self._prune_hi()
        self._rebalance()
        if self.n_dead > self.lo_live + self.hi_live + 16:
            self._compact()

    def _compact(self):
        dead = self.dead
        live = []
        for heap, sign in ((self.lo, -1.0), (self.hi, 1.0)):
            for raw in heap:
                v = sign * raw if sign < 0 else raw
                cnt = dead.get(v, 0)
                if cnt:
                    if cnt == 1:
                        del dead[v]
                    else:
                        dead[v] = cnt - 1
                else:
                    live.append(v)
        live.sort()
        k = (len(live) + 1) // 2
        self.lo = [-v for v in live[:k]]
        self.lo.reverse()
        heapify(self.lo)
        self.hi = live[k:]
        self.lo_live = k
        self.hi_live = len(live) - k
        self.n_dead = 0

    def median(self) -> float:
        self._prune_lo()
        if self.lo_live > self.hi_live:
            return -self.lo[0]
        self._prune_hi()
        return (-self.lo[0] + self.hi[0]) / 2


class _WindowChannel:
    """Sums plus min/max deques plus median for one backward window."""

    __slots__ = ("length", "width", "s1", "s2", "mins", "maxs", "median")

    def __init__(self, length: int):
        self.length = length          # window covers [t-length, t]
        self.width = length + 1       # max sample count
        self.s1 = 0.0
        self.s2 = 0.0
        self.mins = deque()
        self.maxs = deque()
        self.median = _SlidingMedian()


class OnlineFeatureExtractor:
    """Single-owner mutable state producing online features per sample."""

    def __init__(self, config: OnlineFeatureConfig | None = None):
        if config is None:
            config = OnlineFeatureConfig()
        self.config = config
        self.column_names = config.column_names
        cap = config.window_length + 1
        if config.short_window_length > config.window_length:
            cap = config.short_window_length + 1
        self._cap = cap
        self._buf = [0.0] * cap
        self._k = 0
        self._long = _WindowChannel(config.window_length)
        self._short = _WindowChannel(config.short_window_length)
        self._peaks = deque()
        self._threshold = config.peak_threshold

    @property
    def samples_seen(self) -> int:
        return self._k

    def _push_channel(self, ch: _WindowChannel, k: int, v: float, buf, cap):
        if k >= ch.width:
            old = buf[(k - ch.width) % cap]
            ch.s1 -= old
            ch.s2 -= old * old
            ch.median.remove(old)
        ch.s1 += v
        ch.s2 += v * v
        ch.median.add(v)
        horizon = k - ch.length
        mins = ch.mins
        while mins and mins[-1][1] >= v:
            mins.pop()
        mins.append((k, v))
        while mins[0][0] < horizon:
            mins.popleft()
        maxs = ch.maxs
        while maxs and maxs[-1][1] <= v:
            maxs.pop()
        maxs.append((k, v))
        while maxs[0][0] < horizon:
            maxs.popleft()

    def push(self, value: float) -> list[float]:
        """Consume one sample; return the 13 online features at this step."""
        v = float(value)
        if not math.isfinite(v) or v < 0.0:
            raise InvalidSampleError(f"sample must be finite and >= 0, got {value!r}")
        k = self._k
        buf = self._buf
        cap = self._cap
        long_ch = self._long
        short_ch = self._short

        if k > 0:
            prev = buf[(k - 1) % cap]
            if prev > ZERO_GUARD_KW:
                is_rise = (v - prev) / prev > self._threshold
            else:
                is_rise = v > ZERO_GUARD_KW
            if is_rise:
                self._peaks.append(k)
        peaks = self._peaks
        horizon = k - long_ch.length + 1
        while peaks and peaks[0] < horizon:
            peaks.popleft()

        self._push_channel(long_ch, k, v, buf, cap)
        self._push_channel(short_ch, k, v, buf, cap)
        buf[k % cap] = v
        self._k = k + 1

        out = []
        for ch in (long_ch, short_ch):
            cnt = k + 1 if k + 1 < ch.width else ch.width
            mean = ch.s1 / cnt
            var = ch.s2 / cnt - mean * mean
            if var < 0.0:
                var = 0.0
            out.append(mean)
            out.append(math.sqrt(var))
            out.append(var)
            out.append(ch.mins[0][1])
            out.append(ch.maxs[0][1])
            out.append(ch.median.median())
        out.append(float(len(peaks)))
        return out
