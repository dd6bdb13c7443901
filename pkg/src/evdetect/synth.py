"""Seedable generator of labeled household and feeder load series.

Household load is a sinusoidal daily shape plus Gaussian noise (clipped
at zero) plus appliance rectangles drawn from a Poisson process: each
appliance event holds a constant power from ``appliance_spike_kw_range``
for 10 to 120 minutes, so simultaneous appliances across the households
of a feeder sum into sustained blocks that overlap the EV power range.
That aggregation ambiguity is what makes feeder-level detection harder
than household-level detection.

EV charging is modeled as constant-power rectangles: session counts are
Poisson per day, start hours follow an evening-peaked distribution,
power and duration are uniform in configurable ranges, and overlapping
sessions merge by taking the pointwise maximum. Feeder load is the
pointwise sum over member households and a feeder step is labeled
positive when at least one member household is charging.

All draws flow from per-household seeds derived positionally via
``seeding.mix_seed(rng_seed, feeder_index, household_index)``, so corpora
are reproducible regardless of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .seeding import mix_seed
from .series import (
    ChargingLabelSeries,
    FeederRecordSet,
    HouseholdRecordSet,
    LoadSeries,
    SeriesError,
    labels_from_ev_load,
)

MINUTES_PER_DAY = 1440

#: Appliance events hold their power for a uniform 10..120 minutes.
APPLIANCE_DURATION_RANGE = (10, 120)

#: Per-household diversity drawn once from the household seed: the base
#: level and daily amplitude are scaled by these uniform factors and the
#: evening peak is shifted by up to +-3 hours, so feeders differ from one
#: another the way real household mixes do.
BASE_MEAN_FACTOR_RANGE = (0.6, 1.5)
BASE_AMPLITUDE_FACTOR_RANGE = (0.7, 1.4)
PEAK_HOUR_SHIFT_RANGE = (-3.0, 3.0)

DEFAULT_START = datetime(2018, 1, 1, tzinfo=timezone.utc)

#: Relative weight of each start hour 0..23; evening peak around 18-21.
DEFAULT_EV_START_HOUR_WEIGHTS = (
    2.0, 1.0, 1.0, 1.0, 1.0, 1.0,       # 00-05
    1.0, 2.0, 3.0, 3.0, 3.0, 3.0,       # 06-11
    3.0, 3.0, 3.0, 4.0, 6.0, 9.0,       # 12-17
    12.0, 14.0, 12.0, 9.0, 6.0, 3.0,    # 18-23
)


class InvalidParamsError(ValueError):
    pass


@dataclass(frozen=True)
class HouseholdProfileParams:
    """Shape of one household's base load and EV charging behavior."""

    base_load_mean: float = 0.9
    base_load_daily_amplitude: float = 0.5
    noise_std: float = 0.25
    appliance_spike_rate: float = 10.0           # events/day
    appliance_spike_kw_range: tuple = (0.8, 3.2)
    ev_present: bool = True
    ev_power_range: tuple = (3.3, 7.2)
    ev_sessions_per_day_mean: float = 0.35
    ev_duration_minutes_range: tuple = (30, 420)
    ev_start_hour_distribution: tuple = DEFAULT_EV_START_HOUR_WEIGHTS

    def __post_init__(self):
        for name in ("base_load_mean", "base_load_daily_amplitude",
                     "noise_std", "appliance_spike_rate",
                     "ev_sessions_per_day_mean"):
            if getattr(self, name) < 0:
                raise InvalidParamsError(f"{name} must be >= 0")
        for name in ("appliance_spike_kw_range", "ev_power_range",
                     "ev_duration_minutes_range"):
            lo, hi = getattr(self, name)
            if not (0 <= lo <= hi):
                raise InvalidParamsError(f"{name} must satisfy 0 <= low <= high")
        weights = self.ev_start_hour_distribution
        if len(weights) != 24 or any(w < 0 for w in weights) or sum(weights) <= 0:
            raise InvalidParamsError(
                "ev_start_hour_distribution needs 24 non-negative weights"
            )


@dataclass(frozen=True)
class FeederSynthConfig:
    """Size, duration, and seeding of a synthetic feeder corpus."""

    num_feeders: int
    days: int
    households_per_feeder: int = 3
    rng_seed: int = 0
    household_params: HouseholdProfileParams = field(
        default_factory=HouseholdProfileParams
    )

    def __post_init__(self):
        if self.num_feeders < 1:
            raise InvalidParamsError("num_feeders must be >= 1")
        if self.households_per_feeder < 1:
            raise InvalidParamsError("households_per_feeder must be >= 1")
        if self.days < 1:
            raise InvalidParamsError("days must be >= 1")

    def params_for(self, household_index: int) -> HouseholdProfileParams:
        params = self.household_params
        if isinstance(params, HouseholdProfileParams):
            return params
        return params[household_index % len(params)]


@dataclass(frozen=True)
class EvSession:
    """One charging rectangle before merging with its neighbors."""

    start_minute: int
    duration_minutes: int
    power_kw: float


def draw_ev_sessions(params: HouseholdProfileParams, days: int,
                     rng: np.random.Generator) -> list[EvSession]:
    """Draw the charging sessions for one household, day by day."""
    weights = np.asarray(params.ev_start_hour_distribution, dtype=np.float64)
    probs = weights / weights.sum()
    dur_lo, dur_hi = params.ev_duration_minutes_range
    pow_lo, pow_hi = params.ev_power_range
    sessions = []
    for day in range(days):
        for _ in range(int(rng.poisson(params.ev_sessions_per_day_mean))):
            hour = int(rng.choice(24, p=probs))
            minute = int(rng.integers(0, 60))
            duration = int(rng.integers(dur_lo, dur_hi + 1))
            power = float(rng.uniform(pow_lo, pow_hi))
            sessions.append(EvSession(
                start_minute=day * MINUTES_PER_DAY + hour * 60 + minute,
                duration_minutes=duration,
                power_kw=power,
            ))
    return sessions


def ev_load_from_sessions(sessions, n_samples: int) -> np.ndarray:
    """Merge sessions into a per-minute EV load (pointwise max on overlap),
    truncated at the end of the series."""
    ev = np.zeros(n_samples, dtype=np.float64)
    for s in sessions:
        lo = s.start_minute
        hi = min(lo + s.duration_minutes, n_samples)
        if lo < n_samples and hi > lo:
            np.maximum(ev[lo:hi], s.power_kw, out=ev[lo:hi])
    return ev


def generate_household(params: HouseholdProfileParams, days: int, seed: int,
                       household_id: str | None = None,
                       start: datetime = DEFAULT_START) -> HouseholdRecordSet:
    """Deterministically generate one household's minute-interval records."""
    if days < 1:
        raise InvalidParamsError("days must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = days * MINUTES_PER_DAY

    mean_factor = rng.uniform(*BASE_MEAN_FACTOR_RANGE)
    amp_factor = rng.uniform(*BASE_AMPLITUDE_FACTOR_RANGE)
    peak_hour = 19.0 + rng.uniform(*PEAK_HOUR_SHIFT_RANGE)
    hours = (np.arange(n) % MINUTES_PER_DAY) / 60.0
    shape = (params.base_load_mean * mean_factor
             + params.base_load_daily_amplitude * amp_factor
             * np.cos(2.0 * np.pi * (hours - peak_hour) / 24.0))
    noise = rng.normal(0.0, params.noise_std, n) if params.noise_std > 0 else 0.0
    base = np.clip(shape + noise, 0.0, None)

    spikes = np.zeros(n, dtype=np.float64)
    n_spikes = int(rng.poisson(params.appliance_spike_rate * days))
    if n_spikes:
        positions = rng.integers(0, n, n_spikes)
        lo, hi = params.appliance_spike_kw_range
        magnitudes = rng.uniform(lo, hi, n_spikes)
        d_lo, d_hi = APPLIANCE_DURATION_RANGE
        durations = rng.integers(d_lo, d_hi + 1, n_spikes)
        for pos, mag, dur in zip(positions, magnitudes, durations):
            spikes[pos: pos + dur] += mag

    if params.ev_present:
        ev = ev_load_from_sessions(draw_ev_sessions(params, days, rng), n)
    else:
        ev = np.zeros(n, dtype=np.float64)

    load = base + spikes + ev
    if household_id is None:
        household_id = f"household-{seed & 0xFFFFFFFFFFFFFFFF:016x}"
    return HouseholdRecordSet(
        household_id=household_id,
        load=LoadSeries(start, load),
        ev_load=LoadSeries(start, ev),
        labels=labels_from_ev_load(ev),
    )


def aggregate_feeder(households, feeder_id: str) -> FeederRecordSet:
    """Sum member loads pointwise and OR their labels."""
    if not households:
        raise InvalidParamsError("a feeder needs at least one household")
    first = households[0]
    for h in households[1:]:
        if len(h.load) != len(first.load):
            raise SeriesError("household series lengths differ")
        if h.load.start != first.load.start or h.load.interval_s != first.load.interval_s:
            raise SeriesError("household series timestamps differ")
    load = np.sum(np.stack([h.load.values for h in households]), axis=0)
    labels = np.zeros(len(first.load), dtype=np.uint8)
    for h in households:
        np.bitwise_or(labels, h.labels.labels, out=labels)
    return FeederRecordSet(
        feeder_id=feeder_id,
        household_ids=tuple(h.household_id for h in households),
        load=LoadSeries(first.load.start, load, first.load.interval_s),
        labels=ChargingLabelSeries(labels),
    )


@dataclass(frozen=True)
class BenchmarkCorpus:
    feeders: tuple
    households: dict       # feeder_id -> tuple of HouseholdRecordSet
    manifest: dict


def generate_benchmark(config: FeederSynthConfig,
                       start: datetime = DEFAULT_START) -> BenchmarkCorpus:
    """Generate ``num_feeders`` labeled feeders plus a manifest of every
    parameter and derived seed used."""
    feeders = []
    households = {}
    manifest_feeders = []
    for f in range(config.num_feeders):
        feeder_id = f"feeder-{f:03d}"
        members = []
        member_manifest = []
        for h in range(config.households_per_feeder):
            seed = mix_seed(config.rng_seed, f, h)
            record = generate_household(
                config.params_for(h), config.days, seed,
                household_id=f"{feeder_id}-hh-{h}", start=start,
            )
            members.append(record)
            member_manifest.append({"household_id": record.household_id,
                                    "seed": seed})
        feeder = aggregate_feeder(members, feeder_id)
        feeders.append(feeder)
        households[feeder_id] = tuple(members)
        manifest_feeders.append({
            "feeder_id": feeder_id,
            "households": member_manifest,
            "positive_rate": feeder.labels.positive_rate(),
        })

    params = config.household_params
    params_manifest = (
        _params_dict(params) if isinstance(params, HouseholdProfileParams)
        else [_params_dict(p) for p in params]
    )
    manifest = {
        "generator": "evdetect-synth",
        "format_version": 1,
        "num_feeders": config.num_feeders,
        "households_per_feeder": config.households_per_feeder,
        "days": config.days,
        "rng_seed": config.rng_seed,
        "interval_seconds": 60,
        "start": start.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "household_params": params_manifest,
        "seed_derivation": "mix_seed(rng_seed, feeder_index, household_index)",
        "feeders": manifest_feeders,
    }
    return BenchmarkCorpus(tuple(feeders), households, manifest)


def _params_dict(params: HouseholdProfileParams) -> dict:
    return {
        "base_load_mean": params.base_load_mean,
        "base_load_daily_amplitude": params.base_load_daily_amplitude,
        "noise_std": params.noise_std,
        "appliance_spike_rate": params.appliance_spike_rate,
        "appliance_spike_kw_range": list(params.appliance_spike_kw_range),
        "ev_present": params.ev_present,
        "ev_power_range": list(params.ev_power_range),
        "ev_sessions_per_day_mean": params.ev_sessions_per_day_mean,
        "ev_duration_minutes_range": list(params.ev_duration_minutes_range),
        "ev_start_hour_distribution": list(params.ev_start_hour_distribution),
    }
