"""Seeded generators for synthetic fleet telemetry.

Two datasets:

* ``gen_mileage_fleet``: cumulative daily mileage over a year for private
  users (short/average/long distance, with occasional holiday-trip jumps)
  and carsharing vehicles (high, steady daily mileage).
* ``gen_temperature_day``: minute-wise semiconductor temperature and
  mileage over one day. Temperature relaxes exponentially toward a
  maximum while the car is on and back to ambient while it is off.

Every device draws from its own Philox stream keyed by
``(seed, device index, stream)``, so a device's data do not depend on how
many other devices are generated or in which order. Within a stream, draws
are consumed day by day (minute by minute), i.e. the counter runs along
time.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources

import numpy as np

from .errors import DomainError
from .smoothing import RawSeries

__all__ = [
    "FleetConfig",
    "DayConfig",
    "SimulatedTelemetry",
    "gen_mileage_fleet",
    "gen_temperature_day",
    "device_rng",
    "load_default_config",
]

FLEET_GROUPS = ("short", "average", "long", "carsharing")
DAY_GROUPS = ("regular", "cold", "carsharing")

_STREAM_BEHAVIOUR = 0
_STREAM_NOISE = 1


def device_rng(seed: int, device: int, stream: int) -> np.random.Generator:
    """Counter-based generator for one device and one purpose."""
    if seed < 0 or device < 0:
        raise DomainError("seed and device index must be nonnegative")
    key = np.array([seed, (device << 8) | stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class FleetConfig:
    """Parameters of the yearly mileage fleet (km, days)."""

    counts: dict = field(default_factory=lambda: {
        "short": 50, "average": 100, "long": 36, "carsharing": 14})
    days: int = 365
    daily_mean: dict = field(default_factory=lambda: {
        "short": 12.0, "average": 35.0, "long": 75.0, "carsharing": 350.0})
    daily_cv: dict = field(default_factory=lambda: {
        "short": 0.8, "average": 0.8, "long": 0.8, "carsharing": 0.25})
    # spread of the per-device mean around the group mean (log scale)
    device_spread: float = 0.2
    jump_prob: dict = field(default_factory=lambda: {
        "short": 0.02, "average": 0.02, "long": 0.02, "carsharing": 0.002})
    jump_median: float = 400.0
    jump_sigma: float = 0.5
    noise_sd: float = 0.5
    seed: int = 0

    def __post_init__(self):
        _check_groups(self.counts, FLEET_GROUPS, "counts")
        for name in ("daily_mean", "daily_cv", "jump_prob"):
            _check_groups(getattr(self, name), FLEET_GROUPS, name)
        if any(int(c) < 0 for c in self.counts.values()):
            raise DomainError("group counts must be >= 0")
        if sum(int(c) for c in self.counts.values()) < 4:
            raise DomainError("the fleet needs at least 4 devices")
        if self.days < 2:
            raise DomainError("days must be >= 2")
        if any(v < 0 for v in self.daily_mean.values()) or any(v < 0 for v in self.daily_cv.values()):
            raise DomainError("daily means and spreads must be >= 0")
        if any(not 0 <= v <= 1 for v in self.jump_prob.values()):
            raise DomainError("jump probabilities must lie in [0, 1]")
        if min(self.device_spread, self.jump_sigma, self.noise_sd) < 0 or self.jump_median < 0:
            raise DomainError("spreads must be >= 0")
        if self.seed < 0:
            raise DomainError("seed must be >= 0")


@dataclass(frozen=True)
class DayConfig:
    """Parameters of the minute-wise temperature/mileage day."""

    n_regular: int = 96
    n_cold: int = 2
    n_carsharing: int = 2
    minutes: int = 1440
    ambient: dict = field(default_factory=lambda: {
        "regular": 20.0, "cold": -30.0, "carsharing": 20.0})
    max_temp: float = 85.0
    tau_rise: float = 10.0
    tau_decay: float = 20.0
    # trips per day: fixed minimum plus a Poisson number of extra trips
    trips_min: dict = field(default_factory=lambda: {
        "regular": 1, "cold": 1, "carsharing": 12})
    trips_extra_mean: dict = field(default_factory=lambda: {
        "regular": 1.5, "cold": 1.5, "carsharing": 8.0})
    # private trips start around the commute peaks (hours, sd in hours)
    commute_peaks: tuple = (8.0, 17.5)
    commute_sd: float = 1.0
    # carsharing vehicles are booked around the clock (hours)
    sharing_window: tuple = (0.0, 24.0)
    trip_median_minutes: dict = field(default_factory=lambda: {
        "regular": 25.0, "cold": 25.0, "carsharing": 12.0})
    trip_sigma: float = 0.4
    speed_mean: dict = field(default_factory=lambda: {
        "regular": 55.0, "cold": 55.0, "carsharing": 30.0})
    speed_sd: float = 8.0
    temp_noise_sd: float = 0.5
    mileage_noise_sd: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("ambient", "trips_min", "trips_extra_mean", "trip_median_minutes",
                     "speed_mean"):
            _check_groups(getattr(self, name), DAY_GROUPS, name)
        if min(self.n_regular, self.n_cold, self.n_carsharing) < 0:
            raise DomainError("group counts must be >= 0")
        if self.n_regular + self.n_cold + self.n_carsharing < 4:
            raise DomainError("the sample needs at least 4 devices")
        if self.minutes < 2:
            raise DomainError("minutes must be >= 2")
        if not (self.tau_rise > 0 and self.tau_decay > 0):
            raise DomainError("thermal time constants must be positive")
        if not all(self.max_temp > a for a in self.ambient.values()):
            raise DomainError("max_temp must exceed every ambient temperature")
        if any(v < 0 for v in self.trips_min.values()) or any(
                v < 0 for v in self.trips_extra_mean.values()):
            raise DomainError("trip counts must be >= 0")
        if min(self.commute_sd, self.trip_sigma, self.speed_sd, self.temp_noise_sd,
               self.mileage_noise_sd) < 0:
            raise DomainError("spreads must be >= 0")
        if self.seed < 0:
            raise DomainError("seed must be >= 0")

    @property
    def n(self) -> int:
        return self.n_regular + self.n_cold + self.n_carsharing


def _check_groups(d, groups, name):
    if not isinstance(d, dict) or set(d) != set(groups):
        raise DomainError(f"{name} needs exactly the groups {list(groups)}")


def _config_from_dict(cls, d):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise DomainError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
    return cls(**kwargs)


def fleet_config_from_dict(d: dict) -> FleetConfig:
    return _config_from_dict(FleetConfig, d)


def day_config_from_dict(d: dict) -> DayConfig:
    return _config_from_dict(DayConfig, d)


def config_to_dict(cfg) -> dict:
    out = asdict(cfg)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


def load_default_config(kind: str) -> dict:
    """Versioned default simulation parameters shipped with the package."""
    if kind not in ("fleet", "day"):
        raise DomainError(f"unknown simulation kind {kind!r}")
    text = resources.files("missionprofile").joinpath("configs", f"{kind}.json").read_text()
    return json.loads(text)


@dataclass(frozen=True, eq=False)
class SimulatedTelemetry:
    """Raw series per device plus group labels."""

    device_ids: tuple[str, ...]
    groups: tuple[str, ...]
    coordinates: tuple[str, ...]
    series: tuple[tuple[RawSeries, ...], ...]
    domain_end: float

    @property
    def n(self) -> int:
        return len(self.device_ids)

    def group_indices(self, group: str) -> np.ndarray:
        return np.array([i for i, g in enumerate(self.groups) if g == group], dtype=int)


# -- yearly mileage fleet ------------------------------------------------------

def _daily_increments(rng, days, mean, cv, spread, jump_p, jump_median, jump_sigma):
    dev_mean = mean * rng.lognormal(0.0, spread) if spread > 0 else mean
    if cv > 0 and dev_mean > 0:
        shape = 1.0 / cv ** 2
        inc = rng.gamma(shape, dev_mean / shape, size=days - 1)
    else:
        inc = np.full(days - 1, dev_mean)
    jumps = rng.random(days - 1) < jump_p
    extra = rng.lognormal(np.log(jump_median), jump_sigma, size=days - 1) if jump_median > 0 \
        else np.zeros(days - 1)
    return inc + np.where(jumps, extra, 0.0)


def gen_mileage_fleet(config: FleetConfig | None = None) -> SimulatedTelemetry:
    """Cumulative daily mileage (km) for every device; ``t`` in hours."""
    cfg = config or FleetConfig()
    days = cfg.days
    t = np.arange(days, dtype=float) * 24.0
    ids, groups, series = [], [], []
    idx = 0
    for group in FLEET_GROUPS:
        for _ in range(int(cfg.counts[group])):
            rng = device_rng(cfg.seed, idx, _STREAM_BEHAVIOUR)
            inc = _daily_increments(rng, days, cfg.daily_mean[group], cfg.daily_cv[group],
                                    cfg.device_spread, cfg.jump_prob[group],
                                    cfg.jump_median, cfg.jump_sigma)
            mileage = np.concatenate([[0.0], np.cumsum(inc)])
            if cfg.noise_sd > 0:
                noise = device_rng(cfg.seed, idx, _STREAM_NOISE).normal(0.0, cfg.noise_sd, days)
                mileage = mileage + noise
            did = f"dev{idx:04d}"
            ids.append(did)
            groups.append(group)
            series.append((RawSeries(did, 0, t, mileage),))
            idx += 1
    return SimulatedTelemetry(tuple(ids), tuple(groups), ("mileage",), tuple(series),
                              float(t[-1]))


# -- minute-wise temperature day -----------------------------------------------

def _trip_schedule(rng, cfg: DayConfig, group: str):
    """Boolean on/off state per minute and the number of trips drawn."""
    M = cfg.minutes
    n_trips = int(cfg.trips_min[group]) + int(rng.poisson(cfg.trips_extra_mean[group]))
    on = np.zeros(M, dtype=bool)
    for k in range(n_trips):
        if group == "carsharing":
            start_h = rng.uniform(*cfg.sharing_window)
        else:
            peak = cfg.commute_peaks[k % len(cfg.commute_peaks)]
            start_h = rng.normal(peak, cfg.commute_sd)
        dur = rng.lognormal(np.log(cfg.trip_median_minutes[group]), cfg.trip_sigma)
        start = int(np.clip(round(start_h * 60.0), 0, M - 1))
        stop = int(np.clip(start + max(1, round(dur)), 0, M))
        on[start:stop] = True
    return on, n_trips


def _thermal_path(on, ambient, max_temp, tau_rise, tau_decay):
    a_rise = np.exp(-1.0 / tau_rise)
    a_decay = np.exp(-1.0 / tau_decay)
    temp = np.empty(len(on))
    cur = ambient
    for k, state in enumerate(on):
        if state:
            cur = max_temp + (cur - max_temp) * a_rise
        else:
            cur = ambient + (cur - ambient) * a_decay
        temp[k] = cur
    return temp


def simulate_day_device(cfg: DayConfig, idx: int, group: str):
    """Noise-free temperature, mileage and trip count for one device."""
    rng = device_rng(cfg.seed, idx, _STREAM_BEHAVIOUR)
    on, n_trips = _trip_schedule(rng, cfg, group)
    speed = max(1.0, rng.normal(cfg.speed_mean[group], cfg.speed_sd))
    temp = _thermal_path(on, cfg.ambient[group], cfg.max_temp, cfg.tau_rise, cfg.tau_decay)
    mileage = np.cumsum(on * (speed / 60.0))
    return temp, mileage, on, n_trips


def gen_temperature_day(config: DayConfig | None = None) -> SimulatedTelemetry:
    """Temperature (deg C) and mileage (km) per minute; ``t`` in hours."""
    cfg = config or DayConfig()
    t = np.arange(cfg.minutes, dtype=float) / 60.0
    plan = (["regular"] * cfg.n_regular + ["cold"] * cfg.n_cold
            + ["carsharing"] * cfg.n_carsharing)
    ids, series = [], []
    for idx, group in enumerate(plan):
        temp, mileage, _, _ = simulate_day_device(cfg, idx, group)
        noise = device_rng(cfg.seed, idx, _STREAM_NOISE)
        if cfg.temp_noise_sd > 0:
            temp = temp + noise.normal(0.0, cfg.temp_noise_sd, cfg.minutes)
        if cfg.mileage_noise_sd > 0:
            mileage = mileage + noise.normal(0.0, cfg.mileage_noise_sd, cfg.minutes)
        did = f"dev{idx:04d}"
        ids.append(did)
        series.append((RawSeries(did, 0, t, temp), RawSeries(did, 1, t, mileage)))
    return SimulatedTelemetry(tuple(ids), tuple(plan), ("temperature", "mileage"),
                              tuple(series), float(t[-1]))
