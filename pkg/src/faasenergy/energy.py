"""Excess-energy accounting over simulated occupancy, plus power-meter integration.

Excess energy is the energy spent starting workers and keeping idle workers
around. Time spent executing a request counts as productive and is left out.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from faasenergy.simcore import SimResult


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class IsolationProfile:
    name: str
    start_energy_j: float
    idle_power_w: float
    warm_pool: bool = True
    reserve_accounting: bool = False

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise ProfileError("profile name must be a non-empty string")
        for attr in ("start_energy_j", "idle_power_w"):
            value = getattr(self, attr)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ProfileError(f"profile {self.name!r}: {attr} must be a finite number, got {value!r}")
            if value < 0:
                raise ProfileError(f"profile {self.name!r}: {attr} must be >= 0, got {value!r}")
        for attr in ("warm_pool", "reserve_accounting"):
            if not isinstance(getattr(self, attr), bool):
                raise ProfileError(f"profile {self.name!r}: {attr} must be true or false")
        if self.reserve_accounting and not self.warm_pool:
            raise ProfileError(f"profile {self.name!r}: reserve_accounting requires warm_pool")


_FIELDS = tuple(f.name for f in fields(IsolationProfile))


def builtin_profiles() -> list[IsolationProfile]:
    text = resources.files("faasenergy").joinpath("profiles.json").read_text(encoding="utf-8")
    return [IsolationProfile(**entry) for entry in json.loads(text)]


def load_profiles(source: BinaryIO | bytes | None = None) -> list[IsolationProfile]:
    """Built-in profiles, updated by the entries of an optional JSON profiles file.

    The file holds a JSON array of objects. An entry naming a built-in profile
    may give only the fields it changes; any other entry defines a new
    profile and must give ``start_energy_j`` and ``idle_power_w``.
    """
    profiles = {p.name: p for p in builtin_profiles()}
    data = b"" if source is None else (source if isinstance(source, (bytes, bytearray)) else source.read())
    if not bytes(data).strip():
        return list(profiles.values())
    try:
        entries = json.loads(bytes(data).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProfileError(f"profiles file is not valid JSON: {exc}") from None
    if not isinstance(entries, list):
        raise ProfileError("profiles file must contain a JSON array")
    seen = set()
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ProfileError(f"profile entry #{i} must be an object with a 'name'")
        name = entry["name"]
        if name in seen:
            raise ProfileError(f"duplicate profile name {name!r}")
        seen.add(name)
        unknown = set(entry) - set(_FIELDS)
        if unknown:
            raise ProfileError(f"profile {name!r}: unknown field(s) {sorted(unknown)}")
        if name in profiles:
            merged = {**asdict(profiles[name]), **entry}
        else:
            missing = [f for f in ("start_energy_j", "idle_power_w") if f not in entry]
            if missing:
                raise ProfileError(f"profile {name!r}: missing field(s) {missing}")
            merged = entry
        profiles[name] = IsolationProfile(**merged)
    return list(profiles.values())


def read_profiles(path=None) -> list[IsolationProfile]:
    if path is None:
        return load_profiles()
    with open(path, "rb") as fh:
        return load_profiles(fh)


@dataclass(frozen=True, eq=False)
class EnergySeries:
    profile: str
    cumulative_j: np.ndarray

    def __post_init__(self):
        arr = np.array(self.cumulative_j, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "cumulative_j", arr)

    @property
    def total_j(self) -> float:
        return float(self.cumulative_j[-1]) if len(self.cumulative_j) else 0.0

    @property
    def avg_excess_power_w(self) -> float:
        n = len(self.cumulative_j)
        return self.total_j / n if n else 0.0

    def __len__(self) -> int:
        return len(self.cumulative_j)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EnergySeries):
            return NotImplemented
        return self.profile == other.profile and np.array_equal(self.cumulative_j, other.cumulative_j)


def excess_energy(result: SimResult, profile: IsolationProfile, capacity: int | None = None) -> EnergySeries:
    """Cumulative excess joules at each timestep.

    Starts and idle worker-seconds are accumulated as exact integers and each
    multiplied by its coefficient once per timestep. A profile with zero idle
    power therefore yields exactly ``start_energy_j * requests so far``.
    """
    if profile.reserve_accounting:
        if capacity is None:
            raise ValueError(f"profile {profile.name!r} needs a reserve capacity")
        peak = result.totals.peak_total_workers
        if capacity < peak:
            raise ValueError(f"capacity {capacity} is below the observed peak of {peak} workers")
    starts = result.cold_starts if profile.warm_pool else result.arrivals
    cum_starts = np.cumsum(starts, dtype=np.int64)
    cum = profile.start_energy_j * cum_starts.astype(np.float64)
    if profile.warm_pool and profile.idle_power_w > 0:
        idle_base = (capacity - result.busy) if profile.reserve_accounting else result.idle
        cum = cum + profile.idle_power_w * np.cumsum(idle_base, dtype=np.int64).astype(np.float64)
    return EnergySeries(profile.name, cum)


def break_even_idle(profile: IsolationProfile) -> float:
    """Idle seconds after which keeping a worker warm costs more than a fresh start."""
    if profile.idle_power_w == 0:
        raise ValueError(f"profile {profile.name!r} has zero idle power; break-even idle time is infinite")
    return profile.start_energy_j / profile.idle_power_w


# -- power meter samples -------------------------------------------------------


@dataclass(frozen=True)
class PowerSample:
    t_s: float
    power_w: float


def _sample_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(samples, np.ndarray):
        arr = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]
    pairs = [(s.t_s, s.power_w) if isinstance(s, PowerSample) else tuple(s) for s in samples]
    if not pairs:
        return np.zeros(0), np.zeros(0)
    arr = np.array(pairs, dtype=np.float64)
    return arr[:, 0], arr[:, 1]


def integrate_power(samples: Sequence[PowerSample] | np.ndarray, t0: float, t1: float) -> float:
    """Trapezoidal energy (J) over [t0, t1], interpolating linearly at the window edges."""
    times, power = _sample_arrays(samples)
    if not t0 < t1:
        raise ValueError(f"window must satisfy t0 < t1, got [{t0}, {t1}]")
    if len(times) == 0:
        raise ValueError("no power samples")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample timestamps must be strictly increasing")
    if not (np.isfinite(times).all() and np.isfinite(power).all()):
        raise ValueError("samples must be finite")
    if times[0] > t0 or times[-1] < t1:
        raise ValueError(f"window [{t0}, {t1}] is outside sample coverage [{times[0]}, {times[-1]}]")
    inner = (times > t0) & (times < t1)
    x = np.concatenate([[t0], times[inner], [t1]])
    y = np.concatenate([[np.interp(t0, times, power)], power[inner], [np.interp(t1, times, power)]])
    return math.fsum(((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2).tolist())


def parse_power_samples(source: BinaryIO | bytes) -> list[PowerSample]:
    """Read a ``t_s,power_w`` CSV."""
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    reader = csv.reader(io.StringIO(bytes(data).decode("utf-8-sig")))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["t_s", "power_w"]:
        raise ValueError("power samples CSV must have header 't_s,power_w'")
    out = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ValueError(f"line {line}: expected 2 fields, got {len(row)}")
        try:
            t, p = float(row[0]), float(row[1])
        except ValueError:
            raise ValueError(f"line {line}: non-numeric field in {','.join(row)!r}") from None
        if p < 0:
            raise ValueError(f"line {line}: power_w must be >= 0, got {p}")
        if out and t <= out[-1].t_s:
            raise ValueError(f"line {line}: timestamps must be strictly increasing")
        out.append(PowerSample(t, p))
    if not out:
        raise ValueError("power samples CSV has no rows")
    return out


def profile_by_name(profiles: Iterable[IsolationProfile], name: str) -> IsolationProfile:
    for p in profiles:
        if p.name == name:
            return p
    raise KeyError(f"unknown profile {name!r}")
