"""Seeded synthetic diurnal workloads with load spikes.

Randomness comes from numpy's ``Generator(PCG64(seed))`` and the draws are
made in a fixed order, so a (spec, seed) pair always yields the same trace
for a given numpy release.

Per-second totals follow ``base_rps * (1 + A sin(2 pi t / 86400))``. Rather
than sampling them, the generator takes integer differences of the floored
rate integral, so the total over any whole number of days equals
``base_rps * horizon_s`` up to one request. Each second's total is split
across functions by a multinomial draw over Zipf popularity weights. Spikes
start at uniformly random seconds (their count is Poisson with mean
``spike_rate * horizon_s / 3600``). Each one sends ``(spike_magnitude - 1)``
times the current base rate to a single random function for
``spike_duration_s`` seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from faasenergy.trace import SECONDS_PER_DAY, Trace

_CHUNK_S = 4096


@dataclass(frozen=True)
class FixedDuration:
    ms: int

    def __post_init__(self):
        if self.ms < 1:
            raise ValueError(f"duration.ms must be >= 1, got {self.ms}")


@dataclass(frozen=True)
class LognormalDuration:
    """Execution time in ms whose natural log is normal(mu, sigma)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0 or not math.isfinite(self.mu):
            raise ValueError(f"invalid lognormal duration ({self.mu}, {self.sigma})")


@dataclass(frozen=True)
class SyntheticSpec:
    functions: int = 200
    horizon_s: int = SECONDS_PER_DAY
    base_rps: float = 500.0
    diurnal_amplitude: float = 0.5
    spike_rate: float = 2.0
    spike_magnitude: float = 5.0
    spike_duration_s: int = 10
    duration: FixedDuration | LognormalDuration = field(default_factory=lambda: LognormalDuration(6.0, 1.0))
    popularity_skew: float = 1.0

    def __post_init__(self):
        checks = {
            "functions": self.functions >= 1,
            "horizon_s": self.horizon_s >= 1,
            "base_rps": self.base_rps > 0,
            "diurnal_amplitude": 0 <= self.diurnal_amplitude <= 1,
            "spike_rate": self.spike_rate >= 0,
            "spike_magnitude": self.spike_magnitude > 0,
            "spike_duration_s": self.spike_duration_s >= 1,
            "popularity_skew": self.popularity_skew >= 0,
        }
        bad = [name for name, ok in checks.items() if not ok]
        if bad:
            values = ", ".join(f"{name}={getattr(self, name)!r}" for name in bad)
            raise ValueError(f"invalid synthetic spec: {values}")

    def expected_requests(self) -> float:
        """Analytic expectation of the total request count."""
        base = self.base_rps * self.horizon_s - self.base_rps * self.diurnal_amplitude * (
            SECONDS_PER_DAY / (2 * math.pi)
        ) * (math.cos(2 * math.pi * self.horizon_s / SECONDS_PER_DAY) - 1)
        spikes = self.spike_rate * self.horizon_s / 3600
        extra = spikes * self.spike_duration_s * max(self.spike_magnitude - 1, 0) * self.base_rps
        return base + extra


def function_ids(n: int) -> list[str]:
    width = max(3, len(str(n - 1)))
    return [f"f{i:0{width}d}" for i in range(n)]


def _rate_integral(spec: SyntheticSpec, t: np.ndarray) -> np.ndarray:
    w = 2 * np.pi / SECONDS_PER_DAY
    return spec.base_rps * (t - spec.diurnal_amplitude / w * (np.cos(w * t) - 1.0))


def per_second_base_load(spec: SyntheticSpec) -> np.ndarray:
    """Integer per-second totals before spikes."""
    edges = np.floor(_rate_integral(spec, np.arange(spec.horizon_s + 1, dtype=np.float64)))
    return np.diff(edges).astype(np.int64)


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Trace:
    rng = np.random.Generator(np.random.PCG64(seed))
    nfunc, horizon = spec.functions, spec.horizon_s

    weights = 1.0 / np.arange(1, nfunc + 1, dtype=np.float64) ** spec.popularity_skew
    weights /= weights.sum()

    n_spikes = int(rng.poisson(spec.spike_rate * horizon / 3600)) if spec.spike_rate > 0 else 0
    spike_start = np.sort(rng.integers(0, horizon, size=n_spikes))
    spike_func = rng.integers(0, nfunc, size=n_spikes)

    base = per_second_base_load(spec)
    extra_rate = max(spec.spike_magnitude - 1.0, 0.0) * spec.base_rps
    w = 2 * np.pi / SECONDS_PER_DAY

    t_parts, f_parts, c_parts = [], [], []
    for lo in range(0, horizon, _CHUNK_S):
        hi = min(lo + _CHUNK_S, horizon)
        grid = rng.multinomial(base[lo:hi], weights)
        for s, f in zip(spike_start.tolist(), spike_func.tolist()):
            a, b = max(s, lo), min(s + spec.spike_duration_s, hi)
            if a < b:
                secs = np.arange(a, b)
                load = extra_rate * (1 + spec.diurnal_amplitude * np.sin(w * secs))
                grid[a - lo : b - lo, f] += np.rint(load).astype(np.int64)
        tt, ff = np.nonzero(grid)
        t_parts.append(tt + lo)
        f_parts.append(ff)
        c_parts.append(grid[tt, ff])

    t = np.concatenate(t_parts) if t_parts else np.zeros(0, np.int64)
    f = np.concatenate(f_parts) if f_parts else np.zeros(0, np.int64)
    c = np.concatenate(c_parts) if c_parts else np.zeros(0, np.int64)

    if isinstance(spec.duration, FixedDuration):
        d = np.full(len(t), spec.duration.ms, dtype=np.int64)
    else:
        d = np.ceil(rng.lognormal(spec.duration.mu, spec.duration.sigma, size=len(t))).astype(np.int64)
        np.maximum(d, 1, out=d)

    ids = function_ids(nfunc)
    used = np.unique(f)
    remap = np.full(nfunc, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return Trace([ids[i] for i in used.tolist()], t, remap[f], c, d, horizon)
