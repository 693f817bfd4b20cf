"""Per-second replay of a trace through per-function warm/cold worker pools.

Every timestep runs four phases in a fixed order:

1. COMPLETE: busy workers whose ``busy_until_ms <= t * 1000`` become idle
   with ``idle_since = t``. Under the no-keep-alive policy they are destroyed
   right away and counted as evictions.
2. EVICT: the keep-alive policy removes idle workers.
3. ASSIGN: each arrival takes the idle worker with the shortest idle time,
   or else cold-starts a new worker. Both kinds are busy until
   ``t * 1000 + duration_ms``.
4. RECORD: busy/idle/start/eviction counts are snapshotted.

Only counts are tracked. Idle workers that became idle in the same second
are interchangeable, so the idle pool of each function is a run-length
encoded stack of ``(idle_since, n)`` groups. Groups are pushed and popped at
the recent end and expire from the old end. Functions never share workers,
so each function's pool is replayed on its own by a numba kernel and the
per-second counts are summed. With ``workers > 1`` the functions are split
into chunks that run on threads (the kernel releases the GIL). All sums are
integer, so the result does not depend on the split.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import BinaryIO, Union

import numba
import numpy as np

from faasenergy.trace import Trace, validate_trace

# policy kinds understood by the kernel
_FIXED, _HALVING, _NONE = 0, 1, 2


@dataclass(frozen=True)
class FixedTimeout:
    """Evict workers idle for strictly more than ``timeout_s`` seconds."""

    timeout_s: int

    def __post_init__(self):
        if self.timeout_s < 0:
            raise ValueError(f"timeout_s must be >= 0, got {self.timeout_s}")

    def __str__(self):
        return f"fixed:{self.timeout_s}"


@dataclass(frozen=True)
class HalvingInterval:
    """Every ``interval_s`` seconds (t > 0), evict floor(n/2) longest-idle workers."""

    interval_s: int

    def __post_init__(self):
        if self.interval_s < 1:
            raise ValueError(f"interval_s must be >= 1, got {self.interval_s}")

    def __str__(self):
        return f"halving:{self.interval_s}"


@dataclass(frozen=True)
class NoKeepAlive:
    """Workers are destroyed as soon as their execution completes."""

    def __str__(self):
        return "none"


KeepAlivePolicy = Union[FixedTimeout, HalvingInterval, NoKeepAlive]


def parse_keepalive(text: str) -> KeepAlivePolicy:
    """Parse ``fixed:<seconds>``, ``halving:<seconds>`` or ``none``."""
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    if kind == "none" and not arg:
        return NoKeepAlive()
    if kind in ("fixed", "halving") and arg:
        try:
            value = int(arg)
        except ValueError:
            raise ValueError(f"keep-alive seconds must be an integer: {text!r}") from None
        return FixedTimeout(value) if kind == "fixed" else HalvingInterval(value)
    raise ValueError(f"invalid keep-alive policy {text!r}; expected fixed:<s>, halving:<s> or none")


def _policy_code(policy: KeepAlivePolicy) -> tuple[int, int]:
    if isinstance(policy, FixedTimeout):
        return _FIXED, policy.timeout_s
    if isinstance(policy, HalvingInterval):
        return _HALVING, policy.interval_s
    if isinstance(policy, NoKeepAlive):
        return _NONE, 0
    raise TypeError(f"unknown keep-alive policy {policy!r}")


SCHEDULERS = ("lowest-idle-first",)


@dataclass(frozen=True)
class SimConfig:
    keepalive: KeepAlivePolicy = field(default_factory=lambda: FixedTimeout(900))
    scheduler: str = "lowest-idle-first"
    timestep_s: int = 1

    def __post_init__(self):
        if self.timestep_s != 1:
            raise ValueError(f"only timestep_s=1 is supported, got {self.timestep_s}")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}; choose from {SCHEDULERS}")
        _policy_code(self.keepalive)


@dataclass(frozen=True)
class TimestepMetrics:
    t: int
    busy: int
    idle: int
    cold_starts: int
    warm_starts: int
    evictions: int
    total: int


SERIES_COLUMNS = ("t", "busy", "idle", "cold_starts", "warm_starts", "evictions", "total")


@dataclass(frozen=True)
class SimTotals:
    requests: int
    cold_starts: int
    warm_starts: int
    evictions: int
    idle_worker_seconds: int
    busy_worker_seconds: int
    peak_total_workers: int


class SimResult:
    """Per-timestep occupancy series (int64 arrays indexed by t) plus totals."""

    __slots__ = ("busy", "idle", "cold_starts", "warm_starts", "evictions", "totals")

    def __init__(self, busy, idle, cold_starts, warm_starts, evictions):
        cols = {}
        for name, values in (
            ("busy", busy),
            ("idle", idle),
            ("cold_starts", cold_starts),
            ("warm_starts", warm_starts),
            ("evictions", evictions),
        ):
            arr = np.array(values, dtype=np.int64)
            arr.setflags(write=False)
            cols[name] = arr
        if len({len(a) for a in cols.values()}) != 1:
            raise ValueError("series columns differ in length")
        for name, arr in cols.items():
            object.__setattr__(self, name, arr)
        total = cols["busy"] + cols["idle"]
        object.__setattr__(
            self,
            "totals",
            SimTotals(
                requests=int(cols["cold_starts"].sum() + cols["warm_starts"].sum()),
                cold_starts=int(cols["cold_starts"].sum()),
                warm_starts=int(cols["warm_starts"].sum()),
                evictions=int(cols["evictions"].sum()),
                idle_worker_seconds=int(cols["idle"].sum()),
                busy_worker_seconds=int(cols["busy"].sum()),
                peak_total_workers=int(total.max()) if len(total) else 0,
            ),
        )

    def __setattr__(self, name, value):
        raise AttributeError("SimResult is immutable")

    @property
    def total(self) -> np.ndarray:
        return self.busy + self.idle

    @property
    def arrivals(self) -> np.ndarray:
        return self.cold_starts + self.warm_starts

    @property
    def horizon_s(self) -> int:
        return len(self.busy)

    def __len__(self) -> int:
        return len(self.busy)

    def __getitem__(self, t: int) -> TimestepMetrics:
        b, i = int(self.busy[t]), int(self.idle[t])
        return TimestepMetrics(
            int(range(len(self))[t]), b, i, int(self.cold_starts[t]), int(self.warm_starts[t]), int(self.evictions[t]), b + i
        )

    @property
    def series(self) -> list[TimestepMetrics]:
        return [self[t] for t in range(len(self))]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimResult):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, c), getattr(other, c))
            for c in ("busy", "idle", "cold_starts", "warm_starts", "evictions")
        )

    def __add__(self, other: "SimResult") -> "SimResult":
        return SimResult(
            self.busy + other.busy,
            self.idle + other.idle,
            self.cold_starts + other.cold_starts,
            self.warm_starts + other.warm_starts,
            self.evictions + other.evictions,
        )

    def __repr__(self) -> str:
        return f"SimResult(horizon_s={len(self)}, totals={self.totals})"


# -- idle pool -----------------------------------------------------------------
#
# A pool is two int64 arrays (idle_since, n) used as a stack of groups between
# bounds[0] (oldest) and bounds[1] (one past newest); bounds[2] caches the
# worker count. Groups are pushed in increasing idle_since order, and at step t
# at most one group with idle_since == t is pushed, so t + 1 slots suffice.


@numba.njit(cache=True, nogil=True)
def _pool_push(since, cnt, bounds, t, n):
    if n <= 0:
        return
    tail = bounds[1]
    if tail > bounds[0] and since[tail - 1] == t:
        cnt[tail - 1] += n
    else:
        since[tail] = t
        cnt[tail] = n
        bounds[1] = tail + 1
    bounds[2] += n


@numba.njit(cache=True, nogil=True)
def _pool_evict(since, cnt, bounds, kind, param, t):
    evicted = 0
    if kind == _FIXED:
        head = bounds[0]
        while head < bounds[1] and t - since[head] > param:
            evicted += cnt[head]
            head += 1
        bounds[0] = head
    elif kind == _HALVING:
        if t > 0 and t % param == 0:
            remaining = bounds[2] // 2
            evicted = remaining
            head = bounds[0]
            while remaining > 0:
                if cnt[head] <= remaining:
                    remaining -= cnt[head]
                    head += 1
                else:
                    cnt[head] -= remaining
                    remaining = 0
            bounds[0] = head
    bounds[2] -= evicted
    return evicted


@numba.njit(cache=True, nogil=True)
def _pool_take(since, cnt, bounds, n):
    """Remove up to n most-recently-idled workers; return how many were taken."""
    taken = 0
    tail = bounds[1]
    while taken < n and tail > bounds[0]:
        want = n - taken
        if cnt[tail - 1] <= want:
            taken += cnt[tail - 1]
            tail -= 1
        else:
            cnt[tail - 1] -= want
            taken = n
    bounds[1] = tail
    bounds[2] -= taken
    return taken


@numba.njit(cache=True, nogil=True)
def _simulate_functions(
    offsets, rec_t, rec_count, comp_t, comp_count, horizon, kind, param,
    busy_out, idle_out, cold_out, warm_out, evict_out,
):
    since = np.empty(horizon + 1, dtype=np.int64)
    cnt = np.empty(horizon + 1, dtype=np.int64)
    bounds = np.zeros(3, dtype=np.int64)
    for f in range(len(offsets) - 1):
        r, r_end = offsets[f], offsets[f + 1]
        c, c_end = r, r_end
        if r == r_end:
            continue
        bounds[0] = 0
        bounds[1] = 0
        bounds[2] = 0
        busy = 0
        t = rec_t[r]
        while t < horizon:
            # COMPLETE
            done = 0
            while c < c_end and comp_t[c] <= t:
                done += comp_count[c]
                c += 1
            busy -= done
            if kind == _NONE:
                evict_out[t] += done
            else:
                _pool_push(since, cnt, bounds, t, done)
            # EVICT
            evict_out[t] += _pool_evict(since, cnt, bounds, kind, param, t)
            # ASSIGN
            while r < r_end and rec_t[r] == t:
                n = rec_count[r]
                warm = _pool_take(since, cnt, bounds, n)
                warm_out[t] += warm
                cold_out[t] += n - warm
                busy += n
                r += 1
            # RECORD
            busy_out[t] += busy
            idle_out[t] += bounds[2]
            if busy == 0 and bounds[2] == 0:
                if r == r_end:
                    break
                t = rec_t[r]
            else:
                t += 1


def completion_steps(t: np.ndarray, duration_ms: np.ndarray) -> np.ndarray:
    """First timestep boundary at or after ``t * 1000 + duration_ms``."""
    return t + (duration_ms + 999) // 1000


def _prepare(trace: Trace):
    """Sort records by (function, t) and by (function, completion) for the kernel."""
    fi = trace.function_index
    order = np.lexsort((trace.t, fi))
    fi_sorted = fi[order]
    rec_t = np.ascontiguousarray(trace.t[order])
    rec_count = np.ascontiguousarray(trace.count[order])
    comp = completion_steps(trace.t, trace.duration_ms)
    corder = np.lexsort((comp, fi))
    comp_t = np.ascontiguousarray(comp[corder])
    comp_count = np.ascontiguousarray(trace.count[corder])
    bounds_all = np.searchsorted(fi_sorted, np.arange(len(trace.functions) + 1))
    return rec_t, rec_count, comp_t, comp_count, bounds_all


def simulate(trace: Trace, config: SimConfig | None = None, workers: int = 1) -> SimResult:
    """Replay ``trace`` under ``config`` and return the per-second occupancy series."""
    config = config or SimConfig()
    problems = validate_trace(trace)
    if problems:
        shown = "; ".join(f"{v.invariant}: {v.message}" for v in problems[:5])
        raise ValueError(f"invalid trace ({len(problems)} violations): {shown}")
    kind, param = _policy_code(config.keepalive)
    horizon = trace.horizon_s
    rec_t, rec_count, comp_t, comp_count, fbounds = _prepare(trace)

    nfunc = len(trace.functions)
    workers = max(1, min(int(workers), max(nfunc, 1)))
    cuts = np.linspace(0, nfunc, workers + 1).round().astype(np.int64)

    def run(lo, hi):
        outs = [np.zeros(horizon, dtype=np.int64) for _ in range(5)]
        offsets = np.ascontiguousarray(fbounds[lo : hi + 1])
        if hi > lo:
            _simulate_functions(
                offsets, rec_t, rec_count, comp_t, comp_count,
                horizon, kind, param, *outs,
            )
        return outs

    chunks = list(zip(cuts[:-1].tolist(), cuts[1:].tolist()))
    if workers == 1:
        parts = [run(lo, hi) for lo, hi in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: run(*c), chunks))
    merged = [sum(p[i] for p in parts) for i in range(5)]
    return SimResult(*merged)


def min_capacity(result: SimResult) -> int:
    """Peak concurrent workers, i.e. the capacity needed to serve every request."""
    if len(result) == 0:
        raise ValueError("cannot take min_capacity of an empty series")
    return result.totals.peak_total_workers


# -- single-pool operations --------------------------------------------------


class IdlePool:
    """Idle workers of one function, grouped by the second they became idle."""

    def __init__(self, capacity: int = 1024):
        self._since = np.empty(capacity + 1, dtype=np.int64)
        self._cnt = np.empty(capacity + 1, dtype=np.int64)
        self._bounds = np.zeros(3, dtype=np.int64)

    def add(self, idle_since: int, n: int = 1) -> None:
        """Add n workers that became idle at ``idle_since`` (non-decreasing across calls)."""
        lo, hi = self._bounds[0], self._bounds[1]
        if hi > lo and idle_since < self._since[hi - 1]:
            raise ValueError("workers must be added in non-decreasing idle_since order")
        if hi >= len(self._since):
            grow = len(self._since)
            self._since = np.concatenate([self._since, np.empty(grow, np.int64)])
            self._cnt = np.concatenate([self._cnt, np.empty(grow, np.int64)])
        _pool_push(self._since, self._cnt, self._bounds, idle_since, n)

    def __len__(self) -> int:
        return int(self._bounds[2])

    def idle_since(self) -> list[int]:
        """idle_since of every worker, oldest first."""
        lo, hi = self._bounds[0], self._bounds[1]
        out: list[int] = []
        for s, n in zip(self._since[lo:hi].tolist(), self._cnt[lo:hi].tolist()):
            out.extend([s] * n)
        return out


def evict(pool: IdlePool, policy: KeepAlivePolicy, t: int) -> int:
    """Apply the keep-alive policy to ``pool`` at timestep t; return the eviction count."""
    kind, param = _policy_code(policy)
    if kind == _NONE:
        n = len(pool)
        pool._bounds[:] = 0
        return n
    return int(_pool_evict(pool._since, pool._cnt, pool._bounds, kind, param, t))


def assign(pool: IdlePool, arrivals: int, duration_ms: int, t: int) -> tuple[int, int]:
    """Serve ``arrivals`` at t from ``pool``, lowest idle time first; return (warm, cold).

    Warm workers leave the pool. Callers track their ``busy_until_ms``
    (``t * 1000 + duration_ms``).
    """
    if arrivals < 1:
        raise ValueError("arrivals must be >= 1")
    if duration_ms < 1:
        raise ValueError("duration_ms must be >= 1")
    warm = int(_pool_take(pool._since, pool._cnt, pool._bounds, arrivals))
    return warm, arrivals - warm


# -- CSV export ----------------------------------------------------------------


def emit_series_csv(result: SimResult, sink: BinaryIO) -> None:
    cols = np.column_stack(
        [np.arange(len(result), dtype=np.int64), result.busy, result.idle, result.cold_starts,
         result.warm_starts, result.evictions, result.total]
    )
    sink.write((",".join(SERIES_COLUMNS) + "\n").encode())
    if len(result):
        body = "\n".join(",".join(map(str, row)) for row in cols.tolist())
        sink.write(body.encode() + b"\n")


def parse_series_csv(source: BinaryIO | bytes) -> SimResult:
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    lines = bytes(data).decode("utf-8").splitlines()
    if not lines or tuple(lines[0].strip().split(",")) != SERIES_COLUMNS:
        raise ValueError(f"metrics CSV must start with header {','.join(SERIES_COLUMNS)!r}")
    rows = [ln for ln in lines[1:] if ln.strip()]
    if not rows:
        raise ValueError("metrics CSV has no rows")
    try:
        arr = np.array([[int(v) for v in ln.split(",")] for ln in rows], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"malformed metrics CSV: {exc}") from None
    if arr.shape[1] != len(SERIES_COLUMNS):
        raise ValueError("metrics CSV rows must have 7 fields")
    if not np.array_equal(arr[:, 0], np.arange(len(arr))):
        raise ValueError("metrics CSV t column must run 0, 1, 2, ...")
    if (arr < 0).any():
        raise ValueError("metrics CSV contains negative counts")
    if not np.array_equal(arr[:, 6], arr[:, 1] + arr[:, 2]):
        raise ValueError("metrics CSV total column must equal busy + idle")
    return SimResult(arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5])
