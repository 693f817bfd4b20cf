"""Brute-force reference simulator used as an oracle.

Tracks every worker as an object and rescans the full worker list in every
phase of every second. Slow, but simple enough to check by hand.
"""
from dataclasses import dataclass


@dataclass
class RefWorker:
    function: str
    created: int
    busy_until_ms: int | None = None
    idle_since: int | None = None


def reference_simulate(records, horizon, policy):
    """records: iterable of (t, function, count, duration_ms).

    policy: ("fixed", timeout) | ("halving", interval) | ("none", None).
    Returns a list of dicts with keys t, busy, idle, cold_starts, warm_starts,
    evictions, total.
    """
    kind, param = policy
    by_t = {}
    for t, f, c, d in records:
        by_t.setdefault(t, []).append((f, c, d))
    workers = []
    created = 0
    series = []
    for t in range(horizon):
        evicted = cold = warm = 0
        # COMPLETE
        for w in list(workers):
            if w.busy_until_ms is not None and w.busy_until_ms <= t * 1000:
                if kind == "none":
                    workers.remove(w)
                    evicted += 1
                else:
                    w.busy_until_ms = None
                    w.idle_since = t
        # EVICT
        if kind == "fixed":
            for w in list(workers):
                if w.idle_since is not None and t - w.idle_since > param:
                    workers.remove(w)
                    evicted += 1
        elif kind == "halving" and t > 0 and t % param == 0:
            for f in sorted({w.function for w in workers}):
                idle = [w for w in workers if w.function == f and w.idle_since is not None]
                idle.sort(key=lambda w: (w.idle_since, w.created))
                for w in idle[: len(idle) // 2]:
                    workers.remove(w)
                    evicted += 1
        # ASSIGN
        for f, c, d in by_t.get(t, []):
            for _ in range(c):
                idle = [w for w in workers if w.function == f and w.idle_since is not None]
                if idle:
                    best = min(idle, key=lambda w: (t - w.idle_since, -w.created))
                    best.idle_since = None
                    best.busy_until_ms = t * 1000 + d
                    warm += 1
                else:
                    workers.append(RefWorker(f, created, busy_until_ms=t * 1000 + d))
                    created += 1
                    cold += 1
        # RECORD
        busy = sum(1 for w in workers if w.busy_until_ms is not None)
        idle_n = sum(1 for w in workers if w.idle_since is not None)
        series.append(
            dict(t=t, busy=busy, idle=idle_n, cold_starts=cold, warm_starts=warm, evictions=evicted, total=busy + idle_n)
        )
    return series
