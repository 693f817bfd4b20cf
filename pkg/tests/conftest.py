import os
import sys

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from faasenergy.simcore import FixedTimeout, HalvingInterval, NoKeepAlive  # noqa: E402
from faasenergy.trace import ArrivalRecord, Trace  # noqa: E402


def policy_tuple(policy):
    """Keep-alive policy in the form the reference simulator takes."""
    if isinstance(policy, FixedTimeout):
        return ("fixed", policy.timeout_s)
    if isinstance(policy, HalvingInterval):
        return ("halving", policy.interval_s)
    return ("none", None)


def random_trace(rng, max_functions=5, max_horizon=200, max_rate=10, max_duration_ms=5000):
    """Small random trace: at most max_rate arrivals in any second, summed over functions."""
    nfunc = int(rng.integers(1, max_functions + 1))
    horizon = int(rng.integers(1, max_horizon + 1))
    density = rng.uniform(0.05, 0.9)
    records = []
    for t in range(horizon):
        if rng.random() > density:
            continue
        budget = int(rng.integers(1, max_rate + 1))
        for f in rng.choice(nfunc, size=int(rng.integers(1, nfunc + 1)), replace=False).tolist():
            if budget == 0:
                break
            c = int(rng.integers(1, budget + 1))
            budget -= c
            # sometimes split one second's arrivals over two durations
            if c > 1 and rng.random() < 0.3:
                k = int(rng.integers(1, c))
                records.append(ArrivalRecord(t, f"fn{f}", k, int(rng.integers(1, max_duration_ms + 1))))
                records.append(ArrivalRecord(t, f"fn{f}", c - k, int(rng.integers(1, max_duration_ms + 1))))
            else:
                records.append(ArrivalRecord(t, f"fn{f}", c, int(rng.integers(1, max_duration_ms + 1))))
    return Trace.from_records(records, horizon_s=horizon)


def as_tuples(trace):
    return [(r.t, r.function, r.count, r.duration_ms) for r in trace]


def series_dicts(result):
    return [vars(m) for m in result.series]


@st.composite
def small_traces(draw, max_functions=3, max_horizon=60, max_rate=6, max_duration_ms=4000):
    horizon = draw(st.integers(1, max_horizon))
    nfunc = draw(st.integers(1, max_functions))
    rows = draw(
        st.lists(
            st.tuples(
                st.integers(0, horizon - 1),
                st.integers(0, nfunc - 1),
                st.integers(1, max_rate),
                st.integers(1, max_duration_ms),
            ),
            max_size=40,
        )
    )
    return Trace.from_records([ArrivalRecord(t, f"g{f}", c, d) for t, f, c, d in rows], horizon_s=horizon)


policies = st.one_of(
    st.builds(FixedTimeout, st.integers(0, 30)),
    st.builds(HalvingInterval, st.integers(1, 20)),
    st.just(NoKeepAlive()),
)


@pytest.fixture
def hand_trace():
    """One function, one 1000 ms arrival at t=0 and another at t=2."""
    return Trace.from_records([ArrivalRecord(0, "f1", 1, 1000), ArrivalRecord(2, "f1", 1, 1000)], horizon_s=4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# -- acceptance summary ------------------------------------------------------------

_acceptance = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = dict(report.user_properties).get("criterion")
    if name is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _acceptance.append((outcome, name))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for outcome, name in _acceptance:
        terminalreporter.write_line(f"[{outcome}] {name}")
