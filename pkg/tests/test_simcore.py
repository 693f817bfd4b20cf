import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import as_tuples, policies, policy_tuple, random_trace, series_dicts, small_traces
from faasenergy.simcore import (
    FixedTimeout,
    HalvingInterval,
    IdlePool,
    NoKeepAlive,
    SimConfig,
    SimResult,
    assign,
    emit_series_csv,
    evict,
    min_capacity,
    parse_keepalive,
    parse_series_csv,
    simulate,
)
from faasenergy.trace import ArrivalRecord, Trace
from reference_sim import reference_simulate


def run(records, horizon, policy=FixedTimeout(900)):
    trace = Trace.from_records([ArrivalRecord(*r) for r in records], horizon_s=horizon)
    return simulate(trace, SimConfig(keepalive=policy))


def test_empty_trace_all_zero():
    result = simulate(Trace([], [], [], [], [], horizon_s=10))
    assert len(result) == 10
    for col in (result.busy, result.idle, result.cold_starts, result.warm_starts, result.evictions):
        assert not col.any()


def test_hand_trace_warm_reuse():
    result = run([(0, "f1", 1, 1000), (2, "f1", 1, 1000)], horizon=10)
    assert result.totals.cold_starts == 1
    assert result.totals.warm_starts == 1
    assert result.idle.tolist() == [0, 1, 0] + [1] * 7
    assert result.busy.tolist() == [1, 0, 1] + [0] * 7


def test_simultaneous_arrivals_need_separate_workers():
    result = run([(0, "f1", 2, 10)], horizon=3)
    assert result.cold_starts.tolist() == [2, 0, 0]
    assert result.idle.tolist() == [0, 2, 2]


@pytest.mark.parametrize(
    "duration_ms, busy",
    [(1, [1, 0, 0, 0]), (1000, [1, 0, 0, 0]), (1001, [1, 1, 0, 0]), (1500, [1, 1, 0, 0]), (3000, [1, 1, 1, 0])],
)
def test_completion_lands_on_next_boundary(duration_ms, busy):
    assert run([(0, "f", 1, duration_ms)], horizon=4).busy.tolist() == busy


def test_worker_finishing_at_t_serves_arrival_at_t():
    result = run([(0, "f", 1, 2000), (2, "f", 1, 100)], horizon=4)
    assert result.cold_starts.tolist() == [1, 0, 0, 0]
    assert result.warm_starts.tolist() == [0, 0, 1, 0]


def test_fixed_timeout_zero_keeps_worker_for_its_completion_second():
    result = run([(0, "f", 1, 1000)], horizon=4, policy=FixedTimeout(0))
    assert result.idle.tolist() == [0, 1, 0, 0]
    assert result.evictions.tolist() == [0, 0, 1, 0]


def test_none_policy_never_idles():
    result = run([(0, "f", 3, 1500), (1, "f", 1, 10), (5, "f", 2, 10)], horizon=8, policy=NoKeepAlive())
    assert not result.idle.any()
    assert result.totals.warm_starts == 0
    # destruction is counted as an eviction in the completion step
    assert result.evictions.tolist() == [0, 0, 4, 0, 0, 0, 2, 0]


# -- evict -------------------------------------------------------------------------


def pool_of(*idle_since):
    pool = IdlePool()
    for s in idle_since:
        pool.add(s)
    return pool


def test_fixed_timeout_boundary_is_inclusive():
    t = 2000
    assert evict(pool_of(t - 901), FixedTimeout(900), t) == 1
    pool = pool_of(t - 900)
    assert evict(pool, FixedTimeout(900), t) == 0
    assert len(pool) == 1


def test_halving_evicts_floor_half_longest_idle():
    pool = pool_of(10, 20, 30, 40, 50)
    assert evict(pool, HalvingInterval(380), 380) == 2
    assert pool.idle_since() == [30, 40, 50]


def test_halving_only_on_interval_boundaries():
    pool = pool_of(1, 2, 3, 4)
    assert evict(pool, HalvingInterval(380), 379) == 0
    assert evict(pool, HalvingInterval(380), 0) == 0
    assert evict(pool, HalvingInterval(380), 760) == 2


def test_halving_splits_group_of_same_second():
    pool = IdlePool()
    pool.add(5, 3)
    pool.add(9, 2)
    assert evict(pool, HalvingInterval(10), 10) == 2
    assert pool.idle_since() == [5, 9, 9]


def test_none_policy_empties_pool():
    pool = pool_of(1, 2)
    assert evict(pool, NoKeepAlive(), 3) == 2
    assert len(pool) == 0


# -- assign ------------------------------------------------------------------------


def test_assign_takes_most_recently_idled():
    pool = pool_of(1, 2, 3)
    assert assign(pool, 2, 500, t=10) == (2, 0)
    assert pool.idle_since() == [1]


def test_assign_from_empty_pool_is_all_cold():
    assert assign(IdlePool(), 4, 500, t=0) == (0, 4)


def test_assign_rejects_zero_arrivals():
    with pytest.raises(ValueError):
        assign(IdlePool(), 0, 500, t=0)


def test_long_idle_worker_is_never_chosen_and_expires():
    # worker A idles from t=1; worker B (busy 690 s) idles from t=691
    records = [(0, "f", 1, 1000), (0, "f", 1, 691_000)]
    records += [(t, "f", 1, 1000) for t in range(701, 1000, 30)]
    horizon = 1000
    result = run(records, horizon)
    sparse = len(range(701, 1000, 30))
    assert result.totals.cold_starts == 2
    assert result.totals.warm_starts == sparse
    # A is evicted when its idle time first exceeds 900 s, so it was never reused
    assert result.evictions.tolist().index(1) == 902
    assert result.totals.evictions == 1
    assert series_dicts(result) == reference_simulate(records, horizon, ("fixed", 900))


# -- oracle agreement and properties ------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(small_traces(), policies)
def test_matches_reference(trace, policy):
    result = simulate(trace, SimConfig(keepalive=policy))
    assert series_dicts(result) == reference_simulate(as_tuples(trace), trace.horizon_s, policy_tuple(policy))


@settings(max_examples=150, deadline=None)
@given(small_traces(), policies)
def test_conservation_and_demand(trace, policy):
    result = simulate(trace, SimConfig(keepalive=policy))
    total = result.total
    prev = np.concatenate([[0], total[:-1]])
    assert np.array_equal(total - prev, result.cold_starts - result.evictions)
    demand = np.bincount(trace.t, weights=trace.count, minlength=trace.horizon_s).astype(np.int64)
    assert np.array_equal(result.cold_starts + result.warm_starts, demand)
    for col in (result.busy, result.idle, result.cold_starts, result.warm_starts, result.evictions):
        assert (col >= 0).all()


@settings(max_examples=100, deadline=None)
@given(small_traces(max_horizon=120), st.integers(0, 60), st.integers(0, 60))
def test_longer_timeout_is_monotone(trace, a, b):
    short, long_ = sorted((a, b))
    rs = simulate(trace, SimConfig(keepalive=FixedTimeout(short))).totals
    rl = simulate(trace, SimConfig(keepalive=FixedTimeout(long_))).totals
    assert rl.cold_starts <= rs.cold_starts
    assert rl.idle_worker_seconds >= rs.idle_worker_seconds


@settings(max_examples=60, deadline=None)
@given(small_traces(max_functions=4), policies)
def test_functions_are_independent(trace, policy):
    config = SimConfig(keepalive=policy)
    together = simulate(trace, config)
    parts = [simulate(trace.subset([f]), config) for f in trace.functions]
    summed = parts[0] if parts else together
    for p in parts[1:]:
        summed = summed + p
    assert summed == together


@settings(max_examples=40, deadline=None)
@given(small_traces(max_functions=5), policies, st.integers(2, 6))
def test_thread_count_does_not_change_result(trace, policy, workers):
    config = SimConfig(keepalive=policy)
    assert simulate(trace, config, workers=workers) == simulate(trace, config, workers=1)


def test_seeded_random_traces_match_reference(rng):
    for _ in range(20):
        trace = random_trace(rng)
        for policy in (FixedTimeout(int(rng.integers(0, 120))), HalvingInterval(int(rng.integers(1, 60)))):
            expected = reference_simulate(as_tuples(trace), trace.horizon_s, policy_tuple(policy))
            assert series_dicts(simulate(trace, SimConfig(keepalive=policy))) == expected


# -- results, config, CSV ---------------------------------------------------------------


def test_totals_are_sums_of_series(rng):
    result = simulate(random_trace(rng), SimConfig(keepalive=FixedTimeout(20)))
    t = result.totals
    assert t.requests == int(result.arrivals.sum())
    assert t.idle_worker_seconds == int(result.idle.sum())
    assert t.busy_worker_seconds == int(result.busy.sum())
    assert t.peak_total_workers == int(result.total.max())
    assert min_capacity(result) == t.peak_total_workers


def test_min_capacity_examples():
    assert min_capacity(SimResult([5] * 4, [0] * 4, [0] * 4, [0] * 4, [0] * 4)) == 5
    assert min_capacity(SimResult([1, 3, 1], [0, 4, 2], [0] * 3, [0] * 3, [0] * 3)) == 7
    with pytest.raises(ValueError):
        min_capacity(SimResult([], [], [], [], []))


def test_series_csv_round_trip(rng):
    result = simulate(random_trace(rng))
    buf = io.BytesIO()
    emit_series_csv(result, buf)
    lines = buf.getvalue().decode().splitlines()
    assert lines[0] == "t,busy,idle,cold_starts,warm_starts,evictions,total"
    assert len(lines) == len(result) + 1
    assert parse_series_csv(buf.getvalue()) == result


def test_parse_series_rejects_inconsistent_total():
    with pytest.raises(ValueError, match="total"):
        parse_series_csv(b"t,busy,idle,cold_starts,warm_starts,evictions,total\n0,1,1,1,0,0,3\n")


@pytest.mark.parametrize(
    "text, policy",
    [("fixed:900", FixedTimeout(900)), ("halving:380", HalvingInterval(380)), ("none", NoKeepAlive())],
)
def test_parse_keepalive(text, policy):
    assert parse_keepalive(text) == policy


@pytest.mark.parametrize("text", ["fixed", "fixed:-1", "halving:0", "fixed:15m", "lru:3"])
def test_parse_keepalive_rejects(text):
    with pytest.raises(ValueError):
        parse_keepalive(text)


def test_config_rejects_other_timesteps():
    with pytest.raises(ValueError):
        SimConfig(timestep_s=2)


def test_invalid_trace_rejected_before_stepping():
    bad = Trace(["f"], [5], [0], [1], [10], horizon_s=3)
    with pytest.raises(ValueError, match="horizon"):
        simulate(bad)


def test_result_is_immutable(hand_trace):
    result = simulate(hand_trace)
    with pytest.raises(AttributeError):
        result.busy = None
    with pytest.raises(ValueError):
        result.idle[0] = 3
