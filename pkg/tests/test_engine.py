"""Jump-chain mechanics and the simulation loop (reference and compiled)."""
import math
from collections import deque

import numpy as np
import pytest

from qnstab import (
    EventBudgetError,
    IllegalEventError,
    NetworkSpec,
    StalledStateError,
    StationPolicy,
    TransitionEvent,
    empty_state,
    simulate,
)
from qnstab.engine import (
    NetworkState,
    apply_event,
    holding_rate,
    jump_distribution,
    state_counts,
    test_functional as functional_of,
    total_jobs,
)
from qnstab.policies import FcfsConfig, PsConfig, SbpConfig
from qnstab.rng import Xoshiro256PP, derive

PROB_TOL = 1e-12


def _with_queue(spec, state, station, queue):
    configs = list(state.configs)
    old = configs[station]
    configs[station] = FcfsConfig(old.classes, deque(queue))
    return NetworkState(tuple(configs))


@pytest.fixture
def ps_pair():
    """Two PS stations: proportional on {0,1}, preferential on {2,3}."""
    return NetworkSpec(
        station_count=2,
        class_count=4,
        station_of=(0, 0, 1, 1),
        arrival_rates=(0.7, 0.3, 0.5, 0.0),
        service_rates=(2.0, 3.0, 1.5, 2.5),
        routing=(
            (0.0, 0.1, 0.3, 0.0),
            (0.0, 0.0, 0.5, 0.2),
            (0.0, 0.0, 0.0, 0.6),
            (0.1, 0.0, 0.0, 0.0),
        ),
        station_policies=(
            StationPolicy.ps("proportional"),
            StationPolicy.ps("preferential", (3, 2)),
        ),
    )


class TestFunctional:
    def test_empty_state_is_one(self, lu_kumar):
        assert functional_of(empty_state(lu_kumar)) == 1.0

    def test_three_jobs(self, mm1):
        state = NetworkState((FcfsConfig((0,), deque([0, 0, 0])),))
        assert functional_of(state) == pytest.approx(math.exp(-3))
        assert functional_of(state, alpha=2.0) == pytest.approx(math.exp(-6))

    def test_alpha_must_be_positive(self, mm1):
        with pytest.raises(ValueError):
            functional_of(empty_state(mm1), alpha=0.0)


class TestHoldingRate:
    def test_empty_network_is_total_arrival_rate(self, bramson_dai):
        theta = [1.0, 0, 0, 0, 0, 0]
        assert holding_rate(bramson_dai, empty_state(bramson_dai), theta) == 1.0

    def test_busy_stations_add_head_rates(self, bramson_dai):
        state = empty_state(bramson_dai)
        state = _with_queue(bramson_dai, state, 0, [0])
        state = _with_queue(bramson_dai, state, 1, [2, 3])
        theta = [1.0, 0, 0, 0, 0, 0]
        beta = bramson_dai.service_rates
        expect = 1.0 + beta[0] + beta[2]
        assert holding_rate(bramson_dai, state, theta) == pytest.approx(expect)

    def test_ps_proportional_splits_rate(self, ps_pair):
        configs = list(empty_state(ps_pair).configs)
        configs[0] = PsConfig((0, 1), "proportional", None, (1, 1))
        state = NetworkState(tuple(configs))
        got = holding_rate(ps_pair, state, [0.0] * 4)
        assert got == pytest.approx((2.0 + 3.0) / 2)


class TestJumpDistribution:
    def test_empty_network_single_arrival(self, bramson_dai):
        probs = jump_distribution(
            bramson_dai, empty_state(bramson_dai), [1.0, 0, 0, 0, 0, 0]
        )
        assert probs == {TransitionEvent.arrival(0): 1.0}

    def test_balanced_mm1(self):
        spec = NetworkSpec(1, 1, (0,), (1.0,), (1.0,), ((0.0,),),
                           (StationPolicy.fcfs(),))
        state = NetworkState((FcfsConfig((0,), deque([0])),))
        probs = jump_distribution(spec, state, [1.0])
        assert probs[TransitionEvent.arrival(0)] == pytest.approx(0.5)
        assert probs[TransitionEvent.departure(0)] == pytest.approx(0.5)

    def test_reentrant_station_head(self, lu_kumar):
        # station 1 serving class 1, station 0 empty, theta = (0.5, 0, 0, 0)
        configs = list(empty_state(lu_kumar).configs)
        configs[1] = SbpConfig((1, 2), (1, 2), head=1)
        state = NetworkState(tuple(configs))
        probs = jump_distribution(lu_kumar, state, [0.5, 0, 0, 0])
        assert probs[TransitionEvent.arrival(0)] == pytest.approx(0.5 / 1.75)
        assert probs[TransitionEvent.class_change(1, 2)] == pytest.approx(1.25 / 1.75)
        assert len(probs) == 2

    def test_stalled_state_raises(self, mm1):
        with pytest.raises(StalledStateError):
            jump_distribution(mm1, empty_state(mm1), [0.0])

    def test_zero_rate_events_omitted(self, jackson2):
        probs = jump_distribution(jackson2, empty_state(jackson2), [1.0, 0.0])
        assert probs == {TransitionEvent.arrival(0): 1.0}


class TestApplyEvent:
    def test_arrival_on_empty_fcfs(self, jackson2):
        state = apply_event(jackson2, empty_state(jackson2), TransitionEvent.arrival(1))
        assert list(state.configs[1].queue) == [1]
        assert total_jobs(state) == 1

    def test_class_change_promotes_then_buffers(self, lu_kumar):
        # head=1 with one class-2 job buffered; completing 1 -> 2 promotes
        # the buffered 2 and re-buffers the changed job
        configs = list(empty_state(lu_kumar).configs)
        configs[1] = SbpConfig((1, 2), (1, 2), head=1, buffer=(0, 1))
        state = NetworkState(tuple(configs))
        out = apply_event(lu_kumar, state, TransitionEvent.class_change(1, 2))
        assert out.configs[1].head == 2
        assert out.configs[1].buffer == (0, 1)
        assert total_jobs(out) == total_jobs(state)

    def test_departure_removes_head(self, bramson_dai):
        state = _with_queue(bramson_dai, empty_state(bramson_dai), 0, [5, 0])
        out = apply_event(bramson_dai, state, TransitionEvent.departure(5))
        assert list(out.configs[0].queue) == [0]

    def test_illegal_event_rejected(self, mm1):
        with pytest.raises(IllegalEventError):
            apply_event(mm1, empty_state(mm1), TransitionEvent.departure(0))

    def test_job_count_deltas(self, lu_kumar):
        configs = list(empty_state(lu_kumar).configs)
        configs[0] = SbpConfig((0, 3), (3, 0), head=0, buffer=(1, 0))
        state = NetworkState(tuple(configs))
        n = total_jobs(state)
        assert total_jobs(apply_event(lu_kumar, state, TransitionEvent.arrival(0))) == n + 1
        assert total_jobs(apply_event(lu_kumar, state, TransitionEvent.class_change(0, 1))) == n


def _random_walk(spec, theta, steps, seed):
    """Roll the chain manually through jump_distribution / apply_event."""
    gen = Xoshiro256PP(seed)
    state = empty_state(spec)
    visited = [state]
    for _ in range(steps):
        probs = jump_distribution(spec, state, theta)
        u = gen.uniform()
        acc = 0.0
        ev = None
        for ev, p in probs.items():
            acc += p
            if u <= acc:
                break
        state = apply_event(spec, state, ev)
        visited.append(state)
    return visited


@pytest.mark.parametrize("fixture_name,theta", [
    ("lu_kumar", (0.9, 0.0, 0.0, 0.0)),
    ("ps_pair", (0.7, 0.3, 0.5, 0.0)),
    ("bramson_dai", (1.0, 0.0, 0.0, 0.0, 0.0, 0.0)),
])
def test_invariants_along_random_walk(fixture_name, theta, request):
    spec = request.getfixturevalue(fixture_name)
    theta_l1 = sum(theta)
    beta_cap = theta_l1 + sum(
        max(spec.service_rates[k] for k in spec.classes_at(i))
        for i in range(spec.station_count)
    )
    prev = None
    for state in _random_walk(spec, theta, 300, seed=7):
        l = holding_rate(spec, state, theta)
        assert theta_l1 - PROB_TOL <= l <= beta_cap + PROB_TOL
        probs = jump_distribution(spec, state, theta)
        assert abs(sum(probs.values()) - 1.0) < PROB_TOL
        assert all(p > 0 for p in probs.values())
        if prev is not None:
            assert abs(total_jobs(state) - total_jobs(prev)) <= 1
        prev = state


# ---------------------------------------------------------------------------
# the simulation loop


class TestSimulate:
    def test_zero_horizon_returns_initial(self, lu_kumar):
        out = simulate(lu_kumar, (0.9, 0, 0, 0), 0.0, seed=3)
        assert out.event_count == 0
        assert out.terminal_state == empty_state(lu_kumar)
        assert out.functional_value == 1.0
        assert out.elapsed_model_time == 0.0

    def test_stalled_chain_fast_forwards(self, mm1):
        out = simulate(mm1, (0.0,), 5000.0, seed=3)
        assert out.event_count == 0
        assert out.terminal_state == empty_state(mm1)

    def test_functional_matches_terminal_state(self, jackson2):
        out = simulate(jackson2, (1.0, 0.8), 123.0, seed=11)
        assert out.functional_value == pytest.approx(
            functional_of(out.terminal_state)
        )

    def test_alpha_scales_functional(self, jackson2):
        out1 = simulate(jackson2, (1.0, 0.8), 50.0, seed=4)
        out2 = simulate(jackson2, (1.0, 0.8), 50.0, seed=4, alpha=2.0)
        n = total_jobs(out1.terminal_state)
        assert out2.functional_value == pytest.approx(math.exp(-2.0 * n))

    def test_seed_replay_is_bit_identical(self, lu_kumar):
        a = simulate(lu_kumar, (0.9, 0, 0, 0), 400.0, seed=99)
        b = simulate(lu_kumar, (0.9, 0, 0, 0), 400.0, seed=99)
        assert a == b

    def test_different_seeds_differ(self, jackson2):
        a = simulate(jackson2, (1.0, 0.8), 300.0, seed=1)
        b = simulate(jackson2, (1.0, 0.8), 300.0, seed=2)
        assert a.event_count != b.event_count or a.functional_value != b.functional_value

    def test_counts_balance(self, jackson2):
        out = simulate(jackson2, (1.0, 0.8), 500.0, seed=21)
        net_jobs = out.arrival_count - out.departure_count
        assert net_jobs == total_jobs(out.terminal_state)

    def test_event_budget_error(self, mm1):
        with pytest.raises(EventBudgetError, match="budget"):
            simulate(mm1, (1.0,), 1e6, seed=5, event_cap=500)
        with pytest.raises(EventBudgetError):
            simulate(mm1, (1.0,), 1e6, seed=5, event_cap=500, method="reference")

    def test_sample_times_validation(self, mm1):
        with pytest.raises(ValueError):
            simulate(mm1, (1.0,), 10.0, seed=1, sample_times=[5.0, 1.0])
        with pytest.raises(ValueError):
            simulate(mm1, (1.0,), 10.0, seed=1, sample_times=[5.0, 50.0])
        with pytest.raises(ValueError):
            simulate(mm1, (1.0,), 10.0, seed=1, sample_times=[-1.0])

    def test_samples_shape_and_terminal_agreement(self, jackson2):
        times = [0.0, 10.0, 50.0, 100.0]
        out = simulate(jackson2, (1.0, 0.8), 100.0, seed=8, sample_times=times)
        assert out.samples.shape == (4, 2)
        assert np.array_equal(out.samples[0], [0, 0])  # empty start
        assert np.array_equal(
            out.samples[-1], state_counts(jackson2, out.terminal_state)
        )

    def test_theta_validation(self, jackson2):
        with pytest.raises(ValueError):
            simulate(jackson2, (1.0,), 10.0, seed=1)
        with pytest.raises(ValueError):
            simulate(jackson2, (-1.0, 0.5), 10.0, seed=1)
        with pytest.raises(ValueError):
            simulate(jackson2, (1.0, 0.5), -1.0, seed=1)

    def test_unknown_method_rejected(self, mm1):
        with pytest.raises(ValueError):
            simulate(mm1, (1.0,), 10.0, seed=1, method="exact")

    def test_trace_records_every_event(self, lu_kumar):
        trace = []
        out = simulate(lu_kumar, (0.9, 0, 0, 0), 200.0, seed=13, trace=trace)
        assert len(trace) == out.event_count
        times = [row[0] for row in trace]
        assert times == sorted(times)
        assert all(0 <= t <= 200.0 for t in times)
        totals = [row[4] for row in trace]
        assert all(abs(b - a) <= 1 for a, b in zip(totals, totals[1:]))
        assert totals[-1] == total_jobs(out.terminal_state)


@pytest.mark.parametrize("fixture_name,theta,horizon", [
    ("mm1", (1.0,), 2000.0),
    ("jackson2", (1.0, 0.8), 800.0),
    ("lu_kumar", (0.9, 0.0, 0.0, 0.0), 600.0),
    ("kelly", (0.55, 0.0, 0.0, 0.0), 600.0),
    ("ps_pair", (0.7, 0.3, 0.5, 0.0), 600.0),
    ("bramson_dai", (1.0, 0.0, 0.0, 0.0, 0.0, 0.0), 200.0),
])
def test_kernel_matches_reference_bitwise(fixture_name, theta, horizon, request):
    """The compiled loop and the pure-Python loop replay the same chain."""
    spec = request.getfixturevalue(fixture_name)
    times = np.linspace(0.0, horizon, 7)
    a = simulate(spec, theta, horizon, seed=2718, sample_times=times, method="kernel")
    b = simulate(spec, theta, horizon, seed=2718, sample_times=times, method="reference")
    assert a.event_count == b.event_count
    assert a.functional_value == b.functional_value  # exact, not approx
    assert a.elapsed_model_time == b.elapsed_model_time
    assert a.arrival_count == b.arrival_count
    assert a.departure_count == b.departure_count
    assert a.terminal_state == b.terminal_state
    assert np.array_equal(a.samples, b.samples)


def test_kernel_matches_reference_from_loaded_state():
    # deliberately exercise a non-empty initial state on both executors
    spec = NetworkSpec(1, 2, (0, 0), (0.4, 0.2), (1.0, 2.0),
                       ((0.0, 0.3), (0.1, 0.0)),
                       (StationPolicy.sbp((1, 0)),))
    init = NetworkState((SbpConfig((0, 1), (1, 0), head=0, buffer=(2, 1)),))
    a = simulate(spec, (0.4, 0.2), 300.0, seed=5, initial=init, method="kernel")
    b = simulate(spec, (0.4, 0.2), 300.0, seed=5, initial=init, method="reference")
    assert a == b


def test_mm1_stationary_empty_probability(mm1):
    """Terminal states of many long runs hit the M/M/1 stationary law."""
    hits = 0
    reps = 10_000
    for j in range(reps):
        out = simulate(mm1, (1.0,), 1.0e4, derive(314, 4, j))
        hits += total_jobs(out.terminal_state) == 0
    assert hits / reps == pytest.approx(0.5, abs=0.02)


def test_flow_conservation_at_long_horizon(mm1):
    out = simulate(mm1, (1.0,), 1.0e5, seed=123)
    assert out.arrival_count > 0
    gap = (out.departure_count - out.arrival_count) / out.arrival_count
    assert abs(gap) < 0.02


def test_jackson_functional_matches_product_form(jackson2):
    """E[phi(X_t)] at large t against the closed form at theta=(1, 0.8)."""
    closed_form = 0.2983635809288703
    reps = 5000
    vals = np.array([
        simulate(jackson2, (1.0, 0.8), 250.0, derive(777, 5, j)).functional_value
        for j in range(reps)
    ])
    se = vals.std(ddof=1) / math.sqrt(reps)
    assert abs(vals.mean() - closed_form) <= 3 * se
