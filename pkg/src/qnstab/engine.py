"""Continuous-time Markov chain simulation via the embedded jump chain.

The network state is a vector of per-station queue configurations.  At a
state with total transition rate ``l`` the chain holds for an Exp(l) time,
then jumps: an external arrival of class l (rate theta_l), a class change
k -> l (rate W_k * beta_k * R_kl), or a departure of class k (rate
W_k * beta_k * R_k0).  ``simulate`` replays this chain to a fixed horizon,
deterministically in a 64-bit seed.

Two interchangeable executors exist: a compiled kernel (the default, in
``_kernel``) and a pure-Python reference that exercises the queue-config
operators one event at a time.  Both consume the same random stream and
make identical floating-point decisions, so their outcomes are
bit-identical — a test enforces this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import policies
from .network import NetworkSpec, require_valid
from .policies import QueueConfig, empty_config, job_count
from .rng import Xoshiro256PP

DEFAULT_EVENT_CAP = 10**8


class StalledStateError(ValueError):
    """The chain has total rate 0 (no arrivals, network empty)."""


class EventBudgetError(RuntimeError):
    """A run exceeded its event budget before reaching the horizon."""


class IllegalEventError(ValueError):
    """An event was applied at a state where its rate is zero."""


@dataclass(frozen=True)
class NetworkState:
    configs: tuple[QueueConfig, ...]


@dataclass(frozen=True)
class TransitionEvent:
    """arrival(l), class_change(k, l), or departure(k)."""

    kind: str
    cls_from: int | None
    cls_to: int | None

    @staticmethod
    def arrival(l: int) -> "TransitionEvent":
        return TransitionEvent("arrival", None, l)

    @staticmethod
    def class_change(k: int, l: int) -> "TransitionEvent":
        return TransitionEvent("class_change", k, l)

    @staticmethod
    def departure(k: int) -> "TransitionEvent":
        return TransitionEvent("departure", k, None)


@dataclass(frozen=True)
class SimOutcome:
    terminal_state: NetworkState
    event_count: int
    functional_value: float
    elapsed_model_time: float
    arrival_count: int = 0
    departure_count: int = 0
    samples: np.ndarray | None = None  # (n_samples, d) class counts
    sample_times: np.ndarray | None = None


def empty_state(spec: NetworkSpec) -> NetworkState:
    return NetworkState(tuple(empty_config(spec, i) for i in range(spec.station_count)))


def total_jobs(state: NetworkState) -> int:
    return sum(job_count(c) for c in state.configs)


def state_counts(spec: NetworkSpec, state: NetworkState) -> np.ndarray:
    """Number of jobs of each class, over the whole network."""
    counts = np.zeros(spec.class_count, dtype=np.int64)
    for cfg in state.configs:
        if isinstance(cfg, policies.FcfsConfig):
            for k in cfg.queue:
                counts[k] += 1
        elif isinstance(cfg, policies.SbpConfig):
            if cfg.head is not None:
                counts[cfg.head] += 1
            for k, x in zip(cfg.classes, cfg.buffer):
                counts[k] += x
        else:
            for k, x in zip(cfg.classes, cfg.counts):
                counts[k] += x
    return counts


def test_functional(state: NetworkState, alpha: float = 1.0) -> float:
    """exp(-alpha * total jobs): 1 on the empty network, -> 0 as it fills."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return math.exp(-alpha * total_jobs(state))


def _weight_vector(spec: NetworkSpec, state: NetworkState) -> list[float]:
    """Service-allocation weights indexed by class, zeros elsewhere."""
    w = [0.0] * spec.class_count
    for cfg in state.configs:
        for k, wk in policies.service_allocation(cfg).items():
            if wk:
                w[k] = wk
    return w


def holding_rate(spec: NetworkSpec, state: NetworkState, theta_vec) -> float:
    """Total transition rate l(state) = sum theta_l + sum W_k beta_k."""
    require_valid(spec)
    theta = [float(t) for t in theta_vec]
    w = _weight_vector(spec, state)
    beta = spec.service_rates
    l = 0.0
    for k in range(spec.class_count):
        l += theta[k]
    for k in range(spec.class_count):
        l += w[k] * beta[k]
    return l


def jump_distribution(
    spec: NetworkSpec, state: NetworkState, theta_vec
) -> dict[TransitionEvent, float]:
    """Probability of each possible next event; zero-rate events omitted."""
    require_valid(spec)
    theta = [float(t) for t in theta_vec]
    l = holding_rate(spec, state, theta)
    if l == 0.0:
        raise StalledStateError("total transition rate is zero")
    w = _weight_vector(spec, state)
    probs: dict[TransitionEvent, float] = {}
    for k in range(spec.class_count):
        if theta[k] > 0:
            probs[TransitionEvent.arrival(k)] = theta[k] / l
    for k in range(spec.class_count):
        r = w[k] * spec.service_rates[k]
        if r > 0:
            row = spec.routing[k]
            for dst, p in enumerate(row):
                if p > 0:
                    probs[TransitionEvent.class_change(k, dst)] = r * p / l
            exit_p = 1.0 - sum(row)
            if exit_p > 0:
                probs[TransitionEvent.departure(k)] = r * exit_p / l
    return probs


def apply_event(
    spec: NetworkSpec, state: NetworkState, event: TransitionEvent
) -> NetworkState:
    """Apply one transition; a class change is a deletion then an insertion."""
    configs = list(state.configs)
    if event.kind == "arrival":
        i = spec.station_of[event.cls_to]
        configs[i] = policies.insert(configs[i], event.cls_to)
        return NetworkState(tuple(configs))
    k = event.cls_from
    i = spec.station_of[k]
    if policies.service_allocation(configs[i]).get(k, 0.0) <= 0.0:
        raise IllegalEventError(f"class {k} is not in service at station {i}")
    configs[i] = policies.delete(configs[i], k)
    if event.kind == "class_change":
        j = spec.station_of[event.cls_to]
        configs[j] = policies.insert(configs[j], event.cls_to)
    elif event.kind != "departure":
        raise ValueError(f"unknown event kind {event.kind!r}")
    return NetworkState(tuple(configs))


def _check_simulate_args(spec, theta_vec, horizon, sample_times):
    require_valid(spec)
    theta = np.asarray(theta_vec, dtype=float)
    if theta.shape != (spec.class_count,):
        raise ValueError("theta_vec length must equal class_count")
    if np.any(theta < 0):
        raise ValueError("arrival rates must be nonnegative")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if sample_times is not None:
        st = np.asarray(sample_times, dtype=float)
        if st.ndim != 1 or np.any(np.diff(st) < 0) or (st.size and st[0] < 0):
            raise ValueError("sample_times must be ascending and nonnegative")
        if st.size and st[-1] > horizon:
            raise ValueError("sample_times must not exceed the horizon")
        return theta, st
    return theta, None


def simulate(
    spec: NetworkSpec,
    theta_vec,
    horizon: float,
    seed: int,
    initial: NetworkState | None = None,
    *,
    alpha: float = 1.0,
    event_cap: int = DEFAULT_EVENT_CAP,
    sample_times=None,
    method: str = "kernel",
    trace: list | None = None,
) -> SimOutcome:
    """Run the jump chain from ``initial`` (default: empty) to ``horizon``.

    Deterministic in ``seed``.  ``sample_times`` (ascending, within the
    horizon) asks for the class-count vector at those times.  ``trace``
    is a list that receives (time, kind, from_class, to_class, total_jobs)
    per event; tracing runs on the reference executor.
    """
    theta, st = _check_simulate_args(spec, theta_vec, horizon, sample_times)
    if initial is None:
        initial = empty_state(spec)
    if trace is not None:
        method = "reference"
    if method == "reference":
        return _simulate_reference(
            spec, theta, horizon, seed, initial, alpha, event_cap, st, trace
        )
    if method != "kernel":
        raise ValueError(f"unknown method {method!r}")
    from . import _kernel

    return _kernel.simulate_kernel(
        spec, theta, horizon, seed, initial, alpha, event_cap, st
    )


def _simulate_reference(
    spec, theta, horizon, seed, initial, alpha, event_cap, sample_times, trace
):
    """One event at a time through the queue-config operators.

    Keep the arithmetic in lockstep with ``_kernel.run_chain``: same
    draw order, same accumulation order, same tie-breaking.
    """
    d = spec.class_count
    theta_l = [float(t) for t in theta]
    beta = [float(b) for b in spec.service_rates]
    routing = [[float(p) for p in row] for row in spec.routing]

    state = initial
    counts = list(state_counts(spec, state))
    g = Xoshiro256PP(seed)

    n_samples = 0 if sample_times is None else len(sample_times)
    samples = np.zeros((n_samples, d), dtype=np.int64) if n_samples else None
    si = 0

    t = 0.0
    events = arrivals = departures = 0

    while True:
        w = _weight_vector(spec, state)
        l = 0.0
        for k in range(d):
            l += theta_l[k]
        for k in range(d):
            l += w[k] * beta[k]

        if l == 0.0:
            while si < n_samples and sample_times[si] <= horizon:
                samples[si, :] = counts
                si += 1
            t = horizon
            break

        u1 = g.uniform()
        dt = -math.log(u1) / l
        tn = t + dt
        if tn > horizon:
            while si < n_samples and sample_times[si] <= horizon:
                samples[si, :] = counts
                si += 1
            t = horizon
            break
        if events >= event_cap:
            raise EventBudgetError(
                f"event budget {event_cap} exhausted at model time {t:.6g}"
            )
        while si < n_samples and sample_times[si] < tn:
            samples[si, :] = counts
            si += 1
        t = tn

        u2 = g.uniform()
        target = u2 * l
        acc = 0.0
        sel_completion = False
        sel_k = -1
        frac = 0.0
        last_is_completion = False
        last_k = -1
        last_prev = 0.0
        last_r = 0.0
        for k in range(d):
            th = theta_l[k]
            if th > 0.0:
                acc += th
                if target < acc:
                    sel_k = k
                    break
                last_is_completion = False
                last_k = k
        if sel_k < 0:
            for k in range(d):
                r = w[k] * beta[k]
                if r > 0.0:
                    prev = acc
                    acc += r
                    if target < acc:
                        sel_completion = True
                        sel_k = k
                        frac = (target - prev) / r
                        break
                    last_is_completion = True
                    last_k = k
                    last_prev = prev
                    last_r = r
        if sel_k < 0:
            # u2 == 1 or accumulated roundoff: take the last live event
            sel_completion = last_is_completion
            sel_k = last_k
            if sel_completion:
                frac = (target - last_prev) / last_r

        if not sel_completion:
            event = TransitionEvent.arrival(sel_k)
            arrivals += 1
            counts[sel_k] += 1
        else:
            row = routing[sel_k]
            racc = 0.0
            dest = -2
            last_dest = -2
            for l2 in range(d):
                p = row[l2]
                if p > 0.0:
                    racc += p
                    if frac < racc:
                        dest = l2
                        break
                    last_dest = l2
            if dest == -2:
                dest = -1 if (1.0 - racc) > 0.0 else last_dest
            if dest < 0:
                event = TransitionEvent.departure(sel_k)
                departures += 1
                counts[sel_k] -= 1
            else:
                event = TransitionEvent.class_change(sel_k, dest)
                counts[sel_k] -= 1
                counts[dest] += 1
        state = apply_event(spec, state, event)
        events += 1
        if trace is not None:
            trace.append((t, event.kind, event.cls_from, event.cls_to, sum(counts)))

    return SimOutcome(
        terminal_state=state,
        event_count=events,
        functional_value=math.exp(-alpha * total_jobs(state)),
        elapsed_model_time=t,
        arrival_count=arrivals,
        departure_count=departures,
        samples=samples,
        sample_times=None if sample_times is None else np.asarray(sample_times),
    )
