"""Compiled event loop for the jump-chain simulator.

This is the hot path: a single numba-jitted function advances the chain
event by event on flat arrays.  Queue contents are encoded as

* ``counts[k]``     — network-wide jobs of class k (all policies),
* ``head_class[i]`` — class at the server of an SBP station (-1 if idle),
* ``rings[i]``      — per-station ring buffer holding the FCFS sequence.

The random stream (xoshiro256++) and every floating-point decision repeat
``engine._simulate_reference`` exactly; ``tests/test_engine.py`` asserts
bit-identical outcomes between the two executors.
"""

from __future__ import annotations

import math
from collections import deque, namedtuple
from functools import lru_cache

import numpy as np
from numba import njit
from numba.typed import List

from . import policies
from .network import NetworkSpec
from .rng import Xoshiro256PP

_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U19 = np.uint64(19)
_U23 = np.uint64(23)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)
_U41 = np.uint64(41)
_U45 = np.uint64(45)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO53_INV = 2.0**-53

_KIND = {
    "fcfs": 0,
    "sbp": 1,
    "ps-equalitarian": 2,
    "ps-proportional": 3,
    "ps-preferential": 4,
}

CompiledNet = namedtuple(
    "CompiledNet", "station_of beta routing policy_kind st_ptr st_classes"
)


@lru_cache(maxsize=128)
def compile_network(spec: NetworkSpec) -> CompiledNet:
    """Flatten a validated spec into the arrays the kernel consumes."""
    S, d = spec.station_count, spec.class_count
    station_of = np.array(spec.station_of, dtype=np.int64)
    beta = np.array(spec.service_rates, dtype=np.float64)
    routing = np.ascontiguousarray(spec.routing_matrix())
    policy_kind = np.empty(S, dtype=np.int64)
    st_ptr = np.zeros(S + 1, dtype=np.int64)
    ordered: list[int] = []
    for i in range(S):
        pol = spec.station_policies[i]
        policy_kind[i] = _KIND[pol.kind]
        members = pol.priority if pol.kind in ("sbp", "ps-preferential") else spec.classes_at(i)
        ordered.extend(members)
        st_ptr[i + 1] = len(ordered)
    st_classes = np.array(ordered, dtype=np.int64)
    assert len(ordered) == d
    return CompiledNet(station_of, beta, routing, policy_kind, st_ptr, st_classes)


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _U30)) * _MIX1
    z = (z ^ (z >> _U27)) * _MIX2
    return z ^ (z >> _U31)


@njit(cache=True, nogil=True, inline="always")
def _rng_next(s):
    s0 = s[0]
    s1 = s[1]
    s2 = s[2]
    s3 = s[3]
    x = s0 + s3
    result = ((x << _U23) | (x >> _U41)) + s0
    t = s1 << _U17
    s2 = s2 ^ s0
    s3 = s3 ^ s1
    s1 = s1 ^ s2
    s0 = s0 ^ s3
    s2 = s2 ^ t
    s3 = (s3 << _U45) | (s3 >> _U19)
    s[0] = s0
    s[1] = s1
    s[2] = s2
    s[3] = s3
    return result


@njit(cache=True, nogil=True, inline="always")
def _uniform(s):
    # in (0, 1]: log(u) is always finite
    return (np.float64(_rng_next(s) >> _U11) + 1.0) * _TWO53_INV


@njit(cache=True, nogil=True)
def rng_state_from_seed(seed):
    """splitmix64 expansion of a 64-bit seed, as in rng.Xoshiro256PP."""
    s = np.empty(4, dtype=np.uint64)
    # cast before mixing: int64 + uint64 would promote and wrap differently
    st = np.uint64(seed)
    for i in range(4):
        st = st + _GAMMA
        s[i] = _mix64(st)
    return s


@njit(cache=True, nogil=True)
def rng_fill(seed, out):
    """Fill ``out`` with raw uint64 draws (parity testing hook)."""
    s = rng_state_from_seed(seed)
    for i in range(out.shape[0]):
        out[i] = _rng_next(s)


@njit(cache=True, nogil=True)
def run_chain(
    station_of,
    beta,
    routing,
    policy_kind,
    st_ptr,
    st_classes,
    theta,
    horizon,
    event_cap,
    rng,
    counts,
    head_class,
    rings,
    ring_start,
    ring_len,
    sample_times,
    samples,
    w,
):
    d = station_of.shape[0]
    S = policy_kind.shape[0]
    n_samples = sample_times.shape[0]

    t = 0.0
    events = np.int64(0)
    arrivals = np.int64(0)
    departures = np.int64(0)
    si = 0
    status = np.int64(0)

    while True:
        # service-allocation weights, then the total rate
        for k in range(d):
            w[k] = 0.0
        for i in range(S):
            kind = policy_kind[i]
            if kind == 0:  # fcfs: the head is served
                if ring_len[i] > 0:
                    w[rings[i][ring_start[i]]] = 1.0
            elif kind == 1:  # sbp: the head is served
                h = head_class[i]
                if h >= 0:
                    w[h] = 1.0
            elif kind == 2:  # ps equalitarian
                ns = 0
                for j in range(st_ptr[i], st_ptr[i + 1]):
                    if counts[st_classes[j]] > 0:
                        ns += 1
                if ns > 0:
                    share = 1.0 / ns
                    for j in range(st_ptr[i], st_ptr[i + 1]):
                        if counts[st_classes[j]] > 0:
                            w[st_classes[j]] = share
            elif kind == 3:  # ps proportional
                tot = np.int64(0)
                for j in range(st_ptr[i], st_ptr[i + 1]):
                    tot += counts[st_classes[j]]
                if tot > 0:
                    for j in range(st_ptr[i], st_ptr[i + 1]):
                        c = counts[st_classes[j]]
                        if c > 0:
                            w[st_classes[j]] = c / tot
            else:  # ps preferential: highest-priority class present
                for j in range(st_ptr[i], st_ptr[i + 1]):
                    if counts[st_classes[j]] > 0:
                        w[st_classes[j]] = 1.0
                        break

        l = 0.0
        for k in range(d):
            l += theta[k]
        for k in range(d):
            l += w[k] * beta[k]

        if l == 0.0:
            while si < n_samples and sample_times[si] <= horizon:
                for q in range(d):
                    samples[si, q] = counts[q]
                si += 1
            t = horizon
            break

        u1 = _uniform(rng)
        dt = -np.log(u1) / l
        tn = t + dt
        if tn > horizon:
            while si < n_samples and sample_times[si] <= horizon:
                for q in range(d):
                    samples[si, q] = counts[q]
                si += 1
            t = horizon
            break
        if events >= event_cap:
            status = np.int64(1)
            break
        while si < n_samples and sample_times[si] < tn:
            for q in range(d):
                samples[si, q] = counts[q]
            si += 1
        t = tn

        u2 = _uniform(rng)
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
            th = theta[k]
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
            sel_completion = last_is_completion
            sel_k = last_k
            if sel_completion:
                frac = (target - last_prev) / last_r

        if not sel_completion:
            # external arrival of class sel_k
            arrivals += 1
            counts[sel_k] += 1
            i = station_of[sel_k]
            kind = policy_kind[i]
            if kind == 0:
                cap = rings[i].shape[0]
                if ring_len[i] == cap:
                    grown = np.empty(2 * cap, dtype=np.int64)
                    st0 = ring_start[i]
                    for j in range(ring_len[i]):
                        grown[j] = rings[i][(st0 + j) % cap]
                    rings[i] = grown
                    ring_start[i] = 0
                    cap = 2 * cap
                rings[i][(ring_start[i] + ring_len[i]) % cap] = sel_k
                ring_len[i] += 1
            elif kind == 1:
                if head_class[i] < 0:
                    head_class[i] = sel_k
        else:
            # service completion of class sel_k: route with the residual
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
                if (1.0 - racc) > 0.0:
                    dest = -1
                else:
                    dest = last_dest

            counts[sel_k] -= 1
            i = station_of[sel_k]
            kind = policy_kind[i]
            if kind == 0:
                ring_start[i] = (ring_start[i] + 1) % rings[i].shape[0]
                ring_len[i] -= 1
            elif kind == 1:
                head_class[i] = -1
                for j in range(st_ptr[i], st_ptr[i + 1]):
                    m = st_classes[j]
                    if counts[m] > 0:
                        head_class[i] = m
                        break

            if dest < 0:
                departures += 1
            else:
                counts[dest] += 1
                i2 = station_of[dest]
                kind2 = policy_kind[i2]
                if kind2 == 0:
                    cap = rings[i2].shape[0]
                    if ring_len[i2] == cap:
                        grown = np.empty(2 * cap, dtype=np.int64)
                        st0 = ring_start[i2]
                        for j in range(ring_len[i2]):
                            grown[j] = rings[i2][(st0 + j) % cap]
                        rings[i2] = grown
                        ring_start[i2] = 0
                        cap = 2 * cap
                    rings[i2][(ring_start[i2] + ring_len[i2]) % cap] = dest
                    ring_len[i2] += 1
                elif kind2 == 1:
                    if head_class[i2] < 0:
                        head_class[i2] = dest
        events += 1

    return status, events, t, arrivals, departures


def _state_arrays(spec: NetworkSpec, cn: CompiledNet, initial):
    """Encode a NetworkState into the kernel's flat representation."""
    S, d = spec.station_count, spec.class_count
    counts = np.zeros(d, dtype=np.int64)
    head_class = np.full(S, -1, dtype=np.int64)
    rings = List()
    ring_start = np.zeros(S, dtype=np.int64)
    ring_len = np.zeros(S, dtype=np.int64)
    for i, cfg in enumerate(initial.configs):
        if isinstance(cfg, policies.FcfsConfig):
            seq = list(cfg.queue)
            buf = np.zeros(max(64, 2 * len(seq) + 2), dtype=np.int64)
            for j, k in enumerate(seq):
                buf[j] = k
                counts[k] += 1
            rings.append(buf)
            ring_len[i] = len(seq)
        else:
            rings.append(np.zeros(64, dtype=np.int64))
            if isinstance(cfg, policies.SbpConfig):
                if cfg.head is not None:
                    head_class[i] = cfg.head
                    counts[cfg.head] += 1
                for k, x in zip(cfg.classes, cfg.buffer):
                    counts[k] += x
            else:
                for k, x in zip(cfg.classes, cfg.counts):
                    counts[k] += x
    return counts, head_class, rings, ring_start, ring_len


def _rebuild_state(spec, cn, counts, head_class, rings, ring_start, ring_len):
    configs = []
    for i in range(spec.station_count):
        pol = spec.station_policies[i]
        classes = spec.classes_at(i)
        if pol.kind == "fcfs":
            n, st0, buf = ring_len[i], ring_start[i], rings[i]
            seq = deque(int(buf[(st0 + j) % buf.shape[0]]) for j in range(n))
            configs.append(policies.FcfsConfig(classes, seq))
        elif pol.kind == "sbp":
            head = int(head_class[i]) if head_class[i] >= 0 else None
            buffer = tuple(
                int(counts[k]) - (1 if head == k else 0) for k in classes
            )
            configs.append(policies.SbpConfig(classes, pol.priority, head, buffer))
        else:
            discipline = pol.kind.removeprefix("ps-")
            cts = tuple(int(counts[k]) for k in classes)
            configs.append(policies.PsConfig(classes, discipline, pol.priority, cts))
    return configs


def simulate_kernel(spec, theta, horizon, seed, initial, alpha, event_cap, sample_times):
    """Array plumbing around ``run_chain``; see ``engine.simulate``."""
    from .engine import EventBudgetError, NetworkState, SimOutcome

    cn = compile_network(spec)
    counts, head_class, rings, ring_start, ring_len = _state_arrays(spec, cn, initial)
    g = Xoshiro256PP(seed)
    rng = np.array([g.s0, g.s1, g.s2, g.s3], dtype=np.uint64)
    st = (
        np.empty(0, dtype=np.float64)
        if sample_times is None
        else np.asarray(sample_times, dtype=np.float64)
    )
    samples = np.zeros((st.shape[0], spec.class_count), dtype=np.int64)
    w = np.zeros(spec.class_count, dtype=np.float64)

    status, events, elapsed, arrivals, departures = run_chain(
        cn.station_of,
        cn.beta,
        cn.routing,
        cn.policy_kind,
        cn.st_ptr,
        cn.st_classes,
        np.asarray(theta, dtype=np.float64),
        float(horizon),
        np.int64(event_cap),
        rng,
        counts,
        head_class,
        rings,
        ring_start,
        ring_len,
        st,
        samples,
        w,
    )
    if status == 1:
        raise EventBudgetError(
            f"event budget {event_cap} exhausted at model time {elapsed:.6g}"
        )
    configs = _rebuild_state(spec, cn, counts, head_class, rings, ring_start, ring_len)
    total = int(counts.sum())
    return SimOutcome(
        terminal_state=NetworkState(tuple(configs)),
        event_count=int(events),
        functional_value=math.exp(-alpha * total),
        elapsed_model_time=float(elapsed),
        arrival_count=int(arrivals),
        departure_count=int(departures),
        samples=samples if st.shape[0] else None,
        sample_times=None if sample_times is None else st,
    )
