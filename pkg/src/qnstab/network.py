"""Network description and its deterministic traffic algebra.

A multiclass queueing network has stations 1..S and job classes 1..d
(0-indexed here).  Each class k is served at a fixed station, arrives from
outside at rate ``theta[k]``, is served at rate ``beta[k]``, and on service
completion moves to class l with probability ``routing[k][l]`` or leaves
with the remainder.  From these data we compute effective arrival rates,
per-station traffic rates, and the subcritical threshold along a ray in
arrival-rate space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

_POLICY_KINDS = (
    "fcfs",
    "sbp",
    "ps-equalitarian",
    "ps-proportional",
    "ps-preferential",
)

#: policies that carry a priority order over the station's classes
_PRIORITY_KINDS = ("sbp", "ps-preferential")


class ValidationError(ValueError):
    """A network specification failed validation."""


class DegenerateRayError(ValueError):
    """A ray direction puts zero load on every station."""


@dataclass(frozen=True)
class StationPolicy:
    """Service discipline of one station.

    kind is one of ``fcfs``, ``sbp``, ``ps-equalitarian``,
    ``ps-proportional``, ``ps-preferential``.  ``sbp`` and
    ``ps-preferential`` need a priority order: a permutation of the
    station's classes, highest priority first.
    """

    kind: str
    priority: tuple[int, ...] | None = None

    @staticmethod
    def fcfs() -> "StationPolicy":
        return StationPolicy("fcfs")

    @staticmethod
    def sbp(priority) -> "StationPolicy":
        return StationPolicy("sbp", tuple(priority))

    @staticmethod
    def ps(discipline: str, priority=None) -> "StationPolicy":
        kind = "ps-" + discipline
        return StationPolicy(kind, tuple(priority) if priority is not None else None)


@dataclass(frozen=True)
class NetworkSpec:
    """Immutable description of a multiclass queueing network.

    All sequences are plain tuples so the spec is hashable; classes and
    stations are 0-indexed.  ``routing`` rows may sum to less than 1 — the
    remainder is the probability of leaving the network.
    """

    station_count: int
    class_count: int
    station_of: tuple[int, ...]
    arrival_rates: tuple[float, ...]
    service_rates: tuple[float, ...]
    routing: tuple[tuple[float, ...], ...]
    station_policies: tuple[StationPolicy, ...]

    def classes_at(self, station: int) -> tuple[int, ...]:
        """Classes served at ``station``, in ascending class order."""
        return tuple(
            k for k in range(self.class_count) if self.station_of[k] == station
        )

    def routing_matrix(self) -> np.ndarray:
        return np.array(self.routing, dtype=float)

    def theta(self) -> np.ndarray:
        return np.array(self.arrival_rates, dtype=float)

    def beta(self) -> np.ndarray:
        return np.array(self.service_rates, dtype=float)


@dataclass(frozen=True)
class RayDirection:
    """A direction in arrival-rate space; componentwise >= 0, not all zero.

    Directions are used as given — they are deliberately not normalized,
    so thresholds along (1, v) match the slope convention of the
    two-class tables.
    """

    direction: tuple[float, ...]

    def __post_init__(self):
        if len(self.direction) == 0:
            raise ValueError("empty direction")
        if any(v < 0 for v in self.direction):
            raise ValueError("ray components must be nonnegative")
        if all(v == 0 for v in self.direction):
            raise ValueError("ray direction must have a positive component")

    def as_array(self) -> np.ndarray:
        return np.array(self.direction, dtype=float)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    message: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            msg = f" — {c.message}" if c.message else ""
            lines.append(f"[{status}] {c.name}{msg}")
        return "\n".join(lines)


# Neumann partial sums of R' must contract below this within the cap for
# the routing matrix to count as substochastic with spectral radius < 1.
_NEUMANN_TOL = 1e-12
_NEUMANN_CAP = 10**6


def _neumann_contracts(routing: np.ndarray, cap: int = _NEUMANN_CAP) -> bool:
    """True iff (R')^m -> 0, checked by powering R' against the ones vector."""
    x = np.ones(routing.shape[0])
    rt = routing.T.copy()
    for _ in range(cap):
        x = rt @ x
        m = x.max(initial=0.0)
        if m < _NEUMANN_TOL:
            return True
        if not math.isfinite(m):
            return False
    return False


def validate(spec: NetworkSpec, *, neumann_cap: int = _NEUMANN_CAP) -> ValidationReport:
    """Check every structural invariant of a network spec.

    Never raises; failures are the report's content.  A failed report
    blocks all downstream operations.
    """
    checks: list[CheckResult] = []

    def add(name, passed, message=""):
        checks.append(CheckResult(name, bool(passed), message))

    S, d = spec.station_count, spec.class_count
    add("station_count positive", S >= 1)
    add("class_count >= station_count", d >= S >= 1)
    add("station_of length", len(spec.station_of) == d)

    in_range = all(0 <= i < S for i in spec.station_of)
    add("station_of in range", in_range)
    if in_range:
        served = set(spec.station_of)
        missing = sorted(set(range(S)) - served)
        add(
            "station map surjective",
            not missing,
            "" if not missing else f"stations with no class: {missing}",
        )

    add("arrival_rates length", len(spec.arrival_rates) == d)
    add("arrival rates nonnegative", all(t >= 0 for t in spec.arrival_rates))
    add("service_rates length", len(spec.service_rates) == d)
    add("service rates positive", all(b > 0 for b in spec.service_rates))

    shape_ok = len(spec.routing) == d and all(len(r) == d for r in spec.routing)
    add("routing shape", shape_ok)
    if shape_ok:
        entries_ok = all(0 <= p <= 1 for row in spec.routing for p in row)
        add("routing entries in [0,1]", entries_ok)
        bad_rows = [
            i + 1 for i, row in enumerate(spec.routing) if sum(row) > 1 + 1e-12
        ]
        add(
            "routing substochastic",
            not bad_rows,
            "" if not bad_rows else f"routing row sum > 1 (rows {bad_rows})",
        )
        if entries_ok and not bad_rows:
            contracts = _neumann_contracts(spec.routing_matrix(), neumann_cap)
            add(
                "routing Neumann series convergent",
                contracts,
                "" if contracts else "Neumann series divergent (spectral radius not < 1)",
            )

    add("one policy per station", len(spec.station_policies) == S)
    for i, pol in enumerate(spec.station_policies[:S]):
        kind_ok = pol.kind in _POLICY_KINDS
        add(f"station {i + 1} policy kind", kind_ok,
            "" if kind_ok else f"unknown policy kind {pol.kind!r}")
        if pol.kind in _PRIORITY_KINDS:
            want = spec.classes_at(i) if in_range else ()
            got = pol.priority or ()
            perm_ok = sorted(got) == sorted(want)
            add(
                f"station {i + 1} priority permutation",
                perm_ok,
                "" if perm_ok
                else f"priority {got} is not a permutation of classes {want}",
            )
        elif pol.priority is not None:
            add(f"station {i + 1} priority unused", False,
                f"{pol.kind} does not take a priority order")

    return ValidationReport(tuple(checks))


@lru_cache(maxsize=256)
def _checked(spec: NetworkSpec) -> ValidationReport:
    return validate(spec)


def require_valid(spec: NetworkSpec) -> None:
    """Raise ValidationError if the spec fails any invariant (cached)."""
    report = _checked(spec)
    if not report.ok:
        names = "; ".join(c.message or c.name for c in report.failures())
        raise ValidationError(f"invalid network spec: {names}")


def effective_arrival_rates(spec: NetworkSpec, theta: np.ndarray | None = None) -> np.ndarray:
    """Solve (I - R') lambda = theta for the effective arrival rates."""
    require_valid(spec)
    if theta is None:
        theta = spec.theta()
    theta = np.asarray(theta, dtype=float)
    d = spec.class_count
    a = np.eye(d) - spec.routing_matrix().T
    lam = np.linalg.solve(a, theta)
    # feedback only adds load; tiny negatives can only be solver noise
    lam[(lam < 0) & (lam > -1e-9)] = 0.0
    return lam


def traffic_rates(spec: NetworkSpec, theta: np.ndarray | None = None) -> np.ndarray:
    """Per-station utilizations rho_i = sum over classes at i of lambda_k/beta_k."""
    lam = effective_arrival_rates(spec, theta)
    loads = lam / spec.beta()
    rho = np.zeros(spec.station_count)
    for k, i in enumerate(spec.station_of):
        rho[i] += loads[k]
    return rho


def subcritical_threshold(
    spec: NetworkSpec, ray: RayDirection
) -> tuple[float, np.ndarray]:
    """Largest multiplier keeping every station subcritical along a ray.

    Returns (theta_bar, deltas) where deltas[i] is the multiplier at which
    station i reaches unit traffic rate; stations the ray does not load get
    +inf and cannot bind.  theta_bar = min_i deltas[i].
    """
    require_valid(spec)
    v = ray.as_array()
    if v.shape != (spec.class_count,):
        raise ValueError(
            f"ray has {v.shape[0]} components, network has {spec.class_count} classes"
        )
    d = spec.class_count
    a = np.eye(d) - spec.routing_matrix().T
    w = np.linalg.solve(a, v)
    loads = w / spec.beta()
    station_load = np.zeros(spec.station_count)
    for k, i in enumerate(spec.station_of):
        station_load[i] += loads[k]
    with np.errstate(divide="ignore"):
        deltas = np.where(station_load > 0, 1.0 / station_load, np.inf)
    theta_bar = float(deltas.min())
    if not math.isfinite(theta_bar):
        raise DegenerateRayError("ray direction induces zero load at every station")
    return theta_bar, deltas
