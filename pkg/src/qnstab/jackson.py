"""Closed-form results for networks with one class per station.

For these networks the stationary queue lengths are independent geometrics,
so the limiting value of E[exp(-alpha * total jobs)] along a ray is an
explicit product and the exact critical threshold is known.  Everything
here is cheap analytics; the test suite uses it as ground truth for the
stochastic machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import (
    NetworkSpec,
    RayDirection,
    require_valid,
    subcritical_threshold,
    traffic_rates,
)

_ROOT_TOL = 1e-12


class NotJacksonError(ValueError):
    """Raised when a station serves more than one class."""


def _require_jackson(spec: NetworkSpec) -> None:
    require_valid(spec)
    crowded = [i for i in range(spec.station_count) if len(spec.classes_at(i)) > 1]
    if crowded:
        raise NotJacksonError(
            f"stations {crowded} serve more than one class; "
            "closed-form results need exactly one class per station"
        )


@dataclass(frozen=True)
class JacksonOracle:
    """Per-station critical multipliers along a fixed ray, plus alpha.

    At arrival-rate multiplier theta the utilization of station i is
    theta / deltas[i], so the limit functional is a product of one factor
    per station.
    """

    deltas: tuple[float, ...]
    alpha: float = 1.0

    def __post_init__(self):
        if not self.deltas:
            raise ValueError("deltas must be non-empty")
        if any(d <= 0 for d in self.deltas):
            raise ValueError("deltas must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def theta_bar(self) -> float:
        return min(self.deltas)


def from_network(spec: NetworkSpec, ray: RayDirection, alpha: float = 1.0) -> JacksonOracle:
    """Build the oracle for a single-class-per-station network along ``ray``."""
    _require_jackson(spec)
    _, deltas = subcritical_threshold(spec, ray)
    return JacksonOracle(deltas=tuple(float(d) for d in deltas), alpha=alpha)


def phi_closed_form(oracle: JacksonOracle, theta: float) -> float:
    """Limiting functional value: prod_i (1 - r_i) / (1 - r_i e^{-alpha}).

    Here r_i = theta / deltas[i] is station i's utilization.  Defined for
    0 <= theta < min(deltas); the product vanishes at the threshold.
    """
    if theta < 0 or theta >= oracle.theta_bar:
        raise ValueError(
            f"theta={theta} outside the stable range [0, {oracle.theta_bar})"
        )
    damp = math.exp(-oracle.alpha)
    value = 1.0
    for delta in oracle.deltas:
        if math.isinf(delta):
            continue
        r = theta / delta
        value *= (1.0 - r) / (1.0 - r * damp)
    return value


def theta_eps_root(oracle: JacksonOracle, epsilon: float) -> float:
    """Unique root of phi(theta) = epsilon on [0, min deltas), by bisection."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    if epsilon == 1.0:
        return 0.0
    hi = oracle.theta_bar
    if math.isinf(hi):
        raise ValueError("phi is identically 1 (no loaded station); no root")
    lo = 0.0
    # phi(lo) = 1 > eps and phi -> 0 at hi; bisect the monotone gap
    while hi - lo > _ROOT_TOL:
        mid = 0.5 * (lo + hi)
        if phi_closed_form(oracle, mid) > epsilon:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def exact_stability_region(spec: NetworkSpec):
    """Exact membership test: theta-vector -> all station loads < 1."""
    _require_jackson(spec)

    def inside(theta_vec) -> bool:
        theta = np.asarray(theta_vec, dtype=np.float64)
        if theta.shape != (spec.class_count,):
            raise ValueError(
                f"theta must have length {spec.class_count}, got {theta.shape}"
            )
        if np.any(theta < 0):
            raise ValueError("arrival rates must be nonnegative")
        return bool(np.all(traffic_rates(spec, theta) < 1.0))

    return inside


def stationary_success_probabilities(spec: NetworkSpec, theta_vec) -> np.ndarray:
    """Per-station geometric parameter 1 - rho_i of the stationary law."""
    _require_jackson(spec)
    rho = traffic_rates(spec, np.asarray(theta_vec, dtype=np.float64))
    if np.any(rho >= 1.0):
        raise ValueError("network is not subcritical at this arrival vector")
    return 1.0 - rho
