"""Stochastic-approximation estimation of the stability threshold.

One iterate = one fresh simulation: at the current multiplier theta_n the
chain is run from the empty state to horizon t_n, the observed functional
value Z_n moves the iterate by the gain b_n = c1/n^omega, and the result
is clamped to [0, theta_bar].  The reported estimate is the average of
the iterates after a burn-in prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .network import RayDirection, require_valid, subcritical_threshold
from .rng import derive

_GROWTH_KINDS = ("constant", "logarithmic", "power")


@dataclass(frozen=True)
class RMSchedule:
    """Gain/horizon schedules and run length for one threshold estimate.

    gain(n) = gain_c1 / n**gain_omega with gain_omega in (1/2, 1], so the
    usual divergent-sum / convergent-square-sum conditions hold for free.
    The simulation horizon t_n must grow without bound for the iteration
    to target the limiting functional; the default is logarithmic growth
    t_n = horizon_c2 * ln(1 + n).
    """

    epsilon: float
    gain_c1: float
    iterations: int
    gain_omega: float = 0.75
    horizon_c2: float = 1000.0
    horizon_growth: str = "logarithmic"
    horizon_gamma: float = 1.0
    theta_init: float | None = None
    averaging_burn_in: float = 0.1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.gain_c1 > 0:
            raise ValueError("gain_c1 must be positive")
        if not 0.5 < self.gain_omega <= 1.0:
            raise ValueError("gain_omega must lie in (1/2, 1]")
        if not self.horizon_c2 > 0:
            raise ValueError("horizon_c2 must be positive")
        if self.horizon_growth not in _GROWTH_KINDS:
            raise ValueError(f"horizon_growth must be one of {_GROWTH_KINDS}")
        if self.horizon_growth == "power" and not self.horizon_gamma > 0:
            raise ValueError("horizon_gamma must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.theta_init is not None and not self.theta_init > 0:
            raise ValueError("theta_init must be positive when given")
        if not 0.0 <= self.averaging_burn_in < 1.0:
            raise ValueError("averaging_burn_in must lie in [0, 1)")

    def gain(self, n: int) -> float:
        return self.gain_c1 / n**self.gain_omega

    def horizon(self, n: int) -> float:
        if self.horizon_growth == "constant":
            return self.horizon_c2
        if self.horizon_growth == "logarithmic":
            return self.horizon_c2 * math.log(1.0 + n)
        return self.horizon_c2 * n**self.horizon_gamma


@dataclass(frozen=True)
class ThresholdEstimate:
    theta_hat: float
    final_iterate: float
    iterate_trace: np.ndarray = field(repr=False)
    theta_bar: float
    clamp_events: int
    clamp_warning: str | None = None


def rm_step(theta_n: float, z_n: float, b_n: float, epsilon: float, theta_bar: float) -> float:
    """One clamped root-finding update: theta + b*(z - eps) into [0, theta_bar]."""
    return min(theta_bar, max(theta_n + b_n * (z_n - epsilon), 0.0))


def estimate_threshold(
    spec,
    ray: RayDirection,
    schedule: RMSchedule,
    seed: int,
    *,
    alpha: float = 1.0,
    method: str = "kernel",
    event_cap: int = engine.DEFAULT_EVENT_CAP,
    iterate_log: list | None = None,
) -> ThresholdEstimate:
    """Run the full recursion along ``ray`` and average the iterates.

    Each iterate n draws its simulation from an independent substream
    derived from (seed, 1, n), so results are reproducible and identical
    under any execution interleaving.  ``iterate_log``, when given, is
    appended one (n, theta_n, z_n, b_n, t_n) tuple per iterate.
    """
    require_valid(spec)
    theta_bar, _ = subcritical_threshold(spec, ray)
    if math.isinf(theta_bar):
        raise ValueError("ray loads no station; threshold is unbounded")

    theta_init = schedule.theta_init if schedule.theta_init is not None else theta_bar / 2
    if not 0.0 < theta_init < theta_bar:
        raise ValueError(
            f"theta_init={theta_init} outside the open interval (0, {theta_bar})"
        )

    direction = ray.as_array()
    n_iter = schedule.iterations
    trace = np.empty(n_iter, dtype=np.float64)
    theta_n = theta_init
    clamp_events = 0

    for n in range(1, n_iter + 1):
        trace[n - 1] = theta_n
        b_n = schedule.gain(n)
        t_n = schedule.horizon(n)
        outcome = engine.simulate(
            spec,
            theta_n * direction,
            t_n,
            derive(seed, 1, n),
            alpha=alpha,
            event_cap=event_cap,
            method=method,
        )
        z_n = outcome.functional_value
        if iterate_log is not None:
            iterate_log.append((n, theta_n, z_n, b_n, t_n))
        theta_n = rm_step(theta_n, z_n, b_n, schedule.epsilon, theta_bar)
        if theta_n == 0.0 or theta_n == theta_bar:
            clamp_events += 1

    burn = int(schedule.averaging_burn_in * n_iter)
    averaged = trace[burn:]
    theta_hat = float(averaged.mean())

    warning = None
    on_clamp = np.count_nonzero((averaged == 0.0) | (averaged == theta_bar))
    if on_clamp > 0.5 * averaged.size:
        warning = (
            f"{on_clamp}/{averaged.size} averaged iterates sit on a clamp bound; "
            "epsilon is likely outside the achievable range for this network"
        )

    return ThresholdEstimate(
        theta_hat=theta_hat,
        final_iterate=theta_n,
        iterate_trace=trace,
        theta_bar=theta_bar,
        clamp_events=clamp_events,
        clamp_warning=warning,
    )


def error_decomposition(
    estimate: ThresholdEstimate,
    theta_star: float | None = None,
    theta_eps: float | None = None,
) -> dict:
    """Split |theta_hat - theta_star| into its bias and noise parts.

    With an exact threshold theta_star and the root theta_eps of the limit
    equation available (closed-form cases), the absolute error decomposes
    as |theta_hat - theta_eps| (sampling noise) plus theta_star - theta_eps
    (the deterministic gap from stopping at epsilon > 0).  Without an
    oracle only the trace dispersion is reported.
    """
    report = {
        "theta_hat": estimate.theta_hat,
        "trace_std": float(np.std(estimate.iterate_trace)),
    }
    if theta_star is None:
        return report
    if theta_eps is None:
        raise ValueError("theta_eps is required alongside theta_star")
    report["theta_star"] = float(theta_star)
    report["theta_eps"] = float(theta_eps)
    report["total_error"] = abs(estimate.theta_hat - theta_star)
    report["deterministic_part"] = float(theta_star - theta_eps)
    report["random_part"] = abs(estimate.theta_hat - theta_eps)
    return report
