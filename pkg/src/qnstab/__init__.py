"""Stability regions of Markovian multiclass queueing networks, by simulation.

The pieces: ``network`` describes and validates a network, ``engine``
simulates its jump chain, ``estimator`` drives the clamped stochastic
root-finding recursion along a ray, ``region`` sweeps rays into a boundary,
``audit`` checks the monotone-decay assumption, and ``jackson`` supplies
closed-form ground truth for single-class-per-station networks.
"""

from .audit import MonotonicityVerdict, PhiSurface, check_monotone, estimate_surface
from .engine import (
    EventBudgetError,
    IllegalEventError,
    NetworkState,
    SimOutcome,
    StalledStateError,
    TransitionEvent,
    empty_state,
    simulate,
)
from .estimator import (
    RMSchedule,
    ThresholdEstimate,
    error_decomposition,
    estimate_threshold,
    rm_step,
)
from .network import (
    DegenerateRayError,
    NetworkSpec,
    RayDirection,
    StationPolicy,
    ValidationError,
    effective_arrival_rates,
    require_valid,
    subcritical_threshold,
    traffic_rates,
    validate,
)
from .region import RaySweepResult, generate_rays, interpolate_boundary, sweep

__version__ = "0.1.0"

__all__ = [
    "DegenerateRayError",
    "EventBudgetError",
    "IllegalEventError",
    "MonotonicityVerdict",
    "NetworkSpec",
    "NetworkState",
    "PhiSurface",
    "RMSchedule",
    "RayDirection",
    "RaySweepResult",
    "SimOutcome",
    "StalledStateError",
    "StationPolicy",
    "ThresholdEstimate",
    "TransitionEvent",
    "ValidationError",
    "check_monotone",
    "effective_arrival_rates",
    "empty_state",
    "error_decomposition",
    "estimate_surface",
    "estimate_threshold",
    "generate_rays",
    "interpolate_boundary",
    "require_valid",
    "rm_step",
    "simulate",
    "subcritical_threshold",
    "sweep",
    "traffic_rates",
    "validate",
]
