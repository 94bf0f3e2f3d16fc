"""Monte-Carlo audit of the monotone-decay assumption.

The root-finding scheme is only sound when the expected functional value
is non-increasing in both the arrival multiplier and the horizon.  That
property has no general proof, so it is checked empirically: estimate
E[exp(-alpha * jobs)] on a (theta, t) grid and flag any adjacent increase
larger than a multiple of the combined standard error.
"""

from __future__ import annotations

from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .network import RayDirection, require_valid
from .rng import derive


@dataclass(frozen=True)
class PhiSurface:
    theta_grid: tuple[float, ...]
    t_grid: tuple[float, ...]
    estimates: np.ndarray = field(repr=False)
    std_errors: np.ndarray = field(repr=False)
    replications: int


MonotoneFlag = namedtuple("MonotoneFlag", "axis theta_index t_index increase allowance")


@dataclass(frozen=True)
class MonotonicityVerdict:
    passed: bool
    flags: tuple[MonotoneFlag, ...]
    noise_multiplier: float
    # numerical strict decrease of the largest-t column: a heuristic stand-in
    # for the limit functional being strictly decreasing, nothing stronger
    limit_column_strictly_decreasing: bool


def _strictly_increasing(grid) -> bool:
    return all(b > a for a, b in zip(grid, grid[1:]))


def estimate_surface(
    spec,
    ray: RayDirection,
    theta_grid,
    t_grid,
    replications: int,
    seed: int,
    *,
    alpha: float = 1.0,
    method: str = "kernel",
    jobs: int = 1,
) -> PhiSurface:
    """Estimate the expected functional on the grid, empty start per cell.

    Cell (i, j) averages ``replications`` independent runs at arrival
    vector theta_grid[i] * ray and horizon t_grid[j], each on its own
    substream derived from (seed, 3, i, j, rep).  Cells are independent;
    no variance-reduction coupling is applied, so the attached standard
    errors are honest.
    """
    require_valid(spec)
    theta_grid = tuple(float(x) for x in theta_grid)
    t_grid = tuple(float(x) for x in t_grid)
    if not theta_grid or not t_grid:
        raise ValueError("grids must be non-empty")
    if not _strictly_increasing(theta_grid) or not _strictly_increasing(t_grid):
        raise ValueError("grids must be strictly increasing")
    if any(x < 0 for x in theta_grid) or any(t < 0 for t in t_grid):
        raise ValueError("grid values must be nonnegative")
    if replications < 1:
        raise ValueError("replications must be >= 1")

    direction = ray.as_array()
    estimates = np.empty((len(theta_grid), len(t_grid)))
    std_errors = np.empty_like(estimates)

    def run_cell(cell):
        i, j = cell
        theta_vec = theta_grid[i] * direction
        values = np.empty(replications)
        for rep in range(replications):
            outcome = engine.simulate(
                spec,
                theta_vec,
                t_grid[j],
                derive(seed, 3, i, j, rep),
                alpha=alpha,
                method=method,
            )
            values[rep] = outcome.functional_value
        est = float(values.mean())
        if replications > 1:
            se = float(values.std(ddof=1) / np.sqrt(replications))
        else:
            se = float("inf")
        return i, j, est, se

    cells = [(i, j) for i in range(len(theta_grid)) for j in range(len(t_grid))]
    if jobs > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]
    for i, j, est, se in results:
        estimates[i, j] = est
        std_errors[i, j] = se

    return PhiSurface(
        theta_grid=theta_grid,
        t_grid=t_grid,
        estimates=estimates,
        std_errors=std_errors,
        replications=replications,
    )


def check_monotone(surface: PhiSurface, noise_multiplier: float = 3.0) -> MonotonicityVerdict:
    """Flag adjacent grid pairs where the estimate rises beyond noise.

    A pair is flagged when the increase exceeds noise_multiplier times the
    combined standard error of the two cells; the verdict passes iff no
    pair is flagged in either grid direction.
    """
    est, se = surface.estimates, surface.std_errors
    n_theta, n_t = est.shape
    flags = []
    for j in range(n_t):
        for i in range(n_theta - 1):
            increase = est[i + 1, j] - est[i, j]
            allowance = noise_multiplier * float(np.hypot(se[i, j], se[i + 1, j]))
            if increase > allowance:
                flags.append(MonotoneFlag("theta", i, j, float(increase), allowance))
    for i in range(n_theta):
        for j in range(n_t - 1):
            increase = est[i, j + 1] - est[i, j]
            allowance = noise_multiplier * float(np.hypot(se[i, j], se[i, j + 1]))
            if increase > allowance:
                flags.append(MonotoneFlag("t", i, j, float(increase), allowance))

    last_col = est[:, -1]
    strict = bool(np.all(np.diff(last_col) < 0)) if n_theta > 1 else True
    return MonotonicityVerdict(
        passed=not flags,
        flags=tuple(flags),
        noise_multiplier=noise_multiplier,
        limit_column_strictly_decreasing=strict,
    )
