"""Boundary recovery for star-shaped stability regions.

The region is scanned along rays from the origin; each ray carries one
threshold estimate, the scaled directions become boundary points, and a
polyline through the angle-sorted points approximates the boundary in a
two-class coordinate plane.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimator import RMSchedule, ThresholdEstimate, estimate_threshold
from .network import RayDirection
from .rng import derive


@dataclass(frozen=True)
class RaySweepResult:
    """Per-ray estimates; entries are None where the ray failed."""

    rays: tuple[RayDirection, ...]
    thresholds: tuple[ThresholdEstimate | None, ...]
    boundary_points: tuple[tuple[float, ...] | None, ...]
    errors: tuple[str | None, ...]

    def valid_points(self) -> list[tuple[float, ...]]:
        return [p for p in self.boundary_points if p is not None]


def generate_rays(dim: int, plane: tuple[int, int], count: int) -> list[RayDirection]:
    """Unit rays at equidistant angles strictly inside the first quadrant.

    ``count`` rays are placed at angles 90*j/(count+1) degrees for
    j = 1..count, embedded in the coordinate plane spanned by the two
    given class indices (count=5 gives the 15-degree fan).
    """
    if dim < 2:
        raise ValueError("need at least two classes to span a plane")
    if count < 1:
        raise ValueError("count must be >= 1")
    a, b = plane
    if a == b:
        raise ValueError("plane indices must be distinct")
    for idx in (a, b):
        if not 0 <= idx < dim:
            raise ValueError(f"class index {idx} outside 0..{dim - 1}")
    rays = []
    for j in range(1, count + 1):
        psi = math.radians(90.0 * j / (count + 1))
        v = [0.0] * dim
        v[a] = math.cos(psi)
        v[b] = math.sin(psi)
        rays.append(RayDirection(tuple(v)))
    return rays


def sweep(
    spec,
    rays,
    schedule: RMSchedule,
    seed: int,
    *,
    alpha: float = 1.0,
    method: str = "kernel",
    jobs: int = 1,
) -> RaySweepResult:
    """Estimate the threshold on every ray; per-ray failures are recorded.

    Ray j uses the substream derived from (seed, 2, j), so the result does
    not depend on worker count or completion order.
    """
    rays = tuple(rays)

    def run(j: int):
        try:
            est = estimate_threshold(
                spec, rays[j], schedule, derive(seed, 2, j), alpha=alpha, method=method
            )
        except Exception as exc:  # noqa: BLE001 - per-ray isolation is the contract
            return None, None, f"{type(exc).__name__}: {exc}"
        point = tuple(est.theta_hat * c for c in rays[j].direction)
        return est, point, None

    if jobs > 1 and len(rays) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, range(len(rays))))
    else:
        results = [run(j) for j in range(len(rays))]

    thresholds, points, errors = zip(*results)
    return RaySweepResult(
        rays=rays,
        thresholds=tuple(thresholds),
        boundary_points=tuple(points),
        errors=tuple(errors),
    )


def _common_plane(points: np.ndarray) -> tuple[int, int]:
    live = np.flatnonzero(np.any(points != 0.0, axis=0))
    if live.size > 2:
        raise ValueError(
            f"boundary points span coordinates {live.tolist()}; "
            "interpolation needs a single two-class plane"
        )
    if live.size < 2:
        raise ValueError("boundary points span fewer than two coordinates")
    return int(live[0]), int(live[1])


def interpolate_boundary(result: RaySweepResult) -> np.ndarray:
    """Angle-sorted polyline through the boundary points, closed to the axes.

    The extreme rays' radii are copied onto the two axes of the common
    plane (no extra estimation), matching the usual star-shaped closure.
    Returns an (m, d) array of polyline vertices.
    """
    pts = result.valid_points()
    if len(pts) < 2:
        raise ValueError("need at least two valid boundary points")
    points = np.asarray(pts, dtype=np.float64)
    a, b = _common_plane(points)

    angles = np.arctan2(points[:, b], points[:, a])
    order = np.argsort(angles, kind="stable")
    points = points[order]
    angles = angles[order]

    vertices = [points[j] for j in range(points.shape[0])]
    tol = 1e-12
    if angles[0] > tol:
        first = np.zeros(points.shape[1])
        first[a] = float(np.hypot(points[0, a], points[0, b]))
        vertices.insert(0, first)
    if angles[-1] < math.pi / 2 - tol:
        last = np.zeros(points.shape[1])
        last[b] = float(np.hypot(points[-1, a], points[-1, b]))
        vertices.append(last)
    return np.asarray(vertices)
