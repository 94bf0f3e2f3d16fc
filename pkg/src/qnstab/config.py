"""Experiment-file loading.

A config file is TOML: a ``[network]`` table (or a ``file`` pointer to
another config holding one) plus optional ``[threshold]``, ``[region]``,
``[monotonicity]`` and ``[run]`` tables.  Classes and stations are
1-indexed in files and converted to 0-based indices here.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .estimator import RMSchedule
from .network import NetworkSpec, RayDirection, StationPolicy


class ConfigError(ValueError):
    """Malformed experiment file (schema, types, or cross-references)."""


@dataclass(frozen=True)
class ThresholdJob:
    ray: RayDirection
    schedule: RMSchedule
    alpha: float = 1.0


@dataclass(frozen=True)
class RegionJob:
    plane: tuple[int, int]
    ray_count: int
    extra_rays: tuple[RayDirection, ...]
    schedule: RMSchedule
    alpha: float = 1.0


@dataclass(frozen=True)
class MonotonicityJob:
    ray: RayDirection
    theta_grid: tuple[float, ...]
    t_grid: tuple[float, ...]
    replications: int
    alpha: float = 1.0
    noise_multiplier: float = 3.0


@dataclass(frozen=True)
class ExperimentConfig:
    spec_path: str
    network: NetworkSpec
    threshold: ThresholdJob | None
    region: RegionJob | None
    monotonicity: MonotonicityJob | None
    seed: int
    out: str | None
    fmt: str


def _need(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"[{where}] is missing required key '{key}'")
    return table[key]


def _numbers(value, where: str, key: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        raise ConfigError(f"[{where}] '{key}' must be an array of numbers")
    return tuple(float(x) for x in value)


def _class_index(value, d: int, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= d:
        raise ConfigError(f"[{where}] class index {value!r} outside 1..{d}")
    return value - 1


def _parse_policy(entry: dict, station_id: int, d: int) -> StationPolicy:
    where = f"station id={station_id}"
    kind = entry.get("policy", "fcfs")
    priority = entry.get("priority")
    if priority is not None:
        priority = tuple(_class_index(k, d, where) for k in priority)
    if kind == "fcfs":
        if priority is not None:
            raise ConfigError(f"[{where}] fcfs takes no priority list")
        return StationPolicy.fcfs()
    if kind == "sbp":
        if priority is None:
            raise ConfigError(f"[{where}] sbp requires a priority list")
        return StationPolicy.sbp(priority)
    if kind == "ps":
        discipline = entry.get("discipline", "equalitarian")
        if discipline == "preferential" and priority is None:
            raise ConfigError(f"[{where}] preferential ps requires a priority list")
        try:
            return StationPolicy.ps(discipline, priority)
        except ValueError as exc:
            raise ConfigError(f"[{where}] {exc}") from exc
    raise ConfigError(f"[{where}] unknown policy {kind!r}")


def _parse_network(doc: dict, base: Path) -> NetworkSpec:
    if "network" not in doc:
        raise ConfigError("config has no [network] table")
    net = doc["network"]
    if "file" in net:
        ref = base / net["file"]
        try:
            with open(ref, "rb") as fh:
                ref_doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{ref}: {exc}") from exc
        return _parse_network(ref_doc, ref.parent)

    S = _need(net, "stations", "network")
    d = _need(net, "classes", "network")
    if not isinstance(S, int) or not isinstance(d, int) or S < 1 or d < 1:
        raise ConfigError("[network] stations and classes must be positive integers")

    station_of_raw = _need(net, "station_of", "network")
    if len(station_of_raw) != d:
        raise ConfigError(f"[network] station_of must list {d} entries")
    station_of = []
    for k, i in enumerate(station_of_raw):
        if not isinstance(i, int) or not 1 <= i <= S:
            raise ConfigError(
                f"[network] station_of[{k + 1}] = {i!r} outside 1..{S}"
            )
        station_of.append(i - 1)

    arrival = _numbers(_need(net, "arrival_rates", "network"), "network", "arrival_rates")

    has_rates = "service_rates" in net
    has_means = "mean_service_times" in net
    if has_rates == has_means:
        raise ConfigError(
            "[network] give exactly one of service_rates / mean_service_times"
        )
    if has_rates:
        service = _numbers(net["service_rates"], "network", "service_rates")
    else:
        means = _numbers(net["mean_service_times"], "network", "mean_service_times")
        if any(m <= 0 for m in means):
            raise ConfigError("[network] mean_service_times must be positive")
        service = tuple(1.0 / m for m in means)

    routing_raw = _need(net, "routing", "network")
    if len(routing_raw) != d:
        raise ConfigError(f"[network] routing must have {d} rows")
    routing = tuple(_numbers(row, "network", "routing") for row in routing_raw)
    if any(len(row) != d for row in routing):
        raise ConfigError(f"[network] routing rows must have {d} entries")

    policies = [StationPolicy.fcfs()] * S
    for entry in doc.get("station", []):
        sid = _need(entry, "id", "station")
        if not isinstance(sid, int) or not 1 <= sid <= S:
            raise ConfigError(f"[station] id {sid!r} outside 1..{S}")
        policies[sid - 1] = _parse_policy(entry, sid, d)

    return NetworkSpec(
        station_count=S,
        class_count=d,
        station_of=tuple(station_of),
        arrival_rates=arrival,
        service_rates=service,
        routing=routing,
        station_policies=tuple(policies),
    )


# Schema problems (missing keys, wrong shapes/types) raise ConfigError and
# exit as parse failures; domain-invalid values (zero ray, omega out of
# range, ...) raise plain ValueError from the constructors and exit as
# validation failures.

def _parse_schedule(table: dict, where: str) -> RMSchedule:
    kwargs = {
        "epsilon": _need(table, "epsilon", where),
        "gain_c1": _need(table, "gain_c1", where),
        "iterations": _need(table, "iterations", where),
    }
    for key, field in (
        ("gain_omega", "gain_omega"),
        ("horizon_c2", "horizon_c2"),
        ("horizon_growth", "horizon_growth"),
        ("horizon_gamma", "horizon_gamma"),
        ("theta_init", "theta_init"),
        ("burn_in", "averaging_burn_in"),
    ):
        if key in table:
            kwargs[field] = table[key]
    return RMSchedule(**kwargs)


def _parse_ray(table: dict, d: int, where: str) -> RayDirection:
    direction = _numbers(_need(table, "ray", where), where, "ray")
    if len(direction) != d:
        raise ConfigError(f"[{where}] ray must have {d} components")
    return RayDirection(direction)


def load_config(path) -> ExperimentConfig:
    """Parse an experiment file; raises ConfigError / OSError, never exits."""
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    network = _parse_network(doc, path.parent)
    d = network.class_count

    threshold = None
    if "threshold" in doc:
        table = doc["threshold"]
        threshold = ThresholdJob(
            ray=_parse_ray(table, d, "threshold"),
            schedule=_parse_schedule(table, "threshold"),
            alpha=float(table.get("alpha", 1.0)),
        )

    region = None
    if "region" in doc:
        table = doc["region"]
        plane_raw = table.get("plane", [1, 2])
        if len(plane_raw) != 2:
            raise ConfigError("[region] plane must name two classes")
        plane = tuple(_class_index(c, d, "region") for c in plane_raw)
        ray_count = table.get("rays", 5)
        if not isinstance(ray_count, int) or ray_count < 0:
            raise ConfigError("[region] rays must be a nonnegative integer")
        extra = []
        for row in table.get("extra_rays", []):
            direction = _numbers(row, "region", "extra_rays")
            if len(direction) != d:
                raise ConfigError(f"[region] extra ray must have {d} components")
            extra.append(RayDirection(direction))
        if ray_count == 0 and not extra:
            raise ConfigError("[region] needs rays > 0 or explicit extra_rays")
        region = RegionJob(
            plane=plane,
            ray_count=ray_count,
            extra_rays=tuple(extra),
            schedule=_parse_schedule(table, "region"),
            alpha=float(table.get("alpha", 1.0)),
        )

    monotonicity = None
    if "monotonicity" in doc:
        table = doc["monotonicity"]
        reps = _need(table, "replications", "monotonicity")
        if not isinstance(reps, int) or reps < 1:
            raise ConfigError("[monotonicity] replications must be a positive integer")
        monotonicity = MonotonicityJob(
            ray=_parse_ray(table, d, "monotonicity"),
            theta_grid=_numbers(
                _need(table, "theta_grid", "monotonicity"), "monotonicity", "theta_grid"
            ),
            t_grid=_numbers(
                _need(table, "t_grid", "monotonicity"), "monotonicity", "t_grid"
            ),
            replications=reps,
            alpha=float(table.get("alpha", 1.0)),
            noise_multiplier=float(table.get("noise_multiplier", 3.0)),
        )

    run = doc.get("run", {})
    fmt = run.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("[run] format must be 'csv' or 'json'")
    seed = run.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("[run] seed must be a nonnegative integer")

    return ExperimentConfig(
        spec_path=str(path),
        network=network,
        threshold=threshold,
        region=region,
        monotonicity=monotonicity,
        seed=seed,
        out=run.get("out"),
        fmt=fmt,
    )
