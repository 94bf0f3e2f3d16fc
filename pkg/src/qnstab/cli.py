"""Command-line front end.

Four subcommands: ``validate`` checks a network file, ``threshold`` runs
one ray estimate, ``region`` sweeps rays and interpolates the boundary,
``monotonicity`` estimates the functional surface and audits it.  All of
them read one TOML config (--config) and honor --seed for bit-level
reproducibility.

Exit codes: 0 success, 1 domain or validation failure, 2 I/O or parse
failure, 3 simulation budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import audit, region
from .config import ConfigError, load_config
from .engine import EventBudgetError
from .estimator import estimate_threshold
from .network import DegenerateRayError, ValidationError, validate

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2
EXIT_BUDGET = 3


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _fmt(x) -> str:
    return repr(float(x))


def _csv(rows) -> str:
    return "\n".join(",".join(str(c) for c in row) for row in rows) + "\n"


def _trace_path(out: str | None) -> str:
    return "trace.csv" if out is None else out + ".trace.csv"


def cmd_validate(cfg, args) -> int:
    report = validate(cfg.network)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_DOMAIN


def cmd_threshold(cfg, args) -> int:
    if cfg.threshold is None:
        raise ConfigError("config has no [threshold] table")
    job = cfg.threshold
    iterate_log: list | None = [] if args.trace else None
    est = estimate_threshold(
        cfg.network,
        job.ray,
        job.schedule,
        args.seed,
        alpha=job.alpha,
        iterate_log=iterate_log,
    )
    if est.clamp_warning:
        print(f"warning: {est.clamp_warning}", file=sys.stderr)

    if args.format == "json":
        doc = {
            "theta_hat": est.theta_hat,
            "final_iterate": est.final_iterate,
            "theta_bar": est.theta_bar,
            "clamp_events": est.clamp_events,
            "iterations": job.schedule.iterations,
            "epsilon": job.schedule.epsilon,
            "clamp_warning": est.clamp_warning,
        }
        _write_text(args.out, json.dumps(doc, indent=2) + "\n")
    else:
        rows = [
            ("theta_hat", "final_iterate", "theta_bar", "clamp_events",
             "iterations", "epsilon"),
            (_fmt(est.theta_hat), _fmt(est.final_iterate), _fmt(est.theta_bar),
             est.clamp_events, job.schedule.iterations, _fmt(job.schedule.epsilon)),
        ]
        _write_text(args.out, _csv(rows))

    if iterate_log is not None:
        rows = [("n", "theta_n", "z_n", "b_n", "t_n")]
        rows += [
            (n, _fmt(th), _fmt(z), _fmt(b), _fmt(t)) for n, th, z, b, t in iterate_log
        ]
        _write_text(_trace_path(args.out), _csv(rows))
    return EXIT_OK


def cmd_region(cfg, args) -> int:
    if cfg.region is None:
        raise ConfigError("config has no [region] table")
    job = cfg.region
    d = cfg.network.class_count
    rays = []
    if job.ray_count:
        rays += region.generate_rays(d, job.plane, job.ray_count)
    rays += list(job.extra_rays)

    result = region.sweep(
        cfg.network, rays, job.schedule, args.seed, alpha=job.alpha, jobs=args.jobs
    )
    a, b = job.plane
    polyline = None
    polyline_error = None
    try:
        polyline = region.interpolate_boundary(result).tolist()
    except ValueError as exc:
        polyline_error = str(exc)

    records = []
    for j, ray in enumerate(result.rays):
        est = result.thresholds[j]
        point = result.boundary_points[j]
        angle = math.degrees(math.atan2(ray.direction[b], ray.direction[a]))
        records.append((j, angle, ray, est, point, result.errors[j]))

    if args.format == "json":
        doc = {
            "plane": [a, b],
            "rays": [list(r.direction) for r in result.rays],
            "angles_degrees": [rec[1] for rec in records],
            "theta_bar": [e.theta_bar if e else None for e in result.thresholds],
            "theta_hat": [e.theta_hat if e else None for e in result.thresholds],
            "boundary_points": [list(p) if p else None for p in result.boundary_points],
            "errors": list(result.errors),
            "polyline": polyline,
            "polyline_error": polyline_error,
        }
        _write_text(args.out, json.dumps(doc, indent=2) + "\n")
    else:
        header = (
            ["ray_index", "angle_degrees"]
            + [f"v_{k + 1}" for k in range(d)]
            + ["theta_bar", "theta_hat"]
            + [f"boundary_{k + 1}" for k in range(d)]
            + ["error"]
        )
        rows = [tuple(header)]
        for j, angle, ray, est, point, err in records:
            cells = [j, _fmt(angle)]
            cells += [_fmt(c) for c in ray.direction]
            if est is not None:
                cells += [_fmt(est.theta_bar), _fmt(est.theta_hat)]
                cells += [_fmt(c) for c in point]
            else:
                cells += [""] * (2 + d)
            cells.append("" if err is None else err.replace(",", ";"))
            rows.append(tuple(cells))
        _write_text(args.out, _csv(rows))
        if args.out is not None:
            doc = {"polyline": polyline, "polyline_error": polyline_error}
            _write_text(args.out + ".polyline.json", json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_monotonicity(cfg, args) -> int:
    if cfg.monotonicity is None:
        raise ConfigError("config has no [monotonicity] table")
    job = cfg.monotonicity
    surface = audit.estimate_surface(
        cfg.network,
        job.ray,
        job.theta_grid,
        job.t_grid,
        job.replications,
        args.seed,
        alpha=job.alpha,
        jobs=args.jobs,
    )
    verdict = audit.check_monotone(surface, job.noise_multiplier)
    verdict_doc = {
        "passed": verdict.passed,
        "noise_multiplier": verdict.noise_multiplier,
        "flags": [
            {
                "axis": f.axis,
                "theta_index": f.theta_index,
                "t_index": f.t_index,
                "increase": f.increase,
                "allowance": f.allowance,
            }
            for f in verdict.flags
        ],
        "limit_column_strictly_decreasing": verdict.limit_column_strictly_decreasing,
    }

    if args.format == "json":
        doc = {
            "theta_grid": list(surface.theta_grid),
            "t_grid": list(surface.t_grid),
            "estimates": surface.estimates.tolist(),
            "std_errors": surface.std_errors.tolist(),
            "replications": surface.replications,
            "verdict": verdict_doc,
        }
        _write_text(args.out, json.dumps(doc, indent=2) + "\n")
    else:
        rows = [("theta", "t", "phi_hat", "std_err", "replications")]
        for i, theta in enumerate(surface.theta_grid):
            for j, t in enumerate(surface.t_grid):
                rows.append(
                    (_fmt(theta), _fmt(t), _fmt(surface.estimates[i, j]),
                     _fmt(surface.std_errors[i, j]), surface.replications)
                )
        _write_text(args.out, _csv(rows))
        if args.out is not None:
            _write_text(args.out + ".verdict.json", json.dumps(verdict_doc, indent=2) + "\n")
        else:
            sys.stdout.write(json.dumps(verdict_doc) + "\n")
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "threshold": cmd_threshold,
    "region": cmd_region,
    "monotonicity": cmd_monotonicity,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnstab",
        description="Stability-region estimation for Markovian multiclass queueing networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("validate", "check a network description and report problems"),
        ("threshold", "estimate the critical arrival multiplier along a ray"),
        ("region", "sweep rays and interpolate the stability boundary"),
        ("monotonicity", "estimate the functional surface and audit monotone decay"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment TOML file")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker threads for independent work items")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--trace", action="store_true",
                       help="also emit per-iterate trace CSV (threshold)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is None:
            args.seed = cfg.seed
        if args.out is None:
            args.out = cfg.out
        if args.format is None:
            args.format = cfg.fmt
        if args.jobs is None:
            args.jobs = os.cpu_count() or 1
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EventBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValidationError, DegenerateRayError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
