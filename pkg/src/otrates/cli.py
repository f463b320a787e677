"""Batch command-line front end: run sweeps from JSON configs, emit CSV + JSON.

Exit codes: 0 all bounds held and all solves converged; 2 config invalid;
3 a solve failed to converge; 4 a theorem-level bound was violated (which
signals an implementation bug, not a modeling problem).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .gaussian import entropic_map_matrix
from .measures import GaussianSpec, GridParams, assumption_params, measure_from_json
from .metrics import caffarelli_bound, chewi_pooladian_bound
from .psd import loewner_leq
from .ratelab import (
    DegenerateData,
    expansion_check,
    fit_loglog_slope,
    gaussian_c0,
    run_gaussian_sweep,
    run_sinkhorn_sweep,
    verify_envelope,
    write_records_csv,
)

__all__ = ["ConfigError", "ExperimentConfig", "load_configs", "main", "run_config"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_BOUND_VIOLATION = 4

MODES = ("gaussian", "sinkhorn", "expansion")
BOUND_SLACK = 1e-12
LOEWNER_TOL = 1e-10


class ConfigError(ValueError):
    """Configuration failed validation; message names the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    source: GaussianSpec
    target: GaussianSpec
    radius: float
    eps_grid: tuple
    name: str = ""
    points_per_axis: int = 401
    trunc_sigmas: float = 6.0
    ball_grid_points: int | None = None
    tol: float = 1e-9
    max_iter: int = 100_000

    def quick(self) -> "ExperimentConfig":
        """Shrunken copy for CI-sized runs."""
        grid = self.eps_grid[::2] if len(self.eps_grid) > 5 else self.eps_grid
        ppa = min(self.points_per_axis, 101 if self.source.dim == 1 else 31)
        if ppa % 2 == 0:
            ppa += 1
        ball = self.ball_grid_points
        if ball is not None:
            ball = min(ball, 41 if self.source.dim == 1 else 21)
        return replace(
            self, eps_grid=tuple(grid), points_per_axis=ppa, ball_grid_points=ball
        )


def _require(data: dict, field: str):
    if field not in data:
        raise ConfigError(f"config field '{field}' is required")
    return data[field]


def _parse_measure(data: dict, field: str) -> GaussianSpec:
    raw = _require(data, field)
    if not isinstance(raw, dict):
        raise ConfigError(f"config field '{field}' must be a measure object")
    try:
        return measure_from_json(raw)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"config field '{field}': {exc}") from exc


def config_from_dict(data: dict, mode: str | None = None) -> ExperimentConfig:
    """Validate a config dictionary; raises ConfigError naming the bad field."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    file_mode = data.get("mode")
    if file_mode is not None and file_mode not in MODES:
        raise ConfigError(f"config field 'mode' must be one of {MODES}, got {file_mode!r}")
    if mode is not None and file_mode is not None and mode != file_mode:
        raise ConfigError(f"config field 'mode' is {file_mode!r} but the subcommand is {mode!r}")
    effective_mode = mode or file_mode
    if effective_mode is None:
        raise ConfigError("config field 'mode' is required")

    source = _parse_measure(data, "source")
    target = _parse_measure(data, "target")
    if source.dim != target.dim:
        raise ConfigError("config fields 'source'/'target' have mismatched dimensions")

    radius = _require(data, "radius")
    if not isinstance(radius, (int, float)) or radius <= 0:
        raise ConfigError("config field 'radius' must be a positive number")

    eps_grid = _require(data, "eps_grid")
    if not isinstance(eps_grid, list) or not eps_grid:
        raise ConfigError("config field 'eps_grid' must be a nonempty list")
    grid = []
    for value in eps_grid:
        if not isinstance(value, (int, float)) or value <= 0:
            raise ConfigError("config field 'eps_grid' entries must be positive numbers")
        grid.append(float(value))
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("config field 'eps_grid' must be strictly decreasing")

    ppa = data.get("points_per_axis", 401 if source.dim == 1 else 61)
    if not isinstance(ppa, int) or ppa < 3 or ppa % 2 == 0:
        raise ConfigError("config field 'points_per_axis' must be an odd integer >= 3")
    trunc = data.get("trunc_sigmas", 6.0)
    if not isinstance(trunc, (int, float)) or not 3.0 <= trunc <= 10.0:
        raise ConfigError("config field 'trunc_sigmas' must lie in [3, 10]")

    if effective_mode in ("sinkhorn", "expansion"):
        inradius = float(trunc) * float(
            np.sqrt(np.linalg.eigvalsh(source.covariance.entries)[0])
        )
        if radius > inradius / 3.0 + 1e-12:
            raise ConfigError(
                "config field 'radius' must be at most one third of the "
                f"truncation box inradius ({inradius / 3.0:.6g}) in {effective_mode} mode"
            )

    ball = data.get("ball_grid_points")
    if ball is not None and (not isinstance(ball, int) or ball < 1):
        raise ConfigError("config field 'ball_grid_points' must be a positive integer")
    tol = data.get("tol", 1e-9)
    if not isinstance(tol, (int, float)) or tol <= 0:
        raise ConfigError("config field 'tol' must be positive")
    max_iter = data.get("max_iter", 100_000)
    if not isinstance(max_iter, int) or max_iter < 1:
        raise ConfigError("config field 'max_iter' must be a positive integer")
    name = data.get("name", effective_mode)
    if not isinstance(name, str) or not name:
        raise ConfigError("config field 'name' must be a nonempty string")

    return ExperimentConfig(
        mode=effective_mode,
        source=source,
        target=target,
        radius=float(radius),
        eps_grid=tuple(grid),
        name=name,
        points_per_axis=ppa,
        trunc_sigmas=float(trunc),
        ball_grid_points=ball,
        tol=float(tol),
        max_iter=max_iter,
    )


def load_configs(path, mode: str | None = None) -> list[ExperimentConfig]:
    """Load one config object or an {"experiments": [...]} batch from JSON."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if isinstance(data, dict) and "experiments" in data:
        experiments = data["experiments"]
        if not isinstance(experiments, list) or not experiments:
            raise ConfigError("config field 'experiments' must be a nonempty list")
        configs = [config_from_dict(entry, mode) for entry in experiments]
    else:
        configs = [config_from_dict(data, mode)]
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError("config field 'name' must be unique across experiments")
    return configs


def _loewner_violations(config: ExperimentConfig) -> int:
    """Check the map-matrix Hessian bound chain at every eps of the grid."""
    params = assumption_params(config.source, config.target)
    caff = caffarelli_bound(params)
    eye = np.eye(config.source.dim)
    violations = 0
    for eps in config.eps_grid:
        te = entropic_map_matrix(config.source.covariance, config.target.covariance, eps)
        cp = chewi_pooladian_bound(params, eps)
        if not loewner_leq(te.matrix, cp * eye, LOEWNER_TOL):
            violations += 1
        if cp > caff + BOUND_SLACK:
            violations += 1
    return violations


def _compute(config: ExperimentConfig) -> tuple[list, dict, int]:
    dim = config.source.dim
    if config.mode == "gaussian":
        records = run_gaussian_sweep(
            config.source.covariance, config.target.covariance, config.radius, config.eps_grid
        )
    else:
        records = run_sinkhorn_sweep(
            config.source,
            config.target,
            GridParams(config.points_per_axis, config.trunc_sigmas),
            config.radius,
            config.eps_grid,
            tol=config.tol,
            max_iter=config.max_iter,
            ball_grid_points=config.ball_grid_points,
        )

    violations = _loewner_violations(config)
    if config.mode == "gaussian":
        for r in records:
            if r.prop11_bound is not None and r.sup_gap_grad > r.prop11_bound + BOUND_SLACK:
                violations += 1
    nonconverged = sum(1 for r in records if not r.converged)

    def safe_slope(selector):
        try:
            return fit_loglog_slope(records, selector).slope
        except DegenerateData:
            return None

    summary = {
        "mode": config.mode,
        "name": config.name,
        "records": len(records),
        "violations": violations,
        "nonconverged": nonconverged,
        "slope_grad": safe_slope("sup_gap_grad"),
        "slope_l2": safe_slope("l2_gap_grad_sq"),
        "envelope_1_over_d_plus_4": verify_envelope(
            records, "sup_gap_grad", 1.0 / (dim + 4)
        )[1],
    }
    if config.mode in ("sinkhorn", "expansion"):
        inradius = config.trunc_sigmas * float(
            np.sqrt(np.linalg.eigvalsh(config.source.covariance.entries)[0])
        )
        summary["k_margin"] = config.radius / inradius
    if config.mode == "expansion":
        params_src = assumption_params(config.source, config.target)
        params_tgt = assumption_params(config.target, config.source)
        defects = expansion_check(
            records,
            h_mu=params_src.differential_entropy,
            h_nu=params_tgt.differential_entropy,
            c0=gaussian_c0(config.source.covariance, config.target.covariance),
            dim=dim,
        )
        summary["defects"] = [[e, d] for e, d in defects]

    if violations > 0:
        status = EXIT_BOUND_VIOLATION
    elif nonconverged > 0:
        status = EXIT_NONCONVERGED
    else:
        status = EXIT_OK
    return records, summary, status


def run_config(config: ExperimentConfig, out_dir) -> int:
    """Run one experiment and write <name>.csv and <name>_summary.json."""
    records, summary, status = _compute(config)
    _write_outputs(config, records, summary, out_dir)
    return status


def _write_outputs(config, records, summary, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out / f"{config.name}.csv")
    with open(out / f"{config.name}_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _thread_cap(n_jobs: int) -> int:
    env = os.environ.get("OTRATES_THREADS")
    if env is not None:
        try:
            cap = int(env)
        except ValueError:
            cap = 1
        return max(1, min(cap, n_jobs))
    return max(1, min(os.cpu_count() or 1, n_jobs))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="otrates",
        description="Entropic optimal transport convergence-rate sweeps",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run a {mode}-mode sweep")
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--quick", action="store_true", help="shrink grids for CI")
    args = parser.parse_args(argv)

    try:
        configs = load_configs(args.config, mode=args.command)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.quick:
        configs = [c.quick() for c in configs]

    # Workers only compute; the coordinating thread does all file writes.
    if len(configs) > 1:
        with ThreadPoolExecutor(max_workers=_thread_cap(len(configs))) as pool:
            results = list(pool.map(_compute, configs))
    else:
        results = [_compute(configs[0])]

    status = EXIT_OK
    for config, (records, summary, one_status) in zip(configs, results):
        _write_outputs(config, records, summary, args.out)
        print(
            f"{config.name}: {len(records)} records, "
            f"{summary['violations']} violations, "
            f"{summary['nonconverged']} nonconverged"
        )
        status = max(status, one_status)
    return status


if __name__ == "__main__":
    sys.exit(main())
