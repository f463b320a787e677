"""Eps-sweep orchestration, log-log rate fitting, and envelope verification.

Two sweep paths produce the same record schema: a closed-form path for
Gaussian pairs (no solver, exact gaps and bounds) and a solver path that
discretizes the measures, runs warm-started Sinkhorn down the eps grid, and
measures the gaps of the extended potentials against the Gaussian closed
forms.  Rate fits are ordinary least squares in log-log coordinates, and
envelope constants are the empirical stand-ins for the existence-level
constants in the rate bounds.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .gaussian import brenier_map_matrix, entropic_map_matrix, prop11_bound
from .measures import GaussianSpec, GridParams, discretize_gaussian
from .metrics import CompactBallSpec, l2_mu_gap, sup_gap_on_grid
from .psd import as_sym_matrix, op_norm, sym_sqrt
from .sinkhorn import (
    MaxIterExceeded,
    entropic_map_eval,
    normalize_potentials,
    phi_eps_eval,
    primal_value,
    sinkhorn_solve,
)

__all__ = [
    "CSV_HEADER",
    "DegenerateData",
    "RateFit",
    "SweepRecord",
    "expansion_check",
    "fit_loglog_slope",
    "gaussian_c0",
    "run_gaussian_sweep",
    "run_sinkhorn_sweep",
    "verify_envelope",
    "write_records_csv",
]

CSV_HEADER = (
    "eps,sup_gap_grad,sup_gap_pot,prop11_bound,l2_gap_grad_sq,l2_gap_pot_sq,"
    "cost_eps,rel_entropy,residual,iterations"
)

# Uniform-norm evaluations must stay well inside the truncation box; this is
# the maximum allowed ratio of ball radius to box inradius.
K_MARGIN = 1.0 / 3.0


class DegenerateData(ValueError):
    """Not enough positive data points for a rate fit."""


@dataclass(frozen=True)
class SweepRecord:
    """One eps worth of gap, bound, and solver diagnostics.

    ``prop11_bound`` is filled on closed-form Gaussian sweeps only;
    ``converged`` is False when the solver hit its iteration cap and the row
    carries partial results (the residual column shows by how much).
    """

    eps: float
    sup_gap_grad: float
    sup_gap_pot: float
    prop11_bound: float | None
    l2_gap_grad_sq: float
    l2_gap_pot_sq: float
    cost_eps: float
    rel_entropy: float
    residual: float
    iterations: int
    converged: bool = True


@dataclass(frozen=True)
class RateFit:
    """Least-squares power law fit of gap versus eps in log-log coordinates."""

    slope: float
    intercept: float
    r_squared: float
    envelope_constant: float


def _validate_eps_grid(eps_grid) -> np.ndarray:
    grid = np.asarray(list(eps_grid), dtype=float)
    if grid.size == 0:
        raise ValueError("eps_grid must be nonempty")
    if np.any(grid <= 0) or not np.all(np.isfinite(grid)):
        raise ValueError("eps_grid entries must be positive and finite")
    if np.any(np.diff(grid) >= 0):
        raise ValueError("eps_grid must be strictly decreasing")
    return grid


def gaussian_c0(a, b) -> float:
    """Exact unregularized transport cost between N(0, A) and N(0, B).

    0.5 * (tr A + tr B - 2 tr((A^{1/2} B A^{1/2})^{1/2})), consistent with
    the half-squared-distance cost convention.
    """
    a = as_sym_matrix(a)
    b = as_sym_matrix(b)
    a_half = sym_sqrt(a).entries
    middle = sym_sqrt(a_half @ b.entries @ a_half).entries
    return float(0.5 * (np.trace(a.entries) + np.trace(b.entries) - 2.0 * np.trace(middle)))


def _gaussian_entropic_primal(a: np.ndarray, b: np.ndarray, t_eps: np.ndarray) -> tuple[float, float]:
    # The plan's cross-covariance is A T_eps, so the cost and the relative
    # entropy against the product measure follow from the map matrix alone.
    cost = 0.5 * (np.trace(a) + np.trace(b)) - float(np.trace(a @ t_eps))
    cond_cov = b - t_eps @ a @ t_eps
    sign, logdet_cond = np.linalg.slogdet(cond_cov)
    if sign <= 0:
        raise ValueError("conditional covariance lost positive-definiteness")
    _, logdet_b = np.linalg.slogdet(b)
    rel = 0.5 * (logdet_b - logdet_cond)
    return float(cost), float(rel)


def _quadratic_sup_on_ball(delta: np.ndarray, a: np.ndarray, radius: float) -> float:
    # sup over the closed ball of |0.5 x' D x - 0.5 tr(D A)|: the quadratic
    # form ranges over an interval determined by the extreme eigenvalues.
    vals = np.linalg.eigvalsh(delta)
    lo = 0.5 * radius**2 * min(vals[0], 0.0)
    hi = 0.5 * radius**2 * max(vals[-1], 0.0)
    center = 0.5 * float(np.trace(delta @ a))
    return max(abs(lo - center), abs(hi - center))


def run_gaussian_sweep(a, b, radius: float, eps_grid) -> list[SweepRecord]:
    """Closed-form sweep over a decreasing eps grid for a Gaussian pair.

    Every field is exact up to matrix-function accuracy: sup gaps from the
    operator norm of the map difference, potential gaps from the quadratic
    potentials under the zero-mean normalization, L2 gaps from second
    moments, and the primal cost/entropy from the plan implied by the map.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    grid = _validate_eps_grid(eps_grid)
    a = as_sym_matrix(a)
    b = as_sym_matrix(b)
    t0 = brenier_map_matrix(a, b).matrix.entries
    records = []
    for eps in grid:
        te = entropic_map_matrix(a, b, eps).matrix.entries
        delta = te - t0
        gap_grad = float(radius * op_norm(delta))
        bound = prop11_bound(a, b, eps, radius)
        gap_pot = _quadratic_sup_on_ball(delta, a.entries, radius)
        l2_grad_sq = float(np.trace(delta @ a.entries @ delta))
        da = delta @ a.entries
        l2_pot_sq = 0.5 * float(np.trace(da @ da))
        cost, rel = _gaussian_entropic_primal(a.entries, b.entries, te)
        records.append(
            SweepRecord(
                eps=float(eps),
                sup_gap_grad=gap_grad,
                sup_gap_pot=gap_pot,
                prop11_bound=bound,
                l2_gap_grad_sq=l2_grad_sq,
                l2_gap_pot_sq=l2_pot_sq,
                cost_eps=cost,
                rel_entropy=rel,
                residual=0.0,
                iterations=0,
            )
        )
    return records


def run_sinkhorn_sweep(
    mu_spec: GaussianSpec,
    nu_spec: GaussianSpec,
    grid_params: GridParams,
    radius: float,
    eps_grid,
    tol: float = 1e-9,
    max_iter: int = 100_000,
    ball_grid_points: int | None = None,
) -> list[SweepRecord]:
    """Discretize, solve down the eps grid with warm starts, measure gaps.

    Gaps compare the solver's extended potential/map against the Gaussian
    closed forms (the exact reference for this family), both on a ball grid
    (sup norms) and against the discretized source measure (L2 norms).
    Records for non-converged eps values are flagged, carry the partial
    potentials' diagnostics, and still seed the next warm start.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    grid = _validate_eps_grid(eps_grid)
    dim = mu_spec.dim
    if nu_spec.dim != dim:
        raise ValueError("source and target dimensions differ")

    box_inradius = grid_params.trunc_sigmas * float(
        np.sqrt(np.linalg.eigvalsh(mu_spec.covariance.entries)[0])
    )
    if radius > K_MARGIN * box_inradius + 1e-12:
        raise ValueError(
            f"ball radius {radius} exceeds {K_MARGIN:.3g} of the truncation box "
            f"inradius {box_inradius:.6g}; refusing to measure sup norms near the boundary"
        )

    mu = discretize_gaussian(mu_spec, grid_params.points_per_axis, grid_params.trunc_sigmas)
    nu = discretize_gaussian(nu_spec, grid_params.points_per_axis, grid_params.trunc_sigmas)

    a = mu_spec.covariance
    b = nu_spec.covariance
    t0 = brenier_map_matrix(a, b)
    phi0_shift = 0.5 * float(np.trace(t0.matrix.entries @ a.entries))

    def phi0_field(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (x * t0(x)).sum(axis=-1) - phi0_shift

    n_ball = ball_grid_points if ball_grid_points is not None else (101 if dim == 1 else 41)
    ball = CompactBallSpec(radius=radius, grid_points_per_axis=n_ball)

    records = []
    g_warm = None
    for eps in grid:
        converged = True
        try:
            pots = sinkhorn_solve(
                mu, nu, float(eps), tol=tol, max_iter=max_iter, initial_g=g_warm
            )
        except MaxIterExceeded as exc:
            pots = exc.potentials
            converged = False
        g_warm = pots.g_values
        pots = normalize_potentials(pots, mu)

        def map_field(x, pots=pots):
            return entropic_map_eval(pots, nu, x)

        def pot_field(x, pots=pots):
            return phi_eps_eval(pots, nu, x)

        gap_grad = sup_gap_on_grid(map_field, t0, ball, dim)
        gap_pot = sup_gap_on_grid(pot_field, phi0_field, ball, dim)
        l2_grad = l2_mu_gap(map_field, t0, mu)
        l2_pot = l2_mu_gap(pot_field, phi0_field, mu)
        cost, rel = primal_value(pots, mu, nu)
        records.append(
            SweepRecord(
                eps=float(eps),
                sup_gap_grad=gap_grad,
                sup_gap_pot=gap_pot,
                prop11_bound=None,
                l2_gap_grad_sq=l2_grad**2,
                l2_gap_pot_sq=l2_pot**2,
                cost_eps=cost,
                rel_entropy=rel,
                residual=pots.residual,
                iterations=pots.iterations,
                converged=converged,
            )
        )
    return records


def _select(records, selector) -> np.ndarray:
    if callable(selector):
        return np.asarray([float(selector(r)) for r in records])
    return np.asarray([float(getattr(r, selector)) for r in records])


def fit_loglog_slope(records, selector, envelope_exponent: float | None = None) -> RateFit:
    """OLS fit of log(value) on log(eps) over records with positive values.

    The envelope constant is max(value / eps^p) with p the supplied exponent,
    or the fitted slope when none is given.
    """
    eps = np.asarray([r.eps for r in records], dtype=float)
    vals = _select(records, selector)
    mask = vals > 0
    if mask.sum() < 3:
        raise DegenerateData(
            f"need at least 3 records with positive values, got {int(mask.sum())}"
        )
    x = np.log(eps[mask])
    y = np.log(vals[mask])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    p = envelope_exponent if envelope_exponent is not None else float(slope)
    envelope = float(np.max(vals[mask] / eps[mask] ** p))
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(min(r_squared, 1.0)),
        envelope_constant=envelope,
    )


def verify_envelope(
    records, selector, exponent: float, with_linear_term: bool = False
) -> tuple[bool, float]:
    """Smallest C with value <= C * eps^p (or C * (eps^p + eps)) across records."""
    if exponent <= 0:
        raise ValueError("exponent must be positive")
    if len(records) == 0:
        raise ValueError("records must be nonempty")
    eps = np.asarray([r.eps for r in records], dtype=float)
    vals = _select(records, selector)
    denom = eps**exponent + eps if with_linear_term else eps**exponent
    constant = float(np.max(vals / denom))
    return bool(np.isfinite(constant)), constant


def expansion_check(records, h_mu: float, h_nu: float, c0: float, dim: int) -> list[tuple[float, float]]:
    """Per-eps defect of the first-order expansion of the regularized cost.

    Uses C_eps = cost + eps * rel_entropy from the records and the expansion

        C_eps = C_0 - (d/2) eps log(2 pi eps) + (eps/2)(H(mu) + H(nu)) + o(eps),

    returning (eps, defect) with defect = [C_eps - C_0 + (d/2) eps log(2 pi eps)
    - (eps/2)(H(mu) + H(nu))] / eps, which tends to 0 as eps vanishes.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    out = []
    for r in records:
        c_eps = r.cost_eps + r.eps * r.rel_entropy
        defect = (
            c_eps
            - c0
            + 0.5 * dim * r.eps * np.log(2.0 * np.pi * r.eps)
            - 0.5 * r.eps * (h_mu + h_nu)
        ) / r.eps
        out.append((float(r.eps), float(defect)))
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def write_records_csv(records, path_or_file) -> None:
    """Emit records under the fixed CSV schema; deterministic formatting."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    _fmt(r.eps),
                    _fmt(r.sup_gap_grad),
                    _fmt(r.sup_gap_pot),
                    "" if r.prop11_bound is None else _fmt(r.prop11_bound),
                    _fmt(r.l2_gap_grad_sq),
                    _fmt(r.l2_gap_pot_sq),
                    _fmt(r.cost_eps),
                    _fmt(r.rel_entropy),
                    _fmt(r.residual),
                    str(int(r.iterations)),
                ]
            )
        )
    text = "\n".join(lines) + "\n"
    if isinstance(path_or_file, io.TextIOBase):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            fh.write(text)
