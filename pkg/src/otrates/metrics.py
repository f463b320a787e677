"""Gap functionals: uniform norms on compact balls and L2(mu) norms.

Uniform norms are evaluated on a box grid masked to the closed ball.  The
grid maximum is a certified lower bound of the true sup; when a Lipschitz
constant for the gap field is available (the Hessian bounds below provide
one), :func:`sup_gap_bracket` turns it into a two-sided bracket.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import AssumptionParams, DiscreteMeasure

__all__ = [
    "CompactBallSpec",
    "EmptyGrid",
    "caffarelli_bound",
    "chewi_pooladian_bound",
    "l2_mu_gap",
    "sup_gap_bracket",
    "sup_gap_on_grid",
]


class EmptyGrid(ValueError):
    """Ball mask retained no grid points."""


@dataclass(frozen=True)
class CompactBallSpec:
    """Closed ball of given radius, sampled by a masked box grid."""

    radius: float
    grid_points_per_axis: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.grid_points_per_axis < 1:
            raise ValueError("grid_points_per_axis must be positive")

    def grid(self, dim: int) -> np.ndarray:
        """Grid points of the ambient box ``[-R, R]^dim`` inside the ball."""
        axis = np.linspace(-self.radius, self.radius, self.grid_points_per_axis)
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
        # Tiny relative slack so axis endpoints survive rounding.
        mask = (pts**2).sum(axis=1) <= self.radius**2 * (1.0 + 1e-12)
        pts = pts[mask]
        if pts.shape[0] == 0:
            raise EmptyGrid(
                f"no grid point of the {self.grid_points_per_axis}^{dim} box "
                f"falls inside the ball of radius {self.radius}"
            )
        return pts

    def spacing(self) -> float:
        if self.grid_points_per_axis == 1:
            return 2.0 * self.radius
        return 2.0 * self.radius / (self.grid_points_per_axis - 1)


def _eval_field(field, points: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(field(points), dtype=float)
        if vals.shape[0] != points.shape[0] or vals.ndim > 2:
            raise ValueError
    except Exception:
        vals = np.asarray([field(p) for p in points], dtype=float)
    return vals


def _gap_norms(field_a, field_b, points: np.ndarray) -> np.ndarray:
    diff = _eval_field(field_a, points) - _eval_field(field_b, points)
    if diff.ndim == 1:
        return np.abs(diff)
    return np.linalg.norm(diff, axis=1)


def sup_gap_on_grid(field_a, field_b, k: CompactBallSpec, dim: int) -> float:
    """Max Euclidean gap between two fields over the masked ball grid.

    A lower bound of the true sup, converging as the grid refines.  Fields
    may be scalar- or vector-valued; batch evaluation on an (n, dim) array is
    used when the field supports it.
    """
    return float(_gap_norms(field_a, field_b, k.grid(dim)).max())


def sup_gap_bracket(
    field_a, field_b, k: CompactBallSpec, dim: int, lipschitz_const: float
) -> tuple[float, float]:
    """Two-sided bracket [grid max, grid max + L * covering radius] for the sup.

    ``lipschitz_const`` must bound the Lipschitz constant of the gap field;
    for transport-map gaps the sum of the two Hessian bounds qualifies.
    """
    if lipschitz_const < 0:
        raise ValueError("lipschitz_const must be nonnegative")
    lo = sup_gap_on_grid(field_a, field_b, k, dim)
    covering_radius = 0.5 * k.spacing() * np.sqrt(dim)
    return lo, float(lo + lipschitz_const * covering_radius)


def l2_mu_gap(field_a, field_b, mu: DiscreteMeasure) -> float:
    """Weighted L2 norm sqrt(sum_i w_i |a(x_i) - b(x_i)|^2) over the support."""
    gaps = _gap_norms(field_a, field_b, mu.points)
    return float(np.sqrt(mu.weights @ (gaps**2)))


def caffarelli_bound(params: AssumptionParams) -> float:
    """Global Lipschitz bound sqrt(alpha/beta) for the exact transport map."""
    if params.alpha <= 0 or params.beta <= 0:
        raise ValueError("alpha and beta must be positive")
    return float(np.sqrt(params.alpha / params.beta))


def chewi_pooladian_bound(params: AssumptionParams, eps: float) -> float:
    """Lipschitz bound 0.5 * (sqrt(4a/b + eps^2 a^2) - eps*a) for the entropic map.

    Evaluated in the cancellation-free form (2a/b) / (sqrt(4a/b + eps^2 a^2)
    + eps*a); equals :func:`caffarelli_bound` at eps = 0, decreases in eps,
    and tends to 0 as eps grows.
    """
    if params.alpha <= 0 or params.beta <= 0:
        raise ValueError("alpha and beta must be positive")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    ratio = params.alpha / params.beta
    root = np.sqrt(4.0 * ratio + (eps * params.alpha) ** 2)
    return float(2.0 * ratio / (root + eps * params.alpha))
