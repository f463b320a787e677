"""Measure specifications, grid discretization, and assumption constants.

Zero-mean Gaussian measures are discretized onto tensor grids in their
principal axes with density-proportional weights.  The curvature bounds,
Poincare constant, and differential entropy that parameterize the Lipschitz
and rate bounds are computed analytically from the covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .psd import DimensionMismatch, SymMatrix, as_sym_matrix, op_norm

__all__ = [
    "AssumptionParams",
    "DiscreteMeasure",
    "GaussianSpec",
    "GridParams",
    "GridTooLarge",
    "NonuniformGrid",
    "assumption_params",
    "differential_entropy_discrete",
    "discretize_gaussian",
    "measure_from_json",
    "measure_to_json",
]

MAX_GRID_POINTS = 10**7


class GridTooLarge(ValueError):
    """Requested tensor grid exceeds the point budget."""


class NonuniformGrid(ValueError):
    """Operation requires a uniform grid with a known cell volume."""


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Zero-mean Gaussian measure with strictly positive-definite covariance."""

    covariance: SymMatrix

    def __post_init__(self):
        cov = as_sym_matrix(self.covariance)
        vals = np.linalg.eigvalsh(cov.entries)
        if vals[0] <= 0:
            raise ValueError(f"covariance must be strictly PD (min eigenvalue {vals[0]:.6e})")
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.covariance.dim

    @classmethod
    def isotropic(cls, dim: int, variance: float = 1.0) -> "GaussianSpec":
        return cls(SymMatrix(variance * np.eye(dim)))


@dataclass(frozen=True)
class AssumptionParams:
    """Analytic constants of a Gaussian source/target pair.

    alpha bounds the source log-density curvature from above, beta bounds the
    target log-density curvature from below, poincare_constant is the sharp
    Gaussian Poincare constant of the source, and differential_entropy is the
    source entropy in nats.
    """

    alpha: float
    beta: float
    poincare_constant: float
    differential_entropy: float


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud; weights sum to one, points pairwise distinct.

    ``cell_volume`` and ``grid_axes`` are populated by the grid constructors
    (uniform tensor grids); hand-built measures leave them unset.
    """

    points: np.ndarray
    weights: np.ndarray
    cell_volume: float | None = None
    grid_axes: tuple | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError(f"points must be a nonempty (n, dim) array, got shape {pts.shape}")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise DimensionMismatch(
                f"{pts.shape[0]} points but {w.shape[0]} weights"
            )
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise ValueError("points and weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("points must be pairwise distinct")
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class GridParams:
    """Discretization parameters for Gaussian tensor grids."""

    points_per_axis: int
    trunc_sigmas: float = 6.0


def discretize_gaussian(
    spec: GaussianSpec, points_per_axis: int, trunc_sigmas: float = 6.0
) -> DiscreteMeasure:
    """Tensor-grid quadrature of a zero-mean Gaussian.

    The grid spans ``+/- trunc_sigmas * sqrt(axis variance)`` along each
    principal axis with an odd number of nodes per axis (so the origin is a
    node); weights are proportional to the density at the nodes and
    renormalized to sum to one.
    """
    if points_per_axis < 3 or points_per_axis % 2 == 0:
        raise ValueError("points_per_axis must be odd and >= 3")
    if not 3.0 <= trunc_sigmas <= 10.0:
        raise ValueError("trunc_sigmas must lie in [3, 10]")
    d = spec.dim
    if points_per_axis**d > MAX_GRID_POINTS:
        raise GridTooLarge(
            f"{points_per_axis}^{d} grid points exceed the {MAX_GRID_POINTS:g} budget"
        )

    cov = spec.covariance.entries
    off_diag = cov - np.diag(np.diag(cov))
    if np.all(off_diag == 0.0):
        # Diagonal covariance: keep the grid exactly axis-aligned.
        variances = np.diag(cov).copy()
        rotation = np.eye(d)
    else:
        variances, rotation = np.linalg.eigh(cov)

    half_widths = trunc_sigmas * np.sqrt(variances)
    axes = tuple(
        np.linspace(-h, h, points_per_axis) for h in half_widths
    )
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.reshape(-1) for m in mesh], axis=1)

    log_density = -0.5 * (coords**2 / variances[None, :]).sum(axis=1)
    log_density -= log_density.max()
    w = np.exp(log_density)
    w /= w.sum()

    points = coords @ rotation.T
    steps = 2.0 * half_widths / (points_per_axis - 1)
    cell_volume = float(np.prod(steps))
    axis_aligned = np.array_equal(rotation, np.eye(d))
    return DiscreteMeasure(
        points=points,
        weights=w,
        cell_volume=cell_volume,
        grid_axes=axes if axis_aligned else None,
    )


def assumption_params(source: GaussianSpec, target: GaussianSpec) -> AssumptionParams:
    """Curvature bounds, Poincare constant, and entropy of a Gaussian pair.

    For source covariance A and target covariance B:
    alpha = |A^-1|_op, beta = 1/|B|_op, C_P = |A|_op,
    H = 0.5 * log((2*pi*e)^d * det A).
    """
    a = source.covariance.entries
    b = target.covariance.entries
    alpha = op_norm(np.linalg.inv(a))
    beta = 1.0 / op_norm(b)
    poincare = op_norm(a)
    sign, logdet = np.linalg.slogdet(a)
    if sign <= 0:
        raise ValueError("source covariance must be strictly PD")
    entropy = 0.5 * (source.dim * math.log(2.0 * math.pi * math.e) + logdet)
    return AssumptionParams(
        alpha=float(alpha),
        beta=float(beta),
        poincare_constant=float(poincare),
        differential_entropy=float(entropy),
    )


def differential_entropy_discrete(m: DiscreteMeasure, cell_volume: float | None = None) -> float:
    """Riemann estimate -sum w_i log(w_i / cell_volume) of differential entropy.

    Requires a uniform grid; the cell volume is taken from the argument or
    from the measure's own grid metadata.
    """
    vol = cell_volume if cell_volume is not None else m.cell_volume
    if vol is None or not np.isfinite(vol) or vol <= 0:
        raise NonuniformGrid("cell volume unknown; measure is not a uniform grid")
    w = m.weights
    mask = w > 0
    return float(-(w[mask] * np.log(w[mask] / vol)).sum())


def measure_to_json(spec: GaussianSpec) -> dict:
    """Serialize a measure spec to its JSON object form."""
    return {
        "type": "gaussian",
        "dim": spec.dim,
        "covariance": spec.covariance.entries.tolist(),
    }


def measure_from_json(data: dict) -> GaussianSpec:
    """Deserialize a measure spec; the "type" tag reserves room for extensions."""
    kind = data.get("type")
    if kind != "gaussian":
        raise ValueError(f"unsupported measure type {kind!r} (expected 'gaussian')")
    cov = np.asarray(data["covariance"], dtype=float)
    spec = GaussianSpec(SymMatrix(cov))
    if "dim" in data and int(data["dim"]) != spec.dim:
        raise ValueError(
            f"declared dim {data['dim']} does not match covariance shape {cov.shape}"
        )
    return spec
