"""Log-domain Sinkhorn solver and everywhere-defined entropic potentials.

The solver alternates the exact dual updates

    f_i = -eps * log sum_j v_j exp((g_j - 0.5|x_i - y_j|^2) / eps)
    g_j = -eps * log sum_i w_i exp((f_i - 0.5|x_i - y_j|^2) / eps)

entirely in the log domain (max-subtracted log-sum-exp), so no intermediate
quantity can overflow regardless of how small eps is.  Convergence is
declared on the sup-norm fixed-point defect of this coupled system, which is
also what :func:`schrodinger_residual` reports.

A converged dual pair extends off the support: phi(x) = 0.5|x|^2 - f(x) with
f evaluated through the same log-sum-exp kernel, its gradient is the
conditional expectation of the target point given x (a softmax average), and
its Hessian is the conditional covariance divided by eps.

On tensor-product grids with axis-aligned coordinates (as produced by
``discretize_gaussian`` for diagonal covariances) the quadratic cost
separates per axis, and the log-sum-exp reduction is performed one axis at a
time.  This is exact and turns an O(n*m) update into O(n^(1+1/d)) work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .psd import DimensionMismatch, SymMatrix
from .measures import DiscreteMeasure

__all__ = [
    "ConditionalWeights",
    "DualPotentials",
    "IndexOutOfRange",
    "MaxIterExceeded",
    "conditional_weights",
    "entropic_hessian_eval",
    "entropic_map_eval",
    "normalize_potentials",
    "phi_eps_eval",
    "plan_density",
    "plan_marginals",
    "potentials_from_json",
    "potentials_to_json",
    "primal_value",
    "schrodinger_residual",
    "sinkhorn_solve",
]

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000

# Residual tolerance for warm-start stages above the target eps; each stage
# only has to seed the next one.
_STAGE_TOL = 1e-3


class MaxIterExceeded(RuntimeError):
    """Solver hit the iteration cap; carries the partial potentials."""

    def __init__(self, message: str, potentials: "DualPotentials | None" = None):
        super().__init__(message)
        self.potentials = potentials


class IndexOutOfRange(IndexError):
    """Support index outside the valid range."""


@dataclass(frozen=True, eq=False)
class DualPotentials:
    """Converged entropic dual pair on the discrete supports.

    ``dual_values`` holds the per-sweep dual objective when tracking was
    requested at solve time (final-stage sweeps only); it is diagnostic and
    not part of the serialized form.
    """

    eps: float
    f_values: np.ndarray
    g_values: np.ndarray
    iterations: int
    residual: float
    dual_values: tuple = ()

    def __post_init__(self):
        if not (np.isfinite(self.eps) and self.eps > 0):
            raise ValueError("eps must be positive and finite")
        f = np.array(self.f_values, dtype=float).reshape(-1)
        g = np.array(self.g_values, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise ValueError("potential values must be finite")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if not (np.isfinite(self.residual) and self.residual >= 0):
            raise ValueError("residual must be nonnegative and finite")
        f.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "f_values", f)
        object.__setattr__(self, "g_values", g)


@dataclass(frozen=True, eq=False)
class ConditionalWeights:
    """Conditional target weights of the entropic plan given a source point."""

    anchor: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        anchor = np.array(self.anchor, dtype=float).reshape(-1)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError("conditional weights must be nonnegative and sum to 1")
        anchor.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "weights", w)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.squeeze(m, axis=axis) + np.log(np.exp(a - m).sum(axis=axis))


def _log_weights(w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(w)


def _half_sqdist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise 0.5 * |x_i - y_j|^2 via the Gram identity."""
    xx = (x * x).sum(axis=1)
    yy = (y * y).sum(axis=1)
    sq = xx[:, None] + yy[None, :] - 2.0 * (x @ y.T)
    return 0.5 * np.maximum(sq, 0.0)


class _Geometry:
    """Cost structure between two supports, shared across eps stages."""

    def __init__(self, mu: DiscreteMeasure, nu: DiscreteMeasure):
        if mu.dim != nu.dim:
            raise DimensionMismatch(f"support dimensions differ: {mu.dim} vs {nu.dim}")
        self.mu = mu
        self.nu = nu
        self.logw = _log_weights(mu.weights)
        self.logv = _log_weights(nu.weights)
        self.separable = (
            mu.grid_axes is not None
            and nu.grid_axes is not None
            and len(mu.grid_axes) == mu.dim
            and len(nu.grid_axes) == nu.dim
        )
        if self.separable:
            self.x_axes = mu.grid_axes
            self.y_axes = nu.grid_axes
            self.x_shape = tuple(len(ax) for ax in self.x_axes)
            self.y_shape = tuple(len(ax) for ax in self.y_axes)
            # Per-axis half squared distances, source rows x target columns.
            self.axis_costs = tuple(
                0.5 * (sx[:, None] - sy[None, :]) ** 2
                for sx, sy in zip(self.x_axes, self.y_axes)
            )
        else:
            self.cost = _half_sqdist(mu.points, nu.points)

    def f_from_g(self, g: np.ndarray, eps: float) -> np.ndarray:
        if self.separable:
            gamma = (g / eps + self.logv).reshape(self.y_shape)
            costs = tuple(c / eps for c in self.axis_costs)
            return -eps * _axis_lse(gamma, costs).reshape(-1)
        arg = (g[None, :] - self.cost) / eps + self.logv[None, :]
        return -eps * _logsumexp(arg, axis=1)

    def g_from_f(self, f: np.ndarray, eps: float) -> np.ndarray:
        if self.separable:
            gamma = (f / eps + self.logw).reshape(self.x_shape)
            costs = tuple(c.T / eps for c in self.axis_costs)
            return -eps * _axis_lse(gamma, costs).reshape(-1)
        arg = (f[:, None] - self.cost) / eps + self.logw[:, None]
        return -eps * _logsumexp(arg, axis=0)


def _axis_lse(gamma: np.ndarray, axis_costs: tuple) -> np.ndarray:
    """Sequential per-axis log-sum-exp of gamma[j] - sum_k cost_k[i_k, j_k].

    Exact by associativity of log-sum-exp; each reduction is max-subtracted,
    so the whole pipeline stays overflow-free.
    """
    s = gamma
    for k in range(len(axis_costs) - 1, -1, -1):
        s = np.moveaxis(s, k, -1)
        s = _logsumexp(s[..., None, :] - axis_costs[k], axis=-1)
        s = np.moveaxis(s, -1, k)
    return s


def _union_diameter_sq(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    lo = np.minimum(mu.points.min(axis=0), nu.points.min(axis=0))
    hi = np.maximum(mu.points.max(axis=0), nu.points.max(axis=0))
    return float(((hi - lo) ** 2).sum())


def _eps_schedule(eps: float, diameter_sq: float) -> list[float]:
    stages = []
    e = max(eps, diameter_sq)
    while e > eps * (1.0 + 1e-9):
        stages.append(e)
        e /= 2.0
    stages.append(eps)
    return stages


def _dual_value(geom: _Geometry, eps: float, f: np.ndarray, f_of_g: np.ndarray, g: np.ndarray) -> float:
    # Total plan mass in log domain: sum_ij w_i v_j exp((f_i + g_j - c_ij)/eps)
    # collapses to sum_i w_i exp((f_i - F(g)_i)/eps).
    mass_log = _logsumexp(geom.logw + (f - f_of_g) / eps, axis=0)
    return float(
        geom.mu.weights @ f + geom.nu.weights @ g - eps * np.exp(mass_log) + eps
    )


def _solve_stage(geom, eps, g, tol, max_iter, dual_log):
    f = geom.f_from_g(g, eps)
    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        g = geom.g_from_f(f, eps)
        f_next = geom.f_from_g(g, eps)
        # g was just recomputed from f, so the pair (f, g) has fixed-point
        # defect exactly max|f - F(g)|.
        residual = float(np.max(np.abs(f_next - f)))
        if dual_log is not None:
            dual_log.append(_dual_value(geom, eps, f, f_next, g))
        if residual <= tol or it == max_iter:
            break
        f = f_next
    return f, g, it, residual


def sinkhorn_solve(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    eps: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    initial_g: np.ndarray | None = None,
    eps_scaling: bool = True,
    track_dual: bool = False,
) -> DualPotentials:
    """Solve for the entropic dual pair on discrete supports.

    Parameters
    ----------
    mu, nu : DiscreteMeasure
        Source and target supports with weights.
    eps : float
        Regularization strength (> 0), in units of the squared-distance cost.
    tol : float
        Convergence threshold on the sup-norm fixed-point defect.
    max_iter : int
        Iteration cap per eps stage.
    initial_g : array, optional
        Warm start for the target potential; disables the internal eps
        schedule (used when sweeping a decreasing eps grid).
    eps_scaling : bool
        Solve a geometric schedule of eps values from the squared support
        diameter down to the target, reusing each stage's potentials.
    track_dual : bool
        Record the dual objective after every sweep of the final stage in
        ``DualPotentials.dual_values``.

    Raises
    ------
    MaxIterExceeded
        If the target-eps stage does not reach ``tol``; the exception carries
        the partial potentials for diagnostics.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    geom = _Geometry(mu, nu)

    if initial_g is not None:
        g = np.array(initial_g, dtype=float).reshape(-1)
        if g.shape[0] != len(nu):
            raise DimensionMismatch(
                f"initial_g has {g.shape[0]} entries, target support has {len(nu)}"
            )
        schedule = [eps]
    else:
        g = np.zeros(len(nu))
        schedule = _eps_schedule(eps, _union_diameter_sq(mu, nu)) if eps_scaling else [eps]

    duals: list[float] = []
    total_iters = 0
    f = None
    residual = np.inf
    for idx, stage_eps in enumerate(schedule):
        final = idx == len(schedule) - 1
        stage_tol = tol if final else max(tol, _STAGE_TOL)
        f, g, iters, residual = _solve_stage(
            geom, stage_eps, g, stage_tol, max_iter, duals if (track_dual and final) else None
        )
        total_iters += iters

    pots = DualPotentials(
        eps=eps,
        f_values=f,
        g_values=g,
        iterations=total_iters,
        residual=residual,
        dual_values=tuple(duals),
    )
    if residual > tol:
        raise MaxIterExceeded(
            f"residual {residual:.3e} > tol {tol:.3e} after {total_iters} iterations",
            potentials=pots,
        )
    return pots


def schrodinger_residual(pots: DualPotentials, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Sup-norm fixed-point defect of the coupled dual system."""
    f = pots.f_values
    g = pots.g_values
    if f.shape[0] != len(mu) or g.shape[0] != len(nu):
        raise DimensionMismatch(
            f"potential lengths ({f.shape[0]}, {g.shape[0]}) do not match "
            f"supports ({len(mu)}, {len(nu)})"
        )
    geom = _Geometry(mu, nu)
    f_defect = float(np.max(np.abs(f - geom.f_from_g(g, pots.eps))))
    g_defect = float(np.max(np.abs(g - geom.g_from_f(f, pots.eps))))
    return max(f_defect, g_defect)


def plan_density(
    pots: DualPotentials, mu: DiscreteMeasure, nu: DiscreteMeasure, i: int, j: int
) -> float:
    """Mass of the plan cell (i, j): w_i v_j exp((f_i + g_j - c_ij) / eps)."""
    if not 0 <= i < len(mu):
        raise IndexOutOfRange(f"source index {i} outside [0, {len(mu)})")
    if not 0 <= j < len(nu):
        raise IndexOutOfRange(f"target index {j} outside [0, {len(nu)})")
    c = 0.5 * float(((mu.points[i] - nu.points[j]) ** 2).sum())
    log_pi = (
        np.log(mu.weights[i])
        + np.log(nu.weights[j])
        + (pots.f_values[i] + pots.g_values[j] - c) / pots.eps
    )
    return float(np.exp(log_pi))


def _plan_dense(pots, mu, nu):
    cost = _half_sqdist(mu.points, nu.points)
    log_pi = (
        _log_weights(mu.weights)[:, None]
        + _log_weights(nu.weights)[None, :]
        + (pots.f_values[:, None] + pots.g_values[None, :] - cost) / pots.eps
    )
    return np.exp(log_pi), cost


def plan_marginals(pots, mu, nu) -> tuple[np.ndarray, np.ndarray]:
    """Row and column sums of the plan; equal to the input weights at optimality."""
    pi, _ = _plan_dense(pots, mu, nu)
    return pi.sum(axis=1), pi.sum(axis=0)


def primal_value(pots, mu, nu) -> tuple[float, float]:
    """Transport cost and relative entropy of the plan induced by the potentials.

    The regularized value is ``cost + eps * rel_entropy``.  The entropy term
    uses log(pi_ij / (w_i v_j)) = (f_i + g_j - c_ij) / eps, which is exact for
    the exponential form of the plan and immune to 0 * log 0.
    """
    pi, cost_matrix = _plan_dense(pots, mu, nu)
    cost = float((pi * cost_matrix).sum())
    row = pi.sum(axis=1)
    col = pi.sum(axis=0)
    rel = float((row @ pots.f_values + col @ pots.g_values - cost) / pots.eps)
    if -1e-9 < rel < 0.0:
        rel = 0.0
    return cost, rel


def normalize_potentials(pots: DualPotentials, mu: DiscreteMeasure) -> DualPotentials:
    """Shift (f + s, g - s) so that the mu-average of 0.5|x|^2 - f is zero.

    The plan density depends on f + g only, so it is invariant under the
    shift, as are the residual and dual values.
    """
    phi_support = 0.5 * (mu.points**2).sum(axis=1) - pots.f_values
    s = float(mu.weights @ phi_support)
    return DualPotentials(
        eps=pots.eps,
        f_values=pots.f_values + s,
        g_values=pots.g_values - s,
        iterations=pots.iterations,
        residual=pots.residual,
        dual_values=pots.dual_values,
    )


def _as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if dim != 1:
            raise DimensionMismatch(f"scalar point given for dimension {dim}")
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise DimensionMismatch(f"point of length {arr.shape[0]} given for dimension {dim}")
        return arr.reshape(1, dim), True
    if arr.ndim == 2 and arr.shape[1] == dim:
        return arr, False
    raise DimensionMismatch(f"expected (dim,) or (n, dim) array, got shape {arr.shape}")


def _target_log_kernel(pots, nu, batch):
    sq = _half_sqdist(batch, nu.points)
    return (pots.g_values[None, :] - sq) / pots.eps + _log_weights(nu.weights)[None, :]


def phi_eps_eval(pots: DualPotentials, nu: DiscreteMeasure, x):
    """Entropic potential 0.5|x|^2 - f(x), defined for every x.

    Accepts a single point ``(dim,)`` (returns a float) or a batch
    ``(n, dim)`` (returns an array).  Convex in x for any fixed dual pair.
    """
    batch, single = _as_batch(x, nu.dim)
    arg = _target_log_kernel(pots, nu, batch)
    vals = 0.5 * (batch**2).sum(axis=1) + pots.eps * _logsumexp(arg, axis=1)
    return float(vals[0]) if single else vals


def entropic_map_eval(pots: DualPotentials, nu: DiscreteMeasure, x):
    """Gradient of the entropic potential: softmax average of target points.

    Always lies in the convex hull of the target support.
    """
    batch, single = _as_batch(x, nu.dim)
    arg = _target_log_kernel(pots, nu, batch)
    arg -= _logsumexp(arg, axis=1)[:, None]
    out = np.exp(arg) @ nu.points
    return out[0] if single else out


def conditional_weights(pots: DualPotentials, nu: DiscreteMeasure, x) -> ConditionalWeights:
    """Conditional plan weights over the target support given source point x."""
    batch, single = _as_batch(x, nu.dim)
    if not single:
        raise DimensionMismatch("conditional_weights takes a single point")
    arg = _target_log_kernel(pots, nu, batch)[0]
    arg -= _logsumexp(arg[None, :], axis=1)[0]
    w = np.exp(arg)
    w /= w.sum()
    return ConditionalWeights(anchor=batch[0], weights=w)


def entropic_hessian_eval(pots: DualPotentials, nu: DiscreteMeasure, x) -> SymMatrix:
    """Hessian of the entropic potential: conditional covariance over eps."""
    cw = conditional_weights(pots, nu, x)
    y = nu.points
    mean = cw.weights @ y
    second = y.T @ (y * cw.weights[:, None])
    return SymMatrix((second - np.outer(mean, mean)) / pots.eps)


def potentials_to_json(pots: DualPotentials) -> dict:
    """Serialize to the wire form {"eps", "f", "g", "iterations", "residual"}."""
    return {
        "eps": float(pots.eps),
        "f": pots.f_values.tolist(),
        "g": pots.g_values.tolist(),
        "iterations": int(pots.iterations),
        "residual": float(pots.residual),
    }


def potentials_from_json(data: dict) -> DualPotentials:
    return DualPotentials(
        eps=float(data["eps"]),
        f_values=np.asarray(data["f"], dtype=float),
        g_values=np.asarray(data["g"], dtype=float),
        iterations=int(data["iterations"]),
        residual=float(data["residual"]),
    )
