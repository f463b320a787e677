"""Closed-form transport maps between zero-mean Gaussians.

Both the exact quadratic-cost transport map and its entropy-regularized
counterpart are linear, with symmetric positive-definite matrices

    T_0   = A^{-1/2} (A^{1/2} B A^{1/2})^{1/2} A^{-1/2}
    T_eps = A^{-1/2} (A^{1/2} B A^{1/2} + (eps^2/4) I)^{1/2} A^{-1/2}
            - (eps/2) A^{-1}

for source covariance A and target covariance B.  The sup-norm gap between
the two maps over a centered ball is exactly the radius times the operator
norm of their difference, and admits the explicit O(eps) upper bound
implemented in :func:`prop11_bound`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .psd import NotPSD, SymMatrix, as_sym_matrix, op_norm, sym_sqrt

__all__ = [
    "LinearMap",
    "brenier_map_matrix",
    "entropic_map_matrix",
    "prop11_bound",
    "sup_gap_on_ball",
]


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Linear vector field x -> Mx with symmetric M; callable on points or batches."""

    matrix: SymMatrix

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.matrix.entries

    @property
    def dim(self) -> int:
        return self.matrix.dim


def _spd_eigh(m: SymMatrix):
    vals, vecs = np.linalg.eigh(m.entries)
    if vals[0] <= 0:
        raise NotPSD(f"matrix must be strictly PD (min eigenvalue {vals[0]:.6e})")
    return vals, vecs


def _middle_matrix(a: SymMatrix, b: SymMatrix) -> tuple[np.ndarray, np.ndarray, SymMatrix]:
    """Return A^{1/2}, A^{-1/2}, and the conjugated target S = A^{1/2} B A^{1/2}."""
    vals, vecs = _spd_eigh(a)
    a_half = (vecs * np.sqrt(vals)) @ vecs.T
    a_inv_half = (vecs / np.sqrt(vals)) @ vecs.T
    s = SymMatrix(a_half @ b.entries @ a_half)
    return a_half, a_inv_half, s


def brenier_map_matrix(a, b) -> LinearMap:
    """Exact transport map matrix pushing N(0, A) onto N(0, B)."""
    a = as_sym_matrix(a)
    b = as_sym_matrix(b)
    _spd_eigh(b)
    _, a_inv_half, s = _middle_matrix(a, b)
    t = a_inv_half @ sym_sqrt(s).entries @ a_inv_half
    return LinearMap(SymMatrix(t))


def entropic_map_matrix(a, b, eps: float) -> LinearMap:
    """Entropy-regularized transport map matrix; reduces to the exact map at eps = 0."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    a = as_sym_matrix(a)
    b = as_sym_matrix(b)
    _spd_eigh(b)
    vals, vecs = _spd_eigh(a)
    a_inv_half = (vecs / np.sqrt(vals)) @ vecs.T
    a_inv = (vecs / vals) @ vecs.T
    a_half = (vecs * np.sqrt(vals)) @ vecs.T
    s = a_half @ b.entries @ a_half
    shifted = SymMatrix(s + (eps**2 / 4.0) * np.eye(a.dim))
    t = a_inv_half @ sym_sqrt(shifted).entries @ a_inv_half - (eps / 2.0) * a_inv
    return LinearMap(SymMatrix(t))


def prop11_bound(a, b, eps: float, radius: float) -> float:
    """Closed-form upper bound for the ball sup-gap between the two Gaussian maps.

    Evaluates

        R * eps * (|A^-1|_op / 2)
          * (eps * m^{1/2} / 4 + eps^3 * m^{3/2} / 16 + 1),

    where m = |(A^{1/2} B A^{1/2})^{-1}|_op.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if radius <= 0:
        raise ValueError("radius must be positive")
    a = as_sym_matrix(a)
    b = as_sym_matrix(b)
    _spd_eigh(b)
    _, _, s = _middle_matrix(a, b)
    s_vals, _ = _spd_eigh(s)
    m = 1.0 / float(s_vals[0])
    a_inv_op = op_norm(np.linalg.inv(a.entries))
    return float(
        radius
        * eps
        * (a_inv_op / 2.0)
        * (eps * np.sqrt(m) / 4.0 + eps**3 * m**1.5 / 16.0 + 1.0)
    )


def sup_gap_on_ball(a, b, eps: float, radius: float) -> float:
    """Exact sup over the closed ball of |T_eps x - T_0 x| = R |T_eps - T_0|_op."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    t0 = brenier_map_matrix(a, b)
    te = entropic_map_matrix(a, b, eps)
    return float(radius * op_norm(te.matrix.entries - t0.matrix.entries))
