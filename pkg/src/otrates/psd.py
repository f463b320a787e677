"""Symmetric PSD matrix analysis: square roots, operator norms, Loewner order.

All routines work on small dense symmetric matrices (covariances, transport
map matrices, Hessians) through an exact symmetric eigendecomposition, which
keeps bound verification free of iterative-solver slack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_CLAMP_TOL",
    "DimensionMismatch",
    "NotPSD",
    "SymMatrix",
    "as_sym_matrix",
    "loewner_leq",
    "op_norm",
    "sym_sqrt",
]

# Relative eigenvalue band treated as numerically zero; matches the accuracy
# of LAPACK's double-precision symmetric eigensolvers.
DEFAULT_CLAMP_TOL = 1e-10


class NotPSD(ValueError):
    """An eigenvalue lies below the tolerated negative band."""


class DimensionMismatch(ValueError):
    """Operands have incompatible dimensions."""


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Immutable real symmetric square matrix.

    Construction symmetrizes the input as ``(M + M.T) / 2``, so
    ``entries[i, j] == entries[j, i]`` holds exactly afterwards.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise DimensionMismatch("matrix dimension must be at least 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must be finite")
        arr = 0.5 * (arr + arr.T)
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def as_sym_matrix(m) -> SymMatrix:
    """Coerce an array-like (or pass through a SymMatrix) to SymMatrix."""
    if isinstance(m, SymMatrix):
        return m
    return SymMatrix(np.asarray(m, dtype=float))


def op_norm(m) -> float:
    """Operator norm sup_{|x|=1} |Mx| of a symmetric matrix.

    Equals the largest eigenvalue magnitude.
    """
    m = as_sym_matrix(m)
    vals = np.linalg.eigvalsh(m.entries)
    return float(np.max(np.abs(vals)))


def sym_sqrt(m, clamp_tol: float = DEFAULT_CLAMP_TOL) -> SymMatrix:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in ``[-clamp_tol * op_norm(m), 0)`` are treated as numerical
    noise and clamped to zero before rooting; anything below that band raises
    :class:`NotPSD`.
    """
    m = as_sym_matrix(m)
    if clamp_tol < 0:
        raise ValueError("clamp_tol must be nonnegative")
    vals, vecs = np.linalg.eigh(m.entries)
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    floor = -clamp_tol * scale
    if vals[0] < floor:
        raise NotPSD(
            f"eigenvalue {vals[0]:.6e} below -clamp_tol*op_norm = {floor:.6e}"
        )
    root = np.sqrt(np.clip(vals, 0.0, None))
    return SymMatrix((vecs * root) @ vecs.T)


def loewner_leq(a, b, tol: float = 0.0) -> bool:
    """Loewner-order test ``a <= b``: min eigenvalue of (b - a) >= -tol."""
    a = as_sym_matrix(a)
    b = as_sym_matrix(b)
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions differ: {a.dim} vs {b.dim}")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    vals = np.linalg.eigvalsh(b.entries - a.entries)
    return bool(vals[0] >= -tol)
