"""Dense symmetric linear algebra kernels.

Everything downstream (sampling, the constrained solver, losses, model
generators) funnels through the handful of primitives in this module, so the
contracts here are deliberately strict: inputs are validated, asymmetric
matrices are rejected unless the asymmetry is at roundoff level, and Cholesky
failures carry the index of the offending pivot.

Matrices are plain float64 ``numpy`` arrays; ``as_symmetric`` is the single
entry point that turns untrusted input into a trusted symmetric matrix.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.linalg.lapack import dpotrf, dpotri

# Relative tolerances for the dense kernels (double precision, p <= 2000).
RELTOL_CHOL = 1e-10
RELTOL_INV = 1e-10
RELTOL_EIG = 1e-8

# Asymmetry beyond this (relative to the largest entry) is rejected instead of
# silently symmetrized.
ASYMMETRY_RTOL = 1e-10

# A Cholesky pivot at or below PIVOT_FLOOR_RTOL * max(diag) fails loudly.
PIVOT_FLOOR_RTOL = 1e-12


class MatrixError(ValueError):
    """Base class for matrix-shape and matrix-value errors."""


class DimensionMismatch(MatrixError):
    pass


class AsymmetricInput(MatrixError):
    pass


class NotPositiveDefinite(MatrixError):
    """Cholesky pivot failure; ``index`` is the 0-based failing pivot."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"matrix is not positive definite (pivot {index})")


class NonpositiveScale(MatrixError):
    pass


class ConvergenceFailure(RuntimeError):
    pass


class SpectralDecomposition(NamedTuple):
    """Eigenvalues in ascending order with orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_symmetric(m, name: str = "matrix") -> np.ndarray:
    """Validate and return a square symmetric float64 array.

    Input whose asymmetry exceeds ``ASYMMETRY_RTOL`` times the largest entry
    is rejected (silent symmetrization of gross asymmetry hides bugs);
    otherwise the result is the exact symmetrization ``(M + M.T) / 2``.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise DimensionMismatch(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(a)):
        raise MatrixError(f"{name} contains non-finite entries")
    scale = np.abs(a).max()
    asym = np.abs(a - a.T).max()
    if asym > ASYMMETRY_RTOL * max(scale, 1e-300):
        raise AsymmetricInput(
            f"{name} is asymmetric: max |M - M.T| = {asym:.3e} vs scale {scale:.3e}"
        )
    return (a + a.T) / 2.0


def check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == m.

    Raises ``NotPositiveDefinite`` with the 0-based pivot index when LAPACK
    fails, and also when a pivot is positive but at or below the floor
    ``PIVOT_FLOOR_RTOL * max(diag)`` -- near-singular input indicates a
    violated precondition upstream and must not produce garbage.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got {a.shape}")
    c, info = dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise MatrixError(f"illegal value in argument {-info} of dpotrf")
    pivot_floor = PIVOT_FLOOR_RTOL * max(float(np.diag(a).max()), 0.0)
    pivots = np.diag(c) ** 2
    if pivots.min() <= pivot_floor:
        raise NotPositiveDefinite(int(np.argmin(pivots)))
    return c


def log_det(chol_factor: np.ndarray) -> float:
    """log det of the matrix whose Cholesky factor is given: 2 * sum(log L_jj)."""
    return 2.0 * float(np.sum(np.log(np.diag(chol_factor))))


def inverse_psd(chol_factor: np.ndarray) -> np.ndarray:
    """Inverse of the SPD matrix whose lower Cholesky factor is given."""
    inv, info = dpotri(chol_factor, lower=1, overwrite_c=0)
    if info != 0:
        raise MatrixError(f"dpotri failed with info={info}")
    # dpotri fills only the lower triangle
    inv = np.tril(inv) + np.tril(inv, -1).T
    return inv


def sym_eigen(m: np.ndarray) -> SpectralDecomposition:
    """Full spectrum of a symmetric matrix, eigenvalues ascending.

    Backed by the LAPACK symmetric eigensolver (tridiagonalization plus
    implicit-shift iteration).
    """
    a = as_symmetric(m)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(f"symmetric eigensolver failed: {exc}") from exc
    return SpectralDecomposition(eigenvalues=w, eigenvectors=v)


def frobenius_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius inner product sum_jk A_jk * B_jk."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    check_same_dim(a, b)
    return float(np.sum(a * b))


def positive_part(m: np.ndarray) -> np.ndarray:
    """Entrywise positive part max(M_jk, 0)."""
    return np.maximum(np.asarray(m, dtype=float), 0.0)


def congruence(d, m: np.ndarray) -> np.ndarray:
    """Two-sided positive diagonal scaling diag(d) @ M @ diag(d)."""
    d = np.asarray(d, dtype=float)
    a = np.asarray(m, dtype=float)
    if d.ndim != 1 or d.shape[0] != a.shape[0]:
        raise DimensionMismatch(
            f"scale vector of length {d.shape} does not match matrix {a.shape}"
        )
    if np.any(d <= 0.0):
        raise NonpositiveScale(f"scale entries must be > 0, min is {d.min()}")
    return a * np.outer(d, d)
