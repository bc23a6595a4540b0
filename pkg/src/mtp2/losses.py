"""Loss functionals between precision matrices, and the correlation gap.

The central object is the symmetrized Stein loss

    (1/2p) < Theta - Theta*, Sigma* - Sigma >,

the average of the Stein loss and the entropy loss.  It is nonnegative,
symmetric in its arguments, invariant under inversion and under congruence
transformations, and equals the spectral statistic
(1/p) sum (lambda_j - 1)^2 / (2 lambda_j) over the eigenvalues lambda_j of
Theta @ Sigma*.  Both routes are implemented and cross-checked in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matcore import (
    as_symmetric,
    check_same_dim,
    cholesky,
    frobenius_inner,
    inverse_psd,
    log_det,
    sym_eigen,
)
from .sampling import ZeroVariance


@dataclass(frozen=True)
class LossReport:
    """All loss values between an estimate and a truth (precision side)."""

    stein: float
    entropy: float
    sym_stein: float
    frobenius_sq_per_p: float
    spectral_diff: float


def stein_loss(theta, theta_star) -> float:
    """(1/p) <Theta, Sigma*> - (1/p) log det(Theta Sigma*) - 1."""
    t = as_symmetric(theta, "theta")
    ts = as_symmetric(theta_star, "theta_star")
    check_same_dim(t, ts)
    p = t.shape[0]
    chol_t = cholesky(t)
    chol_ts = cholesky(ts)
    sigma_star = inverse_psd(chol_ts)
    return (frobenius_inner(t, sigma_star) - log_det(chol_t) + log_det(chol_ts)) / p - 1.0


def entropy_loss(theta, theta_star) -> float:
    """Stein loss with the arguments reversed."""
    return stein_loss(theta_star, theta)


def sym_stein_loss(theta, theta_star) -> float:
    """(1/2p) <Theta - Theta*, Sigma* - Sigma> with Sigma = Theta^-1."""
    t = as_symmetric(theta, "theta")
    ts = as_symmetric(theta_star, "theta_star")
    check_same_dim(t, ts)
    p = t.shape[0]
    sigma = inverse_psd(cholesky(t))
    sigma_star = inverse_psd(cholesky(ts))
    return frobenius_inner(t - ts, sigma_star - sigma) / (2.0 * p)


def sym_stein_from_spectrum(theta, theta_star) -> float:
    """Spectral route: (1/p) sum (lambda_j - 1)^2 / (2 lambda_j).

    The lambda_j are the eigenvalues of Theta @ Sigma*, computed through the
    symmetric congruence Sigma*^(1/2) Theta Sigma*^(1/2) (same spectrum),
    avoiding a nonsymmetric eigensolver.
    """
    t = as_symmetric(theta, "theta")
    ts = as_symmetric(theta_star, "theta_star")
    check_same_dim(t, ts)
    p = t.shape[0]
    cholesky(t)  # reject non-SPD theta up front
    sigma_star = inverse_psd(cholesky(ts))
    w, v = sym_eigen(sigma_star)
    root = (v * np.sqrt(w)) @ v.T
    lam = sym_eigen(root @ t @ root).eigenvalues
    return float(np.sum((lam - 1.0) ** 2 / (2.0 * lam)) / p)


def gamma(sigma) -> float:
    """Reciprocal gap to perfect correlation, 1 / (1 - max off-diag corr).

    Returns ``math.inf`` (never raises) when the largest off-diagonal
    correlation reaches 1, so sweeps can record boundary cases.  A 1x1
    matrix has no correlations and gamma = 1.
    """
    a = as_symmetric(sigma, "sigma")
    d = np.diag(a)
    bad = np.flatnonzero(d <= 0.0)
    if bad.size:
        raise ZeroVariance(int(bad[0]))
    p = a.shape[0]
    if p == 1:
        return 1.0
    inv_sq = 1.0 / np.sqrt(d)
    r = a * np.outer(inv_sq, inv_sq)
    np.fill_diagonal(r, -np.inf)
    max_corr = float(r.max())
    if max_corr >= 1.0:
        return math.inf
    return 1.0 / (1.0 - max_corr)


def spectral_norm_diff(a, b) -> float:
    """Spectral norm of A - B (max absolute eigenvalue of the difference)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    check_same_dim(a, b)
    w = sym_eigen(a - b).eigenvalues
    return float(np.abs(w).max())


def loss_report(theta, theta_star) -> LossReport:
    """Bundle every loss between a precision estimate and a precision truth."""
    t = as_symmetric(theta, "theta")
    ts = as_symmetric(theta_star, "theta_star")
    check_same_dim(t, ts)
    p = t.shape[0]
    stein = stein_loss(t, ts)
    entropy = stein_loss(ts, t)
    return LossReport(
        stein=stein,
        entropy=entropy,
        sym_stein=(stein + entropy) / 2.0,
        frobenius_sq_per_p=float(np.sum((t - ts) ** 2)) / p,
        spectral_diff=spectral_norm_diff(t, ts),
    )
