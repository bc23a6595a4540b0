"""Seeded multivariate Gaussian sampling and empirical second moments.

Reproducibility contract
------------------------
All randomness flows through the counter-based Philox generator
(``numpy.random.Philox``), keyed by a 64-bit seed.  Normal variates use
numpy's ziggurat ``standard_normal``.  Replication ``r`` of grid cell ``c``
in an experiment draws from the stream

    philox_stream(cell_seed(base_seed, c) ^ r)

where ``cell_seed`` is a splitmix64 mix of the base seed and the cell index.
Identical (covariance, n, seed) triples therefore produce bit-identical
data matrices, and every experiment cell/replication is independently
reproducible.
"""

from __future__ import annotations

import numpy as np

from .matcore import as_symmetric, check_same_dim, cholesky

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class ZeroVariance(ValueError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"variable {index} has nonpositive variance")


class InvalidT(ValueError):
    pass


def philox_stream(seed: int) -> np.random.Generator:
    """Counter-based generator for a 64-bit stream id."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))


def _splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def cell_seed(base_seed: int, cell_index: int) -> int:
    """Well-separated per-cell seed derived from the experiment base seed."""
    return _splitmix64((int(base_seed) ^ (cell_index * _GOLDEN)) & _MASK64)


def replication_seed(base_seed: int, cell_index: int, replication: int) -> int:
    """Stream id for one replication: per-cell seed XOR replication index."""
    return cell_seed(base_seed, cell_index) ^ int(replication)


def sample_gaussian(covariance, n: int, seed: int) -> np.ndarray:
    """n i.i.d. rows from a centered Gaussian with the given SPD covariance.

    Each row is L @ z for standard normal z and L the lower Cholesky factor,
    so ``NotPositiveDefinite`` propagates for infeasible covariances.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 rows, got {n}")
    cov = as_symmetric(covariance, "covariance")
    chol_l = cholesky(cov)
    rng = philox_stream(seed)
    z = rng.standard_normal((n, cov.shape[0]))
    return z @ chol_l.T


def sample_covariance(x: np.ndarray) -> np.ndarray:
    """Second-moment matrix X.T @ X / n (mean-zero model, no centering)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"data matrix must be 2-d with n >= 1 rows, got {x.shape}")
    n = x.shape[0]
    s = x.T @ x / n
    return (s + s.T) / 2.0


def correlation_matrix(s) -> np.ndarray:
    """Rescale a covariance-like matrix to unit diagonal."""
    a = as_symmetric(s, "covariance")
    d = np.diag(a)
    bad = np.flatnonzero(d <= 0.0)
    if bad.size:
        raise ZeroVariance(int(bad[0]))
    inv_sq = 1.0 / np.sqrt(d)
    r = a * np.outer(inv_sq, inv_sq)
    np.fill_diagonal(r, 1.0)
    return r


def max_deviation(s: np.ndarray, sigma: np.ndarray) -> float:
    """Entrywise max absolute deviation max_jk |S_jk - Sigma_jk|."""
    s = np.asarray(s, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    check_same_dim(s, sigma)
    return float(np.abs(s - sigma).max())


def bernstein_bound(p: int, n: int, t: float, sup_entry: float) -> float:
    """Deviation threshold 2 * sup * (sqrt(2 t log p / n) + t log p / n).

    The entrywise max deviation of the sample covariance exceeds this value
    with probability at most 2 / p**(t - 2), hence the requirement t > 2.
    """
    if t <= 2.0:
        raise InvalidT(f"tail parameter t must exceed 2, got {t}")
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if sup_entry < 0.0:
        raise ValueError(f"sup_entry must be >= 0, got {sup_entry}")
    rate = t * np.log(p) / n
    return 2.0 * sup_entry * (np.sqrt(2.0 * rate) + rate)
