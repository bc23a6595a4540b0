"""Sign-constrained Gaussian maximum likelihood for precision matrices.

The estimator minimizes ``<Theta, S> - log det Theta`` over symmetric
M-matrices (PSD with nonpositive off-diagonal entries).  It exists uniquely
whenever every sample variance is positive and no two variables are perfectly
positively correlated, which holds almost surely for Gaussian data with
n >= 2 regardless of the dimension.

Algorithm
---------
Block coordinate ascent on the dual program

    maximize log det W   subject to   W >= S entrywise,  diag(W) = diag(S).

One column at a time, partition W into the block ``W_-j,-j``, the column
``w = W_-j,j`` and the pinned scalar ``W_jj = S_jj``.  Since
``det W = det(W_-j,-j) * (S_jj - w' K w)`` with ``K = (W_-j,-j)^-1``, the
column subproblem is the bound-constrained quadratic

    minimize  w' K w   subject to  w_k >= S_kj,

solved by cyclic coordinate minimization with clamping.  The primal iterate
``Theta = W^-1`` is maintained incrementally (rank-one block identities), so
``K`` is available in O(p^2) per column without refactorizations.

The initial W is the sample-correlation equicorrelation hull
``W0 = D^(1/2) A D^(1/2)``, with unit-diagonal A whose off-diagonals all equal
the largest (nonnegative) sample correlation.  W0 is dual-feasible and
positive definite whenever the estimator exists, and the clamped updates keep
feasibility, so ``det W`` is nondecreasing and every iterate stays SPD.

Convergence is declared only when the four KKT residuals (primal sign, dual
feasibility, diagonal match, complementary slackness) pass, never merely when
iterates stall.

Near the existence boundary (sample correlations close to one, e.g. n = 2
with large p) the column problems have condition numbers beyond the reach of
first-order sweeps, so the solver switches to an exact active-set solve of
the same subproblem, working directly on the original block so no inverse is
ever formed.  Only the unique optimum is normative; the iterate path differs
between the two regimes.

The inner kernel is compiled with numba when available; a pure-Python build
of the same function is used otherwise (identical semantics, much slower).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .matcore import as_symmetric, check_same_dim, cholesky, inverse_psd

# Inputs closer than this to the existence boundary (a sample correlation of
# one) are refused instead of attempting an ill-conditioned solve.  At gap g
# the optimum has entries ~1/(2g) and the certificate cannot be evaluated in
# float64 below roughly kappa(W) * eps / (2g) ~ 1e-14/g^2, so certificates at
# the default 1e-7 tolerance require g >= ~1e-4; smaller gaps are refused.
EXISTENCE_MARGIN = 1e-4

# Above this worst correlation the column problems are too ill-conditioned
# for the coordinate-descent kernel (and the incrementally maintained inverse
# loses too many digits), so the solver uses the exact active-set column
# solve from the start.
CAREFUL_CORRELATION = 0.99


class DoesNotExist(ValueError):
    """The constrained MLE does not exist (or is numerically on the boundary)."""

    def __init__(self, diagnostic: "ExistenceDiagnostic"):
        self.diagnostic = diagnostic
        super().__init__(
            "estimator does not exist: min diagonal "
            f"{diagnostic.min_diagonal:.3e}, worst correlation "
            f"{diagnostic.worst_correlation!r} at pair {diagnostic.worst_pair}"
        )


class NoConvergence(RuntimeError):
    def __init__(self, sweeps: int, residuals: "KktResiduals"):
        self.sweeps = sweeps
        self.residuals = residuals
        super().__init__(
            f"no convergence after {sweeps} sweeps; residuals {residuals}"
        )


@dataclass(frozen=True)
class MMatrixCheck:
    is_m_matrix: bool
    max_offdiag: float
    min_eigenvalue: float


@dataclass(frozen=True)
class ExistenceDiagnostic:
    exists: bool
    worst_pair: Optional[tuple[int, int]]
    worst_correlation: float
    min_diagonal: float


@dataclass(frozen=True)
class SolverConfig:
    kkt_tol: float = 1e-7
    max_sweeps: int = 500
    inner_tol: float = 1e-10
    inner_max_iter: Optional[int] = None  # None resolves to 10 * p

    def __post_init__(self):
        if self.kkt_tol <= 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.inner_max_iter is not None and self.inner_max_iter < 1:
            raise ValueError("inner_max_iter must be >= 1")


@dataclass(frozen=True)
class KktResiduals:
    """Optimality certificate for a (theta, sigma, S) triple.

    primal_sign   largest positive off-diagonal of theta (sign constraint)
    dual_feas     largest violation of sigma >= S off-diagonal
    diag_match    largest |sigma_jj - S_jj|
    comp_slack    largest |theta_jk * (sigma_jk - S_jk)| off-diagonal
    """

    primal_sign: float
    dual_feas: float
    diag_match: float
    comp_slack: float

    def max_value(self) -> float:
        return max(self.primal_sign, self.dual_feas, self.diag_match, self.comp_slack)


@dataclass(frozen=True)
class EstimateResult:
    """Solver output.

    ``theta_hat`` is recovered from a fresh Cholesky inverse of the final
    dual iterate ``sigma_hat``; ``assembly_residual`` is the entrywise gap
    between that and the incrementally assembled inverse (a roundoff
    diagnostic).  ``objective_trace`` holds the primal objective of the
    assembled inverse after each sweep and ``dual_objective_trace`` holds
    log det W, which is non-decreasing by construction (the primal trace
    need not be monotone under dual block ascent).
    """

    theta_hat: np.ndarray
    sigma_hat: np.ndarray
    sweeps_used: int
    converged: bool
    kkt: KktResiduals
    objective_trace: np.ndarray = field(repr=False, default=None)
    dual_objective_trace: np.ndarray = field(repr=False, default=None)
    assembly_residual: float = 0.0


def _update_column_impl(W, Theta, S, j, inner_tol, inner_max):
    """One dual block update of column j, in place.

    Returns (max entry change of the column, updated Schur complement).
    Written in plain loops so the identical source compiles under numba.
    """
    p = W.shape[0]
    m = p - 1
    K = np.empty((m, m))
    w = np.empty(m)
    lo = np.empty(m)
    tjj = Theta[j, j]
    r = 0
    for a in range(p):
        if a == j:
            continue
        ta = Theta[a, j] / tjj
        c = 0
        for b in range(p):
            if b == j:
                continue
            K[r, c] = Theta[a, b] - ta * Theta[b, j]
            c += 1
        w[r] = W[a, j]
        lo[r] = S[a, j]
        r += 1
    g = K @ w
    for _ in range(inner_max):
        delta_max = 0.0
        wmax = 0.0
        for k in range(m):
            cand = w[k] - g[k] / K[k, k]
            nk = lo[k] if cand < lo[k] else cand
            d = nk - w[k]
            if d != 0.0:
                ad = abs(d)
                if ad > delta_max:
                    delta_max = ad
                for a in range(m):
                    g[a] += K[k, a] * d
                w[k] = nk
            aw = abs(nk)
            if aw > wmax:
                wmax = aw
        if delta_max <= inner_tol * (1.0 + wmax):
            break
    q = 0.0
    for k in range(m):
        q += w[k] * g[k]
    schur = S[j, j] - q
    if schur <= 0.0:
        return -1.0, schur
    tjj_new = 1.0 / schur
    maxchange = 0.0
    r = 0
    for a in range(p):
        if a == j:
            continue
        ch = abs(w[r] - W[a, j])
        if ch > maxchange:
            maxchange = ch
        W[a, j] = w[r]
        W[j, a] = w[r]
        tc = -tjj_new * g[r]
        Theta[a, j] = tc
        Theta[j, a] = tc
        r += 1
    Theta[j, j] = tjj_new
    r = 0
    for a in range(p):
        if a == j:
            continue
        c = 0
        for b in range(p):
            if b == j:
                continue
            Theta[a, b] = K[r, c] + tjj_new * g[r] * g[c]
            c += 1
        r += 1
    return maxchange, schur


try:
    from numba import njit

    _update_column = njit(cache=True)(_update_column_impl)
except ImportError:  # pragma: no cover - numba is a declared dependency
    _update_column = _update_column_impl


def _active_set_bound_qp(wsub: np.ndarray, lower: np.ndarray, w0: np.ndarray) -> np.ndarray:
    """Exact minimizer of w' (wsub)^-1 w subject to w >= lower (wsub SPD).

    Lawson-Hanson style primal active set with a feasible warm start.  The
    equality-constrained solves work directly against the original block
    ``wsub`` (the candidate is ``wsub[:, A] @ solve(wsub[A, A], lower[A])``,
    whose restriction to A equals the bounds and whose multipliers are the
    solve coefficients themselves), so no inverse is ever formed.  Used when
    the column problem is too ill-conditioned for first-order sweeps (sample
    correlations near one); clamped coordinates land on their bounds bitwise,
    which keeps the complementary-slackness certificate exact.
    """
    m = lower.size
    x = np.maximum(w0, lower)
    active = ~(x > lower)
    for _ in range(10 * m + 100):
        a_idx = np.flatnonzero(active)
        if a_idx.size:
            wa = wsub[np.ix_(a_idx, a_idx)]
            try:
                multipliers = np.linalg.solve(wa, lower[a_idx])
            except np.linalg.LinAlgError:
                multipliers = np.linalg.lstsq(wa, lower[a_idx], rcond=None)[0]
            cand = wsub[:, a_idx] @ multipliers
            cand[a_idx] = lower[a_idx]
        else:
            multipliers = np.zeros(0)
            cand = np.zeros(m)
        infeasible = (~active) & (cand < lower)
        if infeasible.any():
            # blocking step: move toward the candidate until a bound activates
            denom = x - cand
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(infeasible & (denom > 0), (x - lower) / denom, np.inf)
            blocker = int(np.argmin(ratios))
            x = x + float(ratios[blocker]) * (cand - x)
            x = np.maximum(x, lower)
            x[blocker] = lower[blocker]
            active[blocker] = True
            continue
        x = cand
        if not a_idx.size:
            return x
        dual_floor = -1e-12 * max(1.0, float(np.abs(multipliers).max()))
        worst = int(np.argmin(multipliers))
        if multipliers[worst] >= dual_floor:
            return x
        active[a_idx[worst]] = False
    return x


def check_existence(s) -> ExistenceDiagnostic:
    """Existence diagnostic: positive variances and no perfect positive correlation."""
    a = as_symmetric(s, "S")
    p = a.shape[0]
    d = np.diag(a)
    min_diag = float(d.min())
    if p == 1:
        return ExistenceDiagnostic(
            exists=min_diag > 0.0,
            worst_pair=None,
            worst_correlation=0.0,
            min_diagonal=min_diag,
        )
    if min_diag <= 0.0:
        # correlations are undefined; restrict to pairs with positive variances
        pos = d > 0.0
        worst, pair = -np.inf, None
        if pos.sum() >= 2:
            idx = np.flatnonzero(pos)
            sub = a[np.ix_(idx, idx)]
            inv_sq = 1.0 / np.sqrt(d[idx])
            r = sub * np.outer(inv_sq, inv_sq)
            np.fill_diagonal(r, -np.inf)
            k = int(np.argmax(r))
            i0, i1 = divmod(k, r.shape[0])
            worst = float(r[i0, i1])
            pair = (int(min(idx[i0], idx[i1])), int(max(idx[i0], idx[i1])))
        return ExistenceDiagnostic(False, pair, worst, min_diag)
    inv_sq = 1.0 / np.sqrt(d)
    r = a * np.outer(inv_sq, inv_sq)
    np.fill_diagonal(r, -np.inf)
    k = int(np.argmax(r))
    i0, i1 = divmod(k, p)
    worst = float(r[i0, i1])
    return ExistenceDiagnostic(
        exists=worst < 1.0,
        worst_pair=(int(min(i0, i1)), int(max(i0, i1))),
        worst_correlation=worst,
        min_diagonal=min_diag,
    )


def is_m_matrix(m, tol_sign: float = 1e-9, tol_psd: float = 1e-9) -> MMatrixCheck:
    """Check PSD-ness and nonpositive off-diagonals within tolerances."""
    a = as_symmetric(m)
    p = a.shape[0]
    if p == 1:
        max_off = 0.0
    else:
        off = a.copy()
        np.fill_diagonal(off, -np.inf)
        max_off = float(off.max())
    min_eig = float(np.linalg.eigvalsh(a)[0])
    return MMatrixCheck(
        is_m_matrix=(max_off <= tol_sign) and (min_eig >= -tol_psd),
        max_offdiag=max_off,
        min_eigenvalue=min_eig,
    )


def kkt_residuals(theta, sigma, s) -> KktResiduals:
    """The four optimality residuals, computed exactly as defined."""
    theta = np.asarray(theta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    s = np.asarray(s, dtype=float)
    check_same_dim(theta, sigma)
    check_same_dim(theta, s)
    p = theta.shape[0]
    diag_match = float(np.abs(np.diag(sigma) - np.diag(s)).max())
    if p == 1:
        return KktResiduals(0.0, 0.0, diag_match, 0.0)
    off = ~np.eye(p, dtype=bool)
    primal_sign = max(0.0, float(theta[off].max()))
    dual_feas = max(0.0, float((s - sigma)[off].max()))
    comp_slack = float(np.abs(theta[off] * (sigma - s)[off]).max())
    return KktResiduals(primal_sign, dual_feas, diag_match, comp_slack)


def _primal_objective(theta: np.ndarray, s: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(theta)
    return float(np.sum(theta * s) - logdet)


def _careful_column(W: np.ndarray, S: np.ndarray, j: int) -> float:
    """Column update via the exact active-set subproblem solve; robust to
    the extreme conditioning of near-boundary instances."""
    p = W.shape[0]
    idx = np.concatenate([np.arange(j), np.arange(j + 1, p)])
    wsub = W[np.ix_(idx, idx)]
    w_new = _active_set_bound_qp(wsub, S[idx, j], W[idx, j])
    change = float(np.abs(w_new - W[idx, j]).max())
    W[idx, j] = w_new
    W[j, idx] = w_new
    return change


def _feasible_init(s: np.ndarray, worst_correlation: float) -> np.ndarray:
    """Dual-feasible SPD start: equicorrelation hull of S.

    Off-diagonal (j,k) is set to lam * sqrt(S_jj S_kk) with lam the largest
    nonnegative sample correlation, which dominates every S_jk; the matrix is
    a congruence of unit-diagonal equicorrelation with lam < 1, hence SPD.
    """
    lam = max(0.0, worst_correlation)
    sq = np.sqrt(np.diag(s))
    w = lam * np.outer(sq, sq)
    np.fill_diagonal(w, np.diag(s))
    return w


def estimate_mle(
    s,
    config: SolverConfig | None = None,
    *,
    sweep_rng: np.random.Generator | None = None,
) -> EstimateResult:
    """Solve the M-matrix constrained log-determinant program for S.

    Raises ``DoesNotExist`` when the existence conditions fail (or hold with
    a margin below ``EXISTENCE_MARGIN``) and ``NoConvergence`` when
    ``max_sweeps`` is exhausted without a passing KKT certificate.

    ``sweep_rng`` randomizes the column order of each sweep; the optimum is
    unique, so this only perturbs the iterate path.
    """
    cfg = config if config is not None else SolverConfig()
    S = as_symmetric(s, "S")
    p = S.shape[0]
    diagnostic = check_existence(S)
    if not diagnostic.exists or diagnostic.worst_correlation > 1.0 - EXISTENCE_MARGIN:
        raise DoesNotExist(diagnostic)

    if p == 1:
        theta = np.array([[1.0 / S[0, 0]]])
        zero = KktResiduals(0.0, 0.0, 0.0, 0.0)
        obj = np.array([_primal_objective(theta, S)])
        return EstimateResult(
            theta_hat=theta,
            sigma_hat=S.copy(),
            sweeps_used=0,
            converged=True,
            kkt=zero,
            objective_trace=obj,
            dual_objective_trace=np.array([float(np.log(S[0, 0]))]),
            assembly_residual=0.0,
        )

    scale = max(1.0, float(np.abs(S).max()))
    inner_max = cfg.inner_max_iter if cfg.inner_max_iter is not None else 10 * p
    inner_tol = cfg.inner_tol

    W = _feasible_init(S, diagnostic.worst_correlation)
    Theta = inverse_psd(cholesky(W))
    obj_trace = [_primal_objective(Theta, S)]
    dual_trace = [float(np.linalg.slogdet(W)[1])]

    last_residuals = kkt_residuals(Theta, W, S)
    theta_fresh: np.ndarray | None = None
    converged = False
    careful = diagnostic.worst_correlation > CAREFUL_CORRELATION
    stalls = 0
    sweeps = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        sweeps = sweep
        order = np.arange(p) if sweep_rng is None else sweep_rng.permutation(p)
        maxchange = 0.0
        for j in order:
            jj = int(j)
            if careful:
                ch = _careful_column(W, S, jj)
            else:
                ch, schur = _update_column(W, Theta, S, jj, inner_tol, inner_max)
                if schur <= 0.0:
                    # maintained inverse drifted; resync and retry once
                    Theta = inverse_psd(cholesky(W))
                    ch, schur = _update_column(W, Theta, S, jj, inner_tol, inner_max)
                    if schur <= 0.0:
                        careful = True
                        ch = _careful_column(W, S, jj)
            if ch > maxchange:
                maxchange = ch
        if careful:
            Theta = inverse_psd(cholesky(W))
        obj_trace.append(_primal_objective(Theta, S))
        dual_trace.append(float(np.linalg.slogdet(W)[1]))
        if maxchange > cfg.kkt_tol * (1.0 + scale):
            continue
        last_residuals = kkt_residuals(Theta, W, S)
        if last_residuals.max_value() <= cfg.kkt_tol * scale:
            theta_fresh = inverse_psd(cholesky(W))
            fresh = kkt_residuals(theta_fresh, W, S)
            if fresh.max_value() <= cfg.kkt_tol * scale:
                last_residuals = fresh
                converged = True
                break
            # maintained inverse drifted: resync and keep sweeping
            last_residuals = fresh
            Theta = theta_fresh
        else:
            # stalled short of the certificate: demand more of the inner
            # solver, and switch to the exact column solver if that keeps
            # happening
            inner_tol = max(inner_tol * 0.1, 1e-16)
            stalls += 1
            if stalls >= 3:
                careful = True

    if not converged:
        raise NoConvergence(sweeps, last_residuals)

    assembly_residual = float(np.abs(Theta - theta_fresh).max())
    return EstimateResult(
        theta_hat=theta_fresh,
        sigma_hat=W,
        sweeps_used=sweeps,
        converged=True,
        kkt=last_residuals,
        objective_trace=np.asarray(obj_trace),
        dual_objective_trace=np.asarray(dual_trace),
        assembly_residual=assembly_residual,
    )


def support_graph(theta, edge_tol: float = 0.0) -> list[tuple[int, int]]:
    """Edges (j, k), j < k, with theta_jk < -edge_tol, sorted."""
    a = as_symmetric(theta, "theta")
    p = a.shape[0]
    edges = []
    for j in range(p):
        for k in range(j + 1, p):
            if a[j, k] < -edge_tol:
                edges.append((j, k))
    return edges


def attractive_part(sigma_star, config: SolverConfig | None = None) -> EstimateResult:
    """Population projection onto M-matrices: the solver applied to Sigma*."""
    return estimate_mle(sigma_star, config)
