"""Ground-truth precision matrix generators.

Four families:

* ``diagonal``: positive diagonal matrices.
* ``equicorrelation``: unit diagonal with every off-diagonal equal to x,
  PSD for x in [-1/(p-1), 1] and an M-matrix for x in [-1/(p-1), 0].
* ``cai_block``: two-block identity perturbed by a sparse binary coupling
  eps * A (eps < 0, k entries per row of A, at most 2k per column), a
  diagonally dominant M-matrix with spectrum inside [0, 2].
* ``random_laplacian``: weighted Erdos-Renyi graph Laplacian plus delta * I,
  always an SPD M-matrix.

``ModelSpec`` is the declarative description used by the CLI and the
experiment harness; ``build_model`` materializes it at a given dimension.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .losses import gamma
from .matcore import cholesky, inverse_psd
from .sampling import philox_stream

KINDS = ("diagonal", "equicorrelation", "cai_block", "random_laplacian")

# attempts at drawing an admissible sparse coupling pattern before giving up
_PATTERN_ATTEMPTS = 1000


class NonpositiveEntry(ValueError):
    pass


class OutOfPsdRange(ValueError):
    pass


class InvalidEps(ValueError):
    pass


class InfeasiblePattern(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Declarative model description: a kind plus its parameters.

    Parameters by kind (see README for the JSON schema):

    * diagonal: ``d`` (explicit vector) or ``value`` (constant, broadcast to
      the requested dimension).
    * equicorrelation: ``x``, optional ``p``.
    * cai_block: ``k``, ``eps``, optional ``p``, ``b`` (0/1 vector), ``seed``.
    * random_laplacian: ``edge_prob``, ``weight_lo``, ``weight_hi``,
      ``delta``, optional ``p``, ``seed``.

    A spec without an intrinsic dimension is materialized at the dimension
    passed to ``build_model`` (experiment cells do this per grid point).
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, **self.params})

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        obj = json.loads(text)
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ValueError("model spec JSON must be an object with a 'kind' field")
        kind = obj.pop("kind")
        return cls(kind=kind, params=obj)


def diagonal_model(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim != 1 or d.size < 1:
        raise ValueError("diagonal model needs a 1-d vector of entries")
    if np.any(d <= 0.0):
        raise NonpositiveEntry(f"diagonal entries must be > 0, min is {d.min()}")
    return np.diag(d)


def equicorrelation(p: int, x: float) -> np.ndarray:
    """Unit diagonal, every off-diagonal equal to x.

    Eigenvalues are 1 - x (multiplicity p - 1) and 1 + (p-1) x, so the PSD
    range is the closed interval [-1/(p-1), 1]; the boundary x = -1/(p-1),
    where the elementwise l1 norm equals twice the trace, is allowed.
    """
    if p < 2:
        raise ValueError("equicorrelation needs p >= 2")
    lo = -1.0 / (p - 1)
    if x < lo - 1e-12 or x > 1.0 + 1e-12:
        raise OutOfPsdRange(f"x = {x} outside the PSD range [{lo}, 1]")
    a = np.full((p, p), float(x))
    np.fill_diagonal(a, 1.0)
    return a


def _draw_pattern(rows: int, cols: int, k: int, rng: np.random.Generator) -> Optional[np.ndarray]:
    """One attempt at a binary rows x cols matrix with exactly k ones per row
    and at most 2k per column; None when the draw cannot be repaired."""
    a = np.zeros((rows, cols), dtype=np.int64)
    col_count = np.zeros(cols, dtype=np.int64)
    cap = 2 * k
    for r in range(rows):
        open_cols = np.flatnonzero(col_count < cap)
        if open_cols.size < k:
            return None
        picked = rng.choice(open_cols, size=k, replace=False)
        a[r, picked] = 1
        col_count[picked] += 1
    return a


def cai_block(p: int, k: int, eps: float, b=None, seed: int = 0) -> np.ndarray:
    """Two-block identity with sparse off-block coupling eps * ((b x e) o A).

    A is drawn uniformly (seeded, with rejection) from binary matrices having
    exactly k ones per row and at most 2k per column; rows with b_j = 0 are
    zeroed.  Requires eps < 0 and 2 k |eps| < 1, which makes the result a
    diagonally dominant M-matrix.
    """
    if p < 2:
        raise ValueError("cai_block needs p >= 2")
    if eps >= 0.0:
        raise InvalidEps(f"eps must be negative, got {eps}")
    if 2 * k * abs(eps) >= 1.0:
        raise InvalidEps(f"need 2*k*|eps| < 1, got {2 * k * abs(eps)}")
    rows, cols = (p + 1) // 2, p // 2
    if k < 1 or k > cols:
        raise InfeasiblePattern(f"k = {k} not drawable with {cols} columns")
    rng = philox_stream(seed)
    a = None
    for _ in range(_PATTERN_ATTEMPTS):
        a = _draw_pattern(rows, cols, k, rng)
        if a is not None:
            break
    if a is None:
        raise InfeasiblePattern(
            f"no admissible pattern after {_PATTERN_ATTEMPTS} attempts (p={p}, k={k})"
        )
    if b is None:
        b = np.ones(rows, dtype=np.int64)
    else:
        b = np.asarray(b)
        if b.shape != (rows,) or not np.isin(b, (0, 1)).all():
            raise ValueError(f"b must be a 0/1 vector of length {rows}")
    return assemble_cai_block(a * b[:, None], eps, p)


def assemble_cai_block(pattern: np.ndarray, eps: float, p: int) -> np.ndarray:
    """Assemble [[I, eps*A'], [eps*A'.T, I]] from an explicit 0/1 pattern."""
    rows, cols = (p + 1) // 2, p // 2
    pattern = np.asarray(pattern, dtype=float)
    if pattern.shape != (rows, cols):
        raise ValueError(f"pattern must be {rows} x {cols}, got {pattern.shape}")
    theta = np.eye(p)
    theta[:rows, rows:] = eps * pattern
    theta[rows:, :rows] = eps * pattern.T
    return theta


def neumann_correlation_bound(theta, k: int, eps: float) -> tuple[float, float, bool]:
    """Max off-diagonal correlation of Theta^-1 against 2k|eps|/(1-(2k eps)^2).

    Returns (max_corr, bound, holds).
    """
    if 2 * k * abs(eps) >= 1.0:
        raise InvalidEps(f"need 2*k*|eps| < 1, got {2 * k * abs(eps)}")
    sigma = inverse_psd(cholesky(np.asarray(theta, dtype=float)))
    p = sigma.shape[0]
    if p == 1:
        max_corr = 0.0
    else:
        inv_sq = 1.0 / np.sqrt(np.diag(sigma))
        r = sigma * np.outer(inv_sq, inv_sq)
        np.fill_diagonal(r, -np.inf)
        max_corr = float(r.max())
    bound = 2 * k * abs(eps) / (1.0 - (2 * k * eps) ** 2)
    return max_corr, bound, max_corr <= bound + 1e-10


def random_laplacian_mmatrix(
    p: int,
    edge_prob: float,
    weight_lo: float,
    weight_hi: float,
    delta: float = 1.0,
    seed: int = 0,
) -> np.ndarray:
    """Weighted Erdos-Renyi graph Laplacian plus delta * I.

    Row sums of the off-diagonal magnitudes equal diagonal - delta, so the
    result is always a strictly diagonally dominant SPD M-matrix.
    """
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError(f"edge_prob must be in [0, 1], got {edge_prob}")
    if not 0.0 < weight_lo <= weight_hi:
        raise ValueError(f"need 0 < weight_lo <= weight_hi, got ({weight_lo}, {weight_hi})")
    if delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {delta}")
    rng = philox_stream(seed)
    upper = np.triu(rng.random((p, p)) < edge_prob, k=1)
    weights = rng.uniform(weight_lo, weight_hi, size=(p, p))
    adj = np.where(upper, weights, 0.0)
    adj = adj + adj.T
    lap = np.diag(adj.sum(axis=1)) - adj
    return lap + delta * np.eye(p)


def build_model(spec: ModelSpec, p: Optional[int] = None) -> np.ndarray:
    """Materialize a ModelSpec, resolving the dimension against ``p``.

    A dimension carried by the spec must agree with an explicitly requested
    one; specs without an intrinsic dimension require ``p``.
    """
    prm = spec.params

    def resolve_dim(intrinsic: Optional[int]) -> int:
        if intrinsic is not None and p is not None and intrinsic != p:
            raise ValueError(f"model dimension {intrinsic} != requested {p}")
        dim = intrinsic if intrinsic is not None else p
        if dim is None:
            raise ValueError(f"model kind {spec.kind!r} needs a dimension")
        return int(dim)

    if spec.kind == "diagonal":
        if "d" in prm:
            d = np.asarray(prm["d"], dtype=float)
            resolve_dim(d.size)
            return diagonal_model(d)
        value = float(prm.get("value", 1.0))
        return diagonal_model(np.full(resolve_dim(None), value))
    if spec.kind == "equicorrelation":
        return equicorrelation(resolve_dim(prm.get("p")), float(prm["x"]))
    if spec.kind == "cai_block":
        return cai_block(
            resolve_dim(prm.get("p")),
            int(prm["k"]),
            float(prm["eps"]),
            b=prm.get("b"),
            seed=int(prm.get("seed", 0)),
        )
    if spec.kind == "random_laplacian":
        return random_laplacian_mmatrix(
            resolve_dim(prm.get("p")),
            float(prm["edge_prob"]),
            float(prm["weight_lo"]),
            float(prm["weight_hi"]),
            delta=float(prm.get("delta", 1.0)),
            seed=int(prm.get("seed", 0)),
        )
    raise ValueError(f"unknown model kind {spec.kind!r}")


def gamma_of_model(spec: ModelSpec, p: Optional[int] = None) -> float:
    """Correlation gap of the covariance implied by the model's precision."""
    theta = build_model(spec, p)
    return gamma(inverse_psd(cholesky(theta)))
