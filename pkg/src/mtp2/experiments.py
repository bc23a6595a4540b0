"""Seeded Monte Carlo experiment runner.

Six experiment kinds, one per quantitative phenomenon of interest:

* ``rate``            loss decay of the constrained MLE in n at fixed p,
                      with a log-log rate fit.
* ``diag_adaptation`` 5th-percentile loss floor under diagonal truth
                      (does percentile * sqrt(n) stay bounded away from 0).
* ``spectral``        top-eigenvalue inflation of the estimated covariance
                      against the sample covariance and its positive part,
                      including the per-replication Perron-Frobenius chain.
* ``misspec``         convergence to the attractive part (the population
                      projection) when the truth has positive partial
                      correlations.
* ``diag_minimax``    Monte Carlo risk of the scaled diagonal estimator
                      c * D_S against its closed form.
* ``deviation``       tail frequency of the entrywise max deviation of S
                      against the Bernstein threshold.

Replication r of cell c draws from the Philox stream
``replication_seed(base_seed, c, r)``; results are reduced in replication
order, so reports are byte-identical across reruns.  Wall-clock times are
written to ``run_meta.json`` only, keeping ``cells.csv`` and ``summary.json``
deterministic.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from scipy.linalg import block_diag

from .losses import gamma, sym_stein_loss
from .matcore import cholesky, inverse_psd, positive_part
from .mmle import (
    DoesNotExist,
    EstimateResult,
    NoConvergence,
    SolverConfig,
    attractive_part,
    estimate_mle,
)
from .models import ModelSpec, build_model
from .sampling import bernstein_bound, max_deviation, replication_seed, sample_covariance, sample_gaussian

KINDS = ("rate", "diag_adaptation", "spectral", "misspec", "diag_minimax", "deviation")

# per-replication slack for the exact eigenvalue/row-sum chain checks
CHAIN_SLACK = 1e-8


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    cells: tuple[tuple[int, int], ...]  # (n, p) grid cells
    model: ModelSpec
    replications: int
    base_seed: int
    solver: SolverConfig = field(default_factory=SolverConfig)
    deviation_t: float = 4.0
    # diag_minimax scaling factors; None = (1, sqrt(n/(n-2))) per cell
    scale_factors: Optional[tuple[float, ...]] = None
    # misspec: copies of the covariance block embedded into I_p (None = fill)
    block_copies: Optional[int] = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        cells = tuple((int(n), int(p)) for n, p in self.cells)
        object.__setattr__(self, "cells", cells)
        for n, p in cells:
            if n < 2:
                raise ValueError(f"every cell needs n >= 2, got n={n}")
            if p < 1:
                raise ValueError(f"every cell needs p >= 1, got p={p}")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["model"] = {"kind": self.model.kind, **self.model.params}
        out["solver"] = dataclasses.asdict(self.solver)
        out["cells"] = [list(c) for c in self.cells]
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        model = obj.pop("model")
        spec = ModelSpec(kind=model.pop("kind"), params=model)
        solver = SolverConfig(**obj.pop("solver", {}))
        cells = tuple(tuple(c) for c in obj.pop("cells"))
        if "scale_factors" in obj and obj["scale_factors"] is not None:
            obj["scale_factors"] = tuple(obj["scale_factors"])
        return cls(cells=cells, model=spec, solver=solver, **obj)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class CellSummary:
    n: int
    p: int
    replications: int
    stats: dict[str, float]
    failures: list[dict] = field(default_factory=list)
    wall_time_s: float = 0.0  # reported in run_meta.json, not in cells.csv


@dataclass
class RateFit:
    slope: float
    intercept: float
    rss: float
    n_points: int


@dataclass
class ExperimentReport:
    kind: str
    config: ExperimentConfig
    cells: list[CellSummary]
    derived: dict[str, Any]
    invariant_failures: list[str]


def _summarize(name: str, values: list[float]) -> dict[str, float]:
    v = np.asarray(values, dtype=float)
    return {
        f"{name}_mean": float(v.mean()),
        f"{name}_std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
        f"{name}_q05": float(np.quantile(v, 0.05)),
        f"{name}_q50": float(np.quantile(v, 0.50)),
        f"{name}_q95": float(np.quantile(v, 0.95)),
    }


def _solve_replications(
    config: ExperimentConfig,
    cell_index: int,
    n: int,
    sigma_star: np.ndarray,
    on_result: Callable[[int, np.ndarray, EstimateResult], None],
    failures: list[dict],
) -> int:
    """Run the sampler + solver for every replication of one cell.

    Returns the number of KKT-certified solves; failures are itemized with
    their residuals, never silently dropped.
    """
    ok = 0
    for rep in range(config.replications):
        seed = replication_seed(config.base_seed, cell_index, rep)
        x = sample_gaussian(sigma_star, n, seed)
        s = sample_covariance(x)
        try:
            result = estimate_mle(s, config.solver)
        except (DoesNotExist, NoConvergence) as exc:
            record = {"replication": rep, "error": type(exc).__name__, "detail": str(exc)}
            if isinstance(exc, NoConvergence):
                record["residuals"] = dataclasses.asdict(exc.residuals)
            failures.append(record)
            continue
        ok += 1
        on_result(rep, s, result)
    return ok


def _fit_rate(cells: list[CellSummary], stat: str) -> Optional[RateFit]:
    pts = [(c.n, c.stats[stat]) for c in cells if c.stats.get(stat, 0.0) > 0.0]
    if len(pts) < 3:
        return None
    logn = np.log([n for n, _ in pts])
    logy = np.log([y for _, y in pts])
    slope, intercept = np.polyfit(logn, logy, 1)
    resid = logy - (slope * logn + intercept)
    return RateFit(float(slope), float(intercept), float(resid @ resid), len(pts))


def run_rate_experiment(config: ExperimentConfig) -> ExperimentReport:
    cells: list[CellSummary] = []
    invariant_failures: list[str] = []
    for ci, (n, p) in enumerate(config.cells):
        theta_star = build_model(config.model, p)
        sigma_star = inverse_psd(cholesky(theta_star))
        g = gamma(sigma_star)
        if not math.isfinite(g):
            raise ValueError(f"model has perfect correlation at p={p}; rate target undefined")
        t0 = time.perf_counter()
        losses: list[float] = []
        failures: list[dict] = []

        def on_result(rep, s, result, theta_star=theta_star):
            losses.append(sym_stein_loss(result.theta_hat, theta_star))

        ok = _solve_replications(config, ci, n, sigma_star, on_result, failures)
        stats = _summarize("loss", losses) if losses else {}
        stats["kkt_pass_rate"] = ok / config.replications
        cells.append(CellSummary(n, p, config.replications, stats, failures,
                                 time.perf_counter() - t0))
        for f in failures:
            invariant_failures.append(f"rate cell ({n},{p}) replication {f['replication']}: {f['error']}")
    fit = _fit_rate(cells, "loss_mean")
    derived: dict[str, Any] = {"rate_fit": dataclasses.asdict(fit) if fit else None}
    return ExperimentReport("rate", config, cells, derived, invariant_failures)


def run_diag_adaptation_experiment(config: ExperimentConfig) -> ExperimentReport:
    if config.model.kind != "diagonal":
        raise ValueError("diag_adaptation requires a diagonal model")
    for n, p in config.cells:
        if p < math.sqrt(n):
            raise ValueError(
                f"cell (n={n}, p={p}) outside the p >= sqrt(n) regime of the loss floor"
            )
    cells: list[CellSummary] = []
    invariant_failures: list[str] = []
    for ci, (n, p) in enumerate(config.cells):
        theta_star = build_model(config.model, p)
        sigma_star = inverse_psd(cholesky(theta_star))
        t0 = time.perf_counter()
        losses: list[float] = []
        failures: list[dict] = []

        def on_result(rep, s, result, theta_star=theta_star):
            losses.append(sym_stein_loss(result.theta_hat, theta_star))

        ok = _solve_replications(config, ci, n, sigma_star, on_result, failures)
        stats = _summarize("loss", losses) if losses else {}
        stats["loss_q05_sqrt_n"] = stats.get("loss_q05", 0.0) * math.sqrt(n)
        stats["kkt_pass_rate"] = ok / config.replications
        cells.append(CellSummary(n, p, config.replications, stats, failures,
                                 time.perf_counter() - t0))
        for f in failures:
            invariant_failures.append(
                f"diag_adaptation cell ({n},{p}) replication {f['replication']}: {f['error']}"
            )
    floors = [c.stats["loss_q05_sqrt_n"] for c in cells if "loss_q05_sqrt_n" in c.stats]
    ratio = max(floors) / min(floors) if floors and min(floors) > 0 else math.inf
    derived = {
        "floor_values": floors,
        "floor_max_over_min": ratio,
        "floor_bounded_factor_3": bool(ratio <= 3.0),
    }
    return ExperimentReport("diag_adaptation", config, cells, derived, invariant_failures)


def run_spectral_experiment(config: ExperimentConfig) -> ExperimentReport:
    cells: list[CellSummary] = []
    invariant_failures: list[str] = []
    for ci, (n, p) in enumerate(config.cells):
        theta_star = build_model(config.model, p)
        if not np.array_equal(theta_star, np.eye(p)):
            raise ValueError("spectral experiment requires the identity model")
        sigma_star = np.eye(p)
        t0 = time.perf_counter()
        lmax_sig: list[float] = []
        lmax_s: list[float] = []
        lmax_spos: list[float] = []
        min_colsum: list[float] = []
        chain_ok: list[bool] = []
        failures: list[dict] = []

        def on_result(rep, s, result):
            spos = positive_part(s)
            top_sig = float(np.linalg.eigvalsh(result.sigma_hat)[-1])
            top_s = float(np.linalg.eigvalsh(s)[-1])
            top_spos = float(np.linalg.eigvalsh(spos)[-1])
            colsum = float(spos.sum(axis=0).min())
            ok = (top_sig >= top_spos - CHAIN_SLACK) and (top_spos >= colsum - CHAIN_SLACK)
            lmax_sig.append(top_sig)
            lmax_s.append(top_s)
            lmax_spos.append(top_spos)
            min_colsum.append(colsum)
            chain_ok.append(ok)
            if not ok:
                invariant_failures.append(
                    f"spectral chain violated at cell ({n},{p}) replication {rep}: "
                    f"{top_sig} >= {top_spos} >= {colsum}"
                )

        ok_count = _solve_replications(config, ci, n, sigma_star, on_result, failures)
        stats: dict[str, float] = {}
        if lmax_sig:
            stats.update(_summarize("lmax_sigma_hat", lmax_sig))
            stats.update(_summarize("lmax_s", lmax_s))
            stats["lmax_s_pos_mean"] = float(np.mean(lmax_spos))
            stats["min_colsum_s_pos_mean"] = float(np.mean(min_colsum))
            stats["chain_ok_rate"] = float(np.mean(chain_ok))
        stats["kkt_pass_rate"] = ok_count / config.replications
        cells.append(CellSummary(n, p, config.replications, stats, failures,
                                 time.perf_counter() - t0))
        for f in failures:
            invariant_failures.append(
                f"spectral cell ({n},{p}) replication {f['replication']}: {f['error']}"
            )
    excess = [(c.n, c.stats.get("lmax_sigma_hat_mean", math.nan) - 1.0) for c in cells]
    growth = excess[-1][1] / excess[0][1] if len(excess) >= 2 and excess[0][1] > 0 else math.nan
    derived = {
        "lmax_excess_by_cell": excess,
        "excess_growth_last_over_first": growth,
    }
    return ExperimentReport("spectral", config, cells, derived, invariant_failures)


def misspec_covariance(config: ExperimentConfig, p: int) -> np.ndarray:
    """Embed copies of the model (read on the covariance side) into I_p."""
    block = build_model(config.model)
    m = block.shape[0]
    copies = config.block_copies if config.block_copies is not None else p // m
    if copies < 1 or copies * m > p:
        raise ValueError(f"{copies} blocks of size {m} do not fit into p={p}")
    parts = [block] * copies
    rest = p - copies * m
    if rest:
        parts.append(np.eye(rest))
    return block_diag(*parts)


def run_misspec_experiment(config: ExperimentConfig) -> ExperimentReport:
    cells: list[CellSummary] = []
    invariant_failures: list[str] = []
    for ci, (n, p) in enumerate(config.cells):
        sigma_star = misspec_covariance(config, p)
        theta_star = inverse_psd(cholesky(sigma_star))
        theta_target = attractive_part(sigma_star, config.solver).theta_hat
        t0 = time.perf_counter()
        loss_target: list[float] = []
        loss_truth: list[float] = []
        failures: list[dict] = []

        def on_result(rep, s, result, theta_target=theta_target, theta_star=theta_star):
            loss_target.append(sym_stein_loss(result.theta_hat, theta_target))
            loss_truth.append(sym_stein_loss(result.theta_hat, theta_star))

        ok = _solve_replications(config, ci, n, sigma_star, on_result, failures)
        stats: dict[str, float] = {}
        if loss_target:
            stats.update(_summarize("loss_vs_target", loss_target))
            stats.update(_summarize("loss_vs_truth", loss_truth))
        stats["kkt_pass_rate"] = ok / config.replications
        cells.append(CellSummary(n, p, config.replications, stats, failures,
                                 time.perf_counter() - t0))
        for f in failures:
            invariant_failures.append(
                f"misspec cell ({n},{p}) replication {f['replication']}: {f['error']}"
            )
    tgt = [c.stats.get("loss_vs_target_mean", math.nan) for c in cells]
    tru = [c.stats.get("loss_vs_truth_mean", math.nan) for c in cells]
    derived = {
        "target_loss_by_cell": tgt,
        "truth_loss_by_cell": tru,
        "target_decay_first_over_last": (tgt[0] / tgt[-1]) if len(tgt) >= 2 and tgt[-1] > 0 else math.nan,
        "truth_relative_span": (max(tru) - min(tru)) / min(tru) if tru and min(tru) > 0 else math.nan,
    }
    return ExperimentReport("misspec", config, cells, derived, invariant_failures)


def run_diag_minimax_check(config: ExperimentConfig) -> ExperimentReport:
    """Monte Carlo risk of c * D_S versus the closed form (1/2)(n/((n-2)c) + c - 2)."""
    if config.model.kind != "diagonal":
        raise ValueError("diag_minimax requires a diagonal model")
    cells: list[CellSummary] = []
    invariant_failures: list[str] = []
    for ci, (n, p) in enumerate(config.cells):
        if n <= 2:
            raise ValueError("diag_minimax needs n > 2 for a finite closed form")
        theta_star = build_model(config.model, p)
        sigma_star = inverse_psd(cholesky(theta_star))
        factors = config.scale_factors or (1.0, math.sqrt(n / (n - 2)))
        t0 = time.perf_counter()
        per_factor: list[list[float]] = [[] for _ in factors]
        for rep in range(config.replications):
            seed = replication_seed(config.base_seed, ci, rep)
            x = sample_gaussian(sigma_star, n, seed)
            s = sample_covariance(x)
            diag_s = np.diag(s)
            for fi, c in enumerate(factors):
                theta_est = np.diag(1.0 / (c * diag_s))
                per_factor[fi].append(sym_stein_loss(theta_est, theta_star))
        stats: dict[str, float] = {}
        for fi, c in enumerate(factors, start=1):
            v = np.asarray(per_factor[fi - 1])
            mc = float(v.mean())
            se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
            closed = 0.5 * ((1.0 / c) * n / (n - 2) + c - 2.0)
            ok = abs(mc - closed) <= 3.0 * se
            stats[f"c{fi}_value"] = float(c)
            stats[f"c{fi}_risk_mc"] = mc
            stats[f"c{fi}_risk_se"] = se
            stats[f"c{fi}_risk_closed"] = closed
            stats[f"c{fi}_within_3se"] = float(ok)
            if not ok:
                invariant_failures.append(
                    f"diag_minimax cell ({n},{p}) c={c}: MC {mc} vs closed {closed} (SE {se})"
                )
        cells.append(CellSummary(n, p, config.replications, stats, [],
                                 time.perf_counter() - t0))
    derived = {"all_within_3se": not invariant_failures}
    return ExperimentReport("diag_minimax", config, cells, derived, invariant_failures)


def run_deviation_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Exceedance frequency of the Bernstein threshold for max |S - Sigma*|."""
    t = config.deviation_t
    cells: list[CellSummary] = []
    invariant_failures: list[str] = []
    for ci, (n, p) in enumerate(config.cells):
        theta_star = build_model(config.model, p)
        sigma_star = inverse_psd(cholesky(theta_star))
        sup_entry = float(np.abs(sigma_star).max())
        threshold = bernstein_bound(p, n, t, sup_entry)
        t0 = time.perf_counter()
        exceed = 0
        for rep in range(config.replications):
            seed = replication_seed(config.base_seed, ci, rep)
            x = sample_gaussian(sigma_star, n, seed)
            s = sample_covariance(x)
            if max_deviation(s, sigma_star) > threshold:
                exceed += 1
        reps = config.replications
        bound_prob = 2.0 / p ** (t - 2.0)
        se = math.sqrt(bound_prob * (1.0 - bound_prob) / reps)
        freq = exceed / reps
        ok = freq <= bound_prob + 3.0 * se
        stats = {
            "threshold": threshold,
            "exceed_count": float(exceed),
            "exceed_freq": freq,
            "bound_prob": bound_prob,
            "freq_se": se,
            "within_3se": float(ok),
        }
        if not ok:
            invariant_failures.append(
                f"deviation cell ({n},{p}): frequency {freq} above {bound_prob} + 3*{se}"
            )
        cells.append(CellSummary(n, p, config.replications, stats, [],
                                 time.perf_counter() - t0))
    derived = {"all_within_3se": not invariant_failures}
    return ExperimentReport("deviation", config, cells, derived, invariant_failures)


_RUNNERS = {
    "rate": run_rate_experiment,
    "diag_adaptation": run_diag_adaptation_experiment,
    "spectral": run_spectral_experiment,
    "misspec": run_misspec_experiment,
    "diag_minimax": run_diag_minimax_check,
    "deviation": run_deviation_experiment,
}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    return _RUNNERS[config.kind](config)


# ---------------------------------------------------------------------------
# report serialization


def _csv_columns(report: ExperimentReport) -> list[str]:
    cols: list[str] = []
    for cell in report.cells:
        for key in cell.stats:
            if key not in cols:
                cols.append(key)
    return cols


def write_cells_csv(report: ExperimentReport, path) -> None:
    cols = _csv_columns(report)
    with open(path, "w") as fh:
        fh.write(",".join(["n", "p", "replications", "failures"] + cols) + "\n")
        for cell in report.cells:
            row = [str(cell.n), str(cell.p), str(cell.replications), str(len(cell.failures))]
            row += [repr(float(cell.stats.get(c, math.nan))) for c in cols]
            fh.write(",".join(row) + "\n")


def write_summary_json(report: ExperimentReport, path) -> None:
    payload = {
        "kind": report.kind,
        "config": report.config.to_dict(),
        "cells": [
            {
                "n": c.n,
                "p": c.p,
                "replications": c.replications,
                "stats": c.stats,
                "failures": c.failures,
            }
            for c in report.cells
        ],
        "derived": report.derived,
        "invariant_failures": report.invariant_failures,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_run_meta(report: ExperimentReport, path) -> None:
    payload = {
        "kind": report.kind,
        "wall_time_s_by_cell": {f"{c.n}x{c.p}": c.wall_time_s for c in report.cells},
        "wall_time_s_total": sum(c.wall_time_s for c in report.cells),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
