"""Command line interface: ``mtp2 estimate|loss|model|experiment``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import experiments, matrixio
from .losses import loss_report
from .mmle import DoesNotExist, NoConvergence, SolverConfig, estimate_mle, support_graph
from .models import ModelSpec, build_model
from .sampling import sample_covariance


def _cmd_estimate(args) -> int:
    if (args.input is None) == (args.data is None):
        print("estimate: provide exactly one of --input (matrix) or --data (data matrix)",
              file=sys.stderr)
        return 2
    if args.input is not None:
        s = matrixio.read_matrix_csv(args.input)
    else:
        s = sample_covariance(matrixio.read_data_csv(args.data))
    config = SolverConfig(
        kkt_tol=args.kkt_tol,
        max_sweeps=args.max_sweeps,
        inner_tol=args.inner_tol,
        inner_max_iter=args.inner_max_iter,
    )
    try:
        result = estimate_mle(s, config)
    except (DoesNotExist, NoConvergence) as exc:
        print(f"estimate failed: {exc}", file=sys.stderr)
        return 1
    payload = {
        "p": int(s.shape[0]),
        "theta_hat": result.theta_hat.ravel().tolist(),
        "sigma_hat": result.sigma_hat.ravel().tolist(),
        "kkt": dataclasses.asdict(result.kkt),
        "sweeps_used": result.sweeps_used,
        "converged": result.converged,
        "support_graph": [list(e) for e in support_graph(result.theta_hat, args.kkt_tol)],
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_loss(args) -> int:
    theta = matrixio.read_matrix_csv(args.theta)
    theta_star = matrixio.read_matrix_csv(args.theta_star)
    report = loss_report(theta, theta_star)
    text = json.dumps(dataclasses.asdict(report), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_model(args) -> int:
    spec = ModelSpec.from_json(args.spec)
    if args.seed is not None:
        spec = ModelSpec(kind=spec.kind, params={**spec.params, "seed": args.seed})
    theta = build_model(spec, p=args.p)
    matrixio.write_matrix_csv(args.out, theta)
    return 0


def _cmd_experiment(args) -> int:
    config = experiments.ExperimentConfig.from_json(Path(args.config).read_text())
    if config.kind != args.kind:
        print(f"experiment kind {args.kind!r} does not match config kind {config.kind!r}",
              file=sys.stderr)
        return 2
    if args.seed is not None:
        config = dataclasses.replace(config, base_seed=args.seed)
    report = experiments.run_experiment(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiments.write_cells_csv(report, out_dir / "cells.csv")
    experiments.write_summary_json(report, out_dir / "summary.json")
    experiments.write_run_meta(report, out_dir / "run_meta.json")
    for line in report.invariant_failures:
        print(f"invariant failure: {line}", file=sys.stderr)
    return 1 if report.invariant_failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtp2",
        description="Precision matrix estimation under nonnegative partial correlations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="solve the sign-constrained MLE for a covariance")
    est.add_argument("--input", help="dense-csv sample covariance matrix")
    est.add_argument("--data", help="dense-csv data matrix ('n p' header); S = X'X/n")
    est.add_argument("--kkt-tol", type=float, default=1e-7)
    est.add_argument("--max-sweeps", type=int, default=500)
    est.add_argument("--inner-tol", type=float, default=1e-10)
    est.add_argument("--inner-max-iter", type=int, default=None)
    est.add_argument("--out", help="result JSON path (stdout when omitted)")
    est.set_defaults(func=_cmd_estimate)

    loss = sub.add_parser("loss", help="all losses between two precision matrices")
    loss.add_argument("--theta", required=True)
    loss.add_argument("--theta-star", required=True)
    loss.add_argument("--out")
    loss.set_defaults(func=_cmd_loss)

    model = sub.add_parser("model", help="materialize a model spec to dense-csv")
    model.add_argument("--spec", required=True, help="ModelSpec JSON (see README)")
    model.add_argument("--p", type=int, default=None, help="dimension for dimension-free specs")
    model.add_argument("--seed", type=int, default=None, help="override the spec seed")
    model.add_argument("--out", required=True)
    model.set_defaults(func=_cmd_model)

    exp = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    exp.add_argument("kind", choices=experiments.KINDS)
    exp.add_argument("--config", required=True, help="ExperimentConfig JSON")
    exp.add_argument("--seed", type=int, default=None, help="override the config base seed")
    exp.add_argument("--out", required=True, help="report directory")
    exp.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
