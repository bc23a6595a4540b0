#!/usr/bin/env python3
"""Loss decay in n at fixed p, with a log-log rate fit.

Writes cells.csv / summary.json / run_meta.json under --out.
"""

import argparse
from pathlib import Path

from mtp2.experiments import (
    ExperimentConfig,
    run_rate_experiment,
    write_cells_csv,
    write_run_meta,
    write_summary_json,
)
from mtp2.models import ModelSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=200)
    ap.add_argument("--n-grid", type=int, nargs="+", default=[25, 50, 100, 200, 400])
    ap.add_argument("--replications", type=int, default=20)
    ap.add_argument("--seed", type=int, default=20240817)
    ap.add_argument("--out", default="reports/rate")
    args = ap.parse_args()

    config = ExperimentConfig(
        kind="rate",
        cells=tuple((n, args.p) for n in args.n_grid),
        model=ModelSpec("diagonal", {"value": 1.0}),
        replications=args.replications,
        base_seed=args.seed,
    )
    report = run_rate_experiment(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_cells_csv(report, out / "cells.csv")
    write_summary_json(report, out / "summary.json")
    write_run_meta(report, out / "run_meta.json")
    fit = report.derived["rate_fit"]
    print(f"fitted slope of log E[loss] vs log n: {fit['slope']:.4f}")
    print(f"reports in {out}/")


if __name__ == "__main__":
    main()
