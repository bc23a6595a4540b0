import json
import math

import numpy as np
import pytest

from mtp2.experiments import (
    ExperimentConfig,
    misspec_covariance,
    run_deviation_experiment,
    run_diag_adaptation_experiment,
    run_diag_minimax_check,
    run_experiment,
    run_misspec_experiment,
    run_rate_experiment,
    run_spectral_experiment,
    write_cells_csv,
    write_run_meta,
    write_summary_json,
)
from mtp2.models import ModelSpec

IDENTITY = ModelSpec("diagonal", {"value": 1.0})


def tiny_config(kind, **kw):
    defaults = dict(
        kind=kind,
        cells=((12, 6), (24, 6)),
        model=IDENTITY,
        replications=3,
        base_seed=314,
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestConfig:
    def test_json_round_trip(self):
        cfg = tiny_config("rate")
        again = ExperimentConfig.from_json(json.dumps(cfg.to_dict()))
        assert again == cfg

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            tiny_config("bootstrap")

    def test_rejects_single_sample(self):
        with pytest.raises(ValueError):
            tiny_config("rate", cells=((1, 4),))

    def test_rejects_zero_replications(self):
        with pytest.raises(ValueError):
            tiny_config("rate", replications=0)


class TestRate:
    def test_runs_and_fits(self):
        cfg = tiny_config("rate", cells=((10, 5), (20, 5), (40, 5)), replications=4)
        report = run_rate_experiment(cfg)
        assert len(report.cells) == 3
        assert all(c.stats["kkt_pass_rate"] == 1.0 for c in report.cells)
        fit = report.derived["rate_fit"]
        assert fit is not None and fit["n_points"] == 3
        assert fit["slope"] < 0.0

    def test_loss_decreases_with_n(self):
        cfg = tiny_config("rate", cells=((20, 8), (160, 8)), replications=5)
        report = run_rate_experiment(cfg)
        assert report.cells[0].stats["loss_mean"] > report.cells[1].stats["loss_mean"]

    def test_no_fit_with_two_cells(self):
        report = run_rate_experiment(tiny_config("rate"))
        assert report.derived["rate_fit"] is None


class TestDiagAdaptation:
    def test_requires_diagonal_model(self):
        cfg = tiny_config("diag_adaptation", model=ModelSpec("equicorrelation", {"x": -0.1}))
        with pytest.raises(ValueError):
            run_diag_adaptation_experiment(cfg)

    def test_requires_floor_regime(self):
        cfg = tiny_config("diag_adaptation", cells=((100, 4),))
        with pytest.raises(ValueError):
            run_diag_adaptation_experiment(cfg)

    def test_scale_invariance_of_losses(self):
        # diagonal truth with the same seeds gives identical losses to 1e-8
        base = tiny_config("diag_adaptation", cells=((16, 6), (36, 6)), replications=4)
        scaled = tiny_config(
            "diag_adaptation",
            cells=((16, 6), (36, 6)),
            replications=4,
            model=ModelSpec("diagonal", {"d": [0.2, 4.0, 1.0, 9.0, 0.5, 2.5]}),
        )
        rep_a = run_diag_adaptation_experiment(base)
        rep_b = run_diag_adaptation_experiment(scaled)
        for ca, cb in zip(rep_a.cells, rep_b.cells):
            assert ca.stats["loss_mean"] == pytest.approx(cb.stats["loss_mean"], abs=1e-8)
            assert ca.stats["loss_q05"] == pytest.approx(cb.stats["loss_q05"], abs=1e-8)

    def test_smoke_cell(self):
        report = run_diag_adaptation_experiment(
            tiny_config("diag_adaptation", cells=((4, 2),), replications=3)
        )
        assert report.cells[0].stats["kkt_pass_rate"] == 1.0
        assert math.isfinite(report.cells[0].stats["loss_q05_sqrt_n"])

    def test_floor_bounded_across_cells(self):
        # the 5th-percentile loss floor in units of 1/sqrt(n) stays within a
        # factor 3 along a p = n path
        cfg = tiny_config(
            "diag_adaptation", cells=((49, 49), (100, 100)), replications=8
        )
        report = run_diag_adaptation_experiment(cfg)
        assert report.derived["floor_bounded_factor_3"]


class TestSpectral:
    def test_requires_identity(self):
        cfg = tiny_config("spectral", model=ModelSpec("diagonal", {"value": 2.0}))
        with pytest.raises(ValueError):
            run_spectral_experiment(cfg)

    def test_chain_holds(self):
        report = run_spectral_experiment(
            tiny_config("spectral", cells=((20, 20),), replications=4)
        )
        cell = report.cells[0]
        assert cell.stats["chain_ok_rate"] == 1.0
        assert not report.invariant_failures
        assert cell.stats["lmax_sigma_hat_mean"] >= cell.stats["lmax_s_pos_mean"] - 1e-8


class TestMisspec:
    def test_block_embedding(self):
        cfg = tiny_config(
            "misspec", model=ModelSpec("equicorrelation", {"p": 2, "x": -0.5})
        )
        sigma = misspec_covariance(cfg, 6)
        expected = np.eye(6)
        expected[0, 1] = expected[1, 0] = -0.5
        assert np.array_equal(sigma, expected)

    def test_block_fill(self):
        cfg = tiny_config(
            "misspec",
            model=ModelSpec("equicorrelation", {"p": 2, "x": -0.5}),
            block_copies=None,
        )
        sigma = misspec_covariance(cfg, 6)
        assert np.count_nonzero(sigma) == 6 + 6  # diagonal plus three blocks

    def test_rejects_oversized_blocks(self):
        cfg = tiny_config(
            "misspec", model=ModelSpec("equicorrelation", {"p": 8, "x": -0.1})
        )
        with pytest.raises(ValueError):
            misspec_covariance(cfg, 6)

    def test_target_loss_tracks_attractive_part(self):
        cfg = tiny_config(
            "misspec",
            cells=((40, 6), (160, 6)),
            replications=4,
            model=ModelSpec("equicorrelation", {"p": 2, "x": -0.5}),
        )
        report = run_misspec_experiment(cfg)
        tgt = [c.stats["loss_vs_target_mean"] for c in report.cells]
        tru = [c.stats["loss_vs_truth_mean"] for c in report.cells]
        assert tgt[1] < tgt[0]
        assert all(t > 0 for t in tru)

    def test_well_specified_curves_coincide(self):
        # positive-correlation covariance block: the truth is already an
        # M-matrix, so the attractive part equals the truth
        cfg = tiny_config(
            "misspec",
            cells=((30, 5),),
            replications=3,
            model=ModelSpec("equicorrelation", {"p": 2, "x": 0.5}),
        )
        report = run_misspec_experiment(cfg)
        cell = report.cells[0]
        assert cell.stats["loss_vs_target_mean"] == pytest.approx(
            cell.stats["loss_vs_truth_mean"], abs=1e-5
        )


class TestDiagMinimax:
    def test_matches_closed_form(self):
        cfg = tiny_config(
            "diag_minimax", cells=((50, 4),), replications=2000, base_seed=99
        )
        report = run_diag_minimax_check(cfg)
        stats = report.cells[0].stats
        n = 50
        assert stats["c1_risk_closed"] == pytest.approx(0.5 * (n / (n - 2) - 1.0))
        assert stats["c2_value"] == pytest.approx(math.sqrt(n / (n - 2)))
        assert stats["c2_risk_closed"] == pytest.approx(math.sqrt(n / (n - 2)) - 1.0)
        assert stats["c1_within_3se"] == 1.0 and stats["c2_within_3se"] == 1.0
        assert not report.invariant_failures

    def test_requires_n_above_two(self):
        with pytest.raises(ValueError):
            run_diag_minimax_check(tiny_config("diag_minimax", cells=((2, 3),)))


class TestDeviation:
    def test_within_bound(self):
        report = run_deviation_experiment(
            tiny_config("deviation", cells=((100, 20),), replications=50)
        )
        stats = report.cells[0].stats
        assert stats["within_3se"] == 1.0
        assert stats["exceed_freq"] <= stats["bound_prob"] + 3 * stats["freq_se"]

    def test_loose_threshold_never_exceeded(self):
        cfg = tiny_config(
            "deviation", cells=((100, 20),), replications=50, deviation_t=10.0
        )
        report = run_deviation_experiment(cfg)
        assert report.cells[0].stats["exceed_count"] == 0.0


class TestReports:
    def test_byte_identical_reruns(self, tmp_path):
        cfg = tiny_config("rate", cells=((10, 5), (20, 5), (40, 5)), replications=2)
        for tag in ("a", "b"):
            report = run_experiment(cfg)
            write_cells_csv(report, tmp_path / f"cells_{tag}.csv")
            write_summary_json(report, tmp_path / f"summary_{tag}.json")
            write_run_meta(report, tmp_path / f"meta_{tag}.json")
        assert (tmp_path / "cells_a.csv").read_bytes() == (tmp_path / "cells_b.csv").read_bytes()
        assert (
            tmp_path / "summary_a.json"
        ).read_bytes() == (tmp_path / "summary_b.json").read_bytes()

    def test_csv_schema(self, tmp_path):
        report = run_experiment(tiny_config("rate", replications=2))
        path = tmp_path / "cells.csv"
        write_cells_csv(report, path)
        header = path.read_text().splitlines()[0]
        assert header == (
            "n,p,replications,failures,loss_mean,loss_std,loss_q05,loss_q50,"
            "loss_q95,kkt_pass_rate"
        )

    def test_summary_contains_config_and_derived(self, tmp_path):
        report = run_experiment(tiny_config("rate", replications=2))
        path = tmp_path / "summary.json"
        write_summary_json(report, path)
        payload = json.loads(path.read_text())
        assert payload["kind"] == "rate"
        assert payload["config"]["replications"] == 2
        assert "rate_fit" in payload["derived"]
        assert payload["invariant_failures"] == []
