"""Experiment harness: statistics, sweeps, CSV emission, determinism."""

import math
from dataclasses import replace

import numpy as np
import pytest

from seqloc import (
    EmptyInput,
    default_scenario,
    default_spec,
    empirical_rmse,
    error_cdf,
    rmse_standard_error,
    run_experiment,
    run_monte_carlo,
    write_experiment,
    EstimatorSpec,
    ExperimentSpec,
)
from seqloc.experiments import point_seed
from seqloc.simulate import with_seed


class TestEmpiricalRmse:
    def test_single_vector(self):
        result = empirical_rmse([(3.0, 4.0)])
        assert result.rmse == pytest.approx(5.0)

    def test_symmetric_pair(self):
        result = empirical_rmse([(1.0, 0.0), (-1.0, 0.0)])
        assert result.rmse == pytest.approx(1.0)
        assert result.per_axis == pytest.approx((1.0, 0.0))

    def test_gaussian_oracle(self):
        # chi-distributed norms: RMSE of N(0, s^2 I_2) is s*sqrt(2)
        rng = np.random.default_rng(17)
        draws = rng.normal(0.0, 0.1, size=(1000, 2))
        result = empirical_rmse(draws)
        assert abs(result.rmse / (0.1 * math.sqrt(2.0)) - 1.0) < 0.05

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            empirical_rmse([])

    def test_standard_error_shrinks(self):
        rng = np.random.default_rng(3)
        small = rmse_standard_error(rng.normal(0, 1, size=(100, 2)))
        large = rmse_standard_error(rng.normal(0, 1, size=(10000, 2)))
        assert large < small


class TestErrorCdf:
    def test_basic(self):
        assert error_cdf([2.0, 1.0, 3.0]) == [
            (1.0, pytest.approx(1 / 3)),
            (2.0, pytest.approx(2 / 3)),
            (3.0, pytest.approx(1.0))]

    def test_constant_list(self):
        assert error_cdf([5.0, 5.0]) == [(5.0, 1.0)]

    def test_final_fraction_is_one(self):
        rng = np.random.default_rng(9)
        pairs = error_cdf(rng.uniform(0, 1, 500))
        assert pairs[-1][1] == pytest.approx(1.0)
        fractions = [f for _, f in pairs]
        assert all(b > a for a, b in zip(fractions, fractions[1:]))

    def test_uniform_oracle(self):
        rng = np.random.default_rng(23)
        pairs = error_cdf(rng.uniform(0, 1, 10_000))
        kolmogorov = max(abs(value - frac) for value, frac in pairs)
        assert kolmogorov < 0.02

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            error_cdf([])


class TestSpecs:
    def test_known_names_only(self):
        with pytest.raises(Exception):
            default_spec("unknown-study")

    def test_grid_must_increase(self):
        with pytest.raises(Exception):
            ExperimentSpec(name="speed-sweep", grid=(1.0, 1.0),
                           estimators=("kvd",))


def tiny(name, trials=60, seed=99, **spec_overrides):
    cfg = default_scenario(name, seed=seed, trials=trials)
    if name == "circular":
        cfg = replace(cfg, n_trials=trials)
    spec = default_spec(name, **spec_overrides)
    return spec, cfg


class TestRunExperiment:
    def test_stationary_noise_table(self):
        spec, cfg = tiny("stationary-noise",
                         grid=(0.1, 1.0))
        result = run_experiment(spec, cfg)
        assert len(result.rows) == 4  # 2 sigmas x (kvd, d)
        by_est = {}
        for row in result.rows:
            by_est.setdefault(row.estimator, []).append(row)
        # stationary: drift-only is definitionally the same solver
        for kvd_row, d_row in zip(by_est["kvd"], by_est["d"]):
            assert kvd_row.crlb_rmse == d_row.crlb_rmse
            assert kvd_row.empirical_rmse == d_row.empirical_rmse
        assert all(row.non_converged == 0 for row in result.rows)

    def test_empirical_tracks_theory_smoke(self):
        spec, cfg = tiny("speed-sweep", trials=300, grid=(5.0,))
        result = run_experiment(spec, cfg)
        for row in result.rows:
            assert abs(row.empirical_rmse / row.theoretical_rmse - 1) < 0.15

    def test_velocity_deviation_zero_matches_plain_kvd(self):
        spec, cfg = tiny("velocity-deviation", trials=80, grid=(.0, 2.0))
        result = run_experiment(spec, cfg)
        zero_row = [r for r in result.rows if r.sweep_value == 0.0][0]
        plain = run_monte_carlo(with_seed(cfg, point_seed(cfg.seed, 0)),
                                EstimatorSpec(kind="kvd"))
        expected = empirical_rmse(
            [r.position_error for r in plain if r.converged]).rmse
        assert zero_row.empirical_rmse == pytest.approx(expected, rel=1e-12)
        dev_row = [r for r in result.rows if r.sweep_value == 2.0][0]
        assert dev_row.empirical_rmse > zero_row.empirical_rmse

    def test_sweep_applies_sigma(self):
        spec, cfg = tiny("noise-sweep-uvd-pvd", trials=40, grid=(0.01, 0.1))
        result = run_experiment(spec, cfg)
        sigmas = {rec.batch.sigma[0]
                  for (value, est), recs in result.records.items()
                  for rec in recs}
        assert sigmas == {0.01, 0.1}

    def test_circular_uses_consecutive_fixes(self):
        spec, cfg = tiny("circular", trials=5)
        result = run_experiment(spec, cfg)
        recs = result.records[(10.0, "kvd")]
        epochs = [rec.batch.t_l for rec in recs]
        assert epochs == pytest.approx([0.01, 0.09, 0.17, 0.25, 0.33])


class TestWriteExperiment:
    def test_sweep_csv_schema(self, tmp_path):
        spec, cfg = tiny("stationary-noise", trials=30, grid=(0.1, 1.0))
        result = run_experiment(spec, cfg)
        files = write_experiment(result, tmp_path)
        csv = tmp_path / "stationary-noise.csv"
        assert csv in files
        lines = csv.read_text().splitlines()
        assert lines[0] == ("sweep_value,estimator,empirical_rmse_m,"
                            "theoretical_rmse_m,crlb_rmse_m,trials,"
                            "non_converged")
        assert len(lines) == 1 + len(result.rows)
        assert (tmp_path / "stationary-noise_run.json").exists()

    def test_circular_outputs(self, tmp_path):
        spec, cfg = tiny("circular", trials=8)
        result = run_experiment(spec, cfg)
        write_experiment(result, tmp_path)
        summary = (tmp_path / "circular_summary.csv").read_text().splitlines()
        assert summary[0] == ("estimator,rmse_x_m,rmse_y_m,rmse_pos_m,"
                              "crlb_rmse_m,fixes,non_converged")
        assert len(summary) == 5  # header + 4 estimators
        cdf = (tmp_path / "circular_cdf.csv").read_text().splitlines()
        assert cdf[0] == "estimator,error_m,cum_fraction"
        assert cdf[-1].split(",")[2] == "1"

    def test_byte_identical_across_runs_and_threads(self, tmp_path):
        spec, cfg = tiny("velocity-deviation", trials=40, grid=(0.0, 1.0))
        out = []
        for threads, sub in ((1, "a"), (4, "b"), (1, "c")):
            result = run_experiment(spec, cfg, threads=threads)
            write_experiment(result, tmp_path / sub)
            out.append((tmp_path / sub / "velocity-deviation.csv")
                       .read_bytes())
        assert out[0] == out[1] == out[2]

    def test_svg_written_when_requested(self, tmp_path):
        spec, cfg = tiny("speed-sweep", trials=25, grid=(1.0, 5.0))
        result = run_experiment(spec, cfg)
        files = write_experiment(result, tmp_path, svg=True)
        svg = tmp_path / "speed-sweep.svg"
        assert svg in files
        text = svg.read_text()
        assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
