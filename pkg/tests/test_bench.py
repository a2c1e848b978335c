import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from ssrlrcm.bench import (
    CSV_COLUMNS,
    DENSE_INFEASIBLE,
    TABLE_COLUMNS,
    ExperimentConfig,
    ExperimentReport,
    betainc_regularized,
    emit_report,
    grid_search,
    paired_t_test,
    rmse,
    run_experiment,
    t_sf_two_sided,
)
from ssrlrcm.core import SolverConfig
from ssrlrcm.ensemble import EnsembleConfig
from ssrlrcm.errors import ConfigError, DegenerateDifferences


class TestRMSE:
    def test_perfect(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_unit_offset(self):
        y = np.arange(10.0)
        assert rmse(y + 1, y) == 1.0

    def test_hand_value(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5), rel=1e-15)

    def test_mean_predictor_on_quartile_labels(self, rng):
        """The all-mean predictor scores the population standard deviation of the labels."""
        from ssrlrcm.data import quartile_transform

        q = quartile_transform(rng.exponential(3.0, 517) * (rng.random(517) > 0.4))
        counts = np.bincount(q.astype(int), minlength=5)[1:]
        p = counts / counts.sum()
        mu = np.sum(p * np.arange(1, 5))
        analytic = math.sqrt(np.sum(p * (np.arange(1, 5) - mu) ** 2))
        assert rmse(np.full(q.size, q.mean()), q) == pytest.approx(analytic, rel=1e-12)


class TestStudentT:
    @pytest.mark.parametrize("a,b,x", [(0.5, 0.5, 0.3), (2.0, 5.0, 0.1), (20.0, 0.5, 0.97), (5000.0, 0.5, 0.999), (1.0, 1.0, 0.0), (3.0, 2.0, 1.0)])
    def test_incomplete_beta_against_scipy(self, a, b, x):
        assert betainc_regularized(a, b, x) == pytest.approx(special.betainc(a, b, x), rel=1e-10, abs=1e-300)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-40, 40), st.integers(1, 10_000))
    def test_t_tail_against_scipy(self, t, df):
        ref = 2 * stats.t.sf(abs(t), df)
        assert t_sf_two_sided(t, df) == pytest.approx(ref, rel=1e-9, abs=1e-300)

    def test_against_scipy_paired_test(self, rng):
        a, b = rng.normal(0.1, 0.02, 40), rng.normal(0.1, 0.02, 40) + 0.005
        t, p = paired_t_test(a, b)
        ref = stats.ttest_rel(a, b)
        assert t == pytest.approx(ref.statistic, rel=1e-12)
        assert p == pytest.approx(ref.pvalue, rel=1e-9)

    def test_certain_difference(self, rng):
        a = rng.normal(0, 1, 40)
        _, p = paired_t_test(a, a + 1.0 + 1e-6 * rng.standard_normal(40))
        assert p < 1e-6

    def test_constant_shift_is_degenerate_free_with_noise(self, rng):
        a = rng.normal(0, 1, 40)
        _, p = paired_t_test(a, a + 0.3 + 0.01 * rng.standard_normal(40))
        assert p < 1e-6

    def test_zero_mean_difference(self):
        t, p = paired_t_test([1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0])
        assert t == 0.0 and p == 1.0

    def test_identical_samples_rejected(self):
        a = np.arange(5.0)
        with pytest.raises(DegenerateDifferences):
            paired_t_test(a, a)

    def test_too_short(self):
        with pytest.raises(ValueError):
            paired_t_test([1.0], [2.0])

    def test_null_simulation(self):
        rng = np.random.default_rng(2024)
        ps = [paired_t_test(rng.normal(0, 1, 40), rng.normal(0, 1, 40))[1] for _ in range(100)]
        assert sum(p > 0.01 for p in ps) >= 95
        assert all(0.0 <= p <= 1.0 for p in ps)


def small_cfg(**kw):
    base = dict(n=200, sigma_eps=0.01, repetitions=1, seed=3)
    base.update(kw)
    return ExperimentConfig.synthetic_default(**base)


class TestExperiment:
    def test_smoke(self, backend):
        rep = run_experiment(small_cfg())
        (r,) = rep.repetitions
        assert r.status_lrcm == "ok" and r.status_rbf == "ok"
        assert 0 <= r.rmse_lrcm < 1 and 0 <= r.rmse_rbf < 1
        assert r.t_ens > 0 and r.t_matr > 0 and r.time_rbf > 0

    def test_dense_cap_marker(self):
        rep = run_experiment(small_cfg(dense_cap=100))
        (r,) = rep.repetitions
        assert r.status_rbf == DENSE_INFEASIBLE and r.rmse_rbf is None
        assert r.rmse_lrcm is not None
        assert DENSE_INFEASIBLE in emit_report(rep, "table")

    def test_deterministic_except_timing(self):
        cfg = small_cfg(repetitions=3)
        a, b = run_experiment(cfg), run_experiment(cfg)
        key = lambda rep: [(r.rmse_lrcm, r.rmse_rbf, r.n_labeled) for r in rep.repetitions]
        assert key(a) == key(b)
        assert a.p_value == b.p_value

    def test_threaded_repetitions_match_serial(self):
        serial = run_experiment(small_cfg(repetitions=4))
        threaded = run_experiment(small_cfg(repetitions=4, n_jobs=3))
        assert [r.rmse_lrcm for r in serial.repetitions] == [r.rmse_lrcm for r in threaded.repetitions]

    def test_both_methods_see_same_split(self, monkeypatch):
        from ssrlrcm import bench

        seen = []
        real_lrcm, real_rbf = bench.run_lrcm, bench.run_rbf
        monkeypatch.setattr(bench, "run_lrcm", lambda X, prob, *a: seen.append(("lrcm", X.tobytes(), prob.y_padded.tobytes())) or real_lrcm(X, prob, *a))
        monkeypatch.setattr(bench, "run_rbf", lambda X, prob, *a: seen.append(("rbf", X.tobytes(), prob.y_padded.tobytes())) or real_rbf(X, prob, *a))
        run_experiment(small_cfg(repetitions=2))
        assert [s[0] for s in seen] == ["lrcm", "rbf", "lrcm", "rbf"]
        assert seen[0][1:] == seen[1][1:] and seen[2][1:] == seen[3][1:]

    def test_failure_recorded_not_raised(self, monkeypatch):
        from ssrlrcm import bench
        from ssrlrcm.errors import SingularCore

        def boom(*a):
            raise SingularCore("core singular", alpha=1.0)

        monkeypatch.setattr(bench, "run_lrcm", boom)
        rep = run_experiment(small_cfg(repetitions=2))
        assert all(r.status_lrcm.startswith("SingularCore") for r in rep.repetitions)
        assert all(r.rmse_rbf is not None for r in rep.repetitions)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            small_cfg(repetitions=0)
        with pytest.raises(ConfigError):
            small_cfg(beta_grid=(0.0, 0.1))
        with pytest.raises(ValueError):
            SolverConfig(1.0, 0.0)
        with pytest.raises(ConfigError):
            ExperimentConfig(scenario="forestfires")

    def test_dict_round_trip(self):
        cfg = small_cfg(ensemble=EnsembleConfig(r=7, k_range=(2, 3)), alpha_grid=(0.5, 1.0))
        again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"n": 10, "bogus": 1})


class TestGridSearch:
    def test_single_cell(self):
        assert grid_search(small_cfg(), [0.7], [0.02]) == (0.7, 0.02)

    def test_ties_prefer_larger_beta(self, monkeypatch):
        from ssrlrcm import bench

        monkeypatch.setattr(bench, "rmse", lambda f, y: 1.0)
        assert grid_search(small_cfg(), [0.5, 1.0], [0.001, 0.01]) == (1.0, 0.01)

    def test_rbf_method(self):
        best, scores = grid_search(small_cfg(), [0.5, 1.0], [0.001], method="rbf", return_scores=True)
        assert best in scores and len(scores) == 2

    def test_zero_beta_rejected(self):
        with pytest.raises(ConfigError):
            grid_search(small_cfg(), [1.0], [0.0])

    def test_selects_alpha_one_on_synthetic_setting(self):
        wins = sum(grid_search(ExperimentConfig.synthetic_default(seed=s), [0.5, 1.0], [0.001])[0] == 1.0 for s in range(10))
        assert wins > 5


class TestReport:
    def test_empty_report_is_header_only(self):
        rep = ExperimentReport({"sigma_eps": 0.01})
        lines = emit_report(rep, "table").strip().splitlines()
        assert lines[0].split() == list(TABLE_COLUMNS)
        assert all(set(l) <= {"-"} for l in lines[1:])
        assert emit_report(rep, "csv").strip() == ",".join(CSV_COLUMNS)

    def test_one_rep_csv(self):
        rep = run_experiment(small_cfg())
        rows = emit_report(rep, "csv").strip().splitlines()
        assert len(rows) == 2
        assert len(rows[1].split(",")) == 8

    def test_json_round_trip(self):
        rep = run_experiment(small_cfg(repetitions=2))
        back = ExperimentReport.from_dict(json.loads(emit_report(rep, "json")))
        assert back.to_dict() == rep.to_dict()

    def test_table_columns(self):
        rep = run_experiment(small_cfg(repetitions=2))
        text = emit_report(rep, "table")
        assert text.splitlines()[0].split() == list(TABLE_COLUMNS)
        assert "200" in text.splitlines()[2]

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_report(ExperimentReport({}), "xml")

    def test_invariants(self):
        rep = run_experiment(small_cfg(repetitions=3))
        assert all(r.rmse_lrcm >= 0 and r.rmse_rbf >= 0 for r in rep.repetitions)
        assert 0.0 <= rep.p_value <= 1.0
        assert rep.peak_memory_estimate > 0 and rep.peak_rss > 0
