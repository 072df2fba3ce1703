from __future__ import annotations

import math

import numpy as np
import pytest

from cascade_clt import mc, theory
from cascade_clt.cascade import run_continuous
from cascade_clt.cgm import build_multigraph
from cascade_clt.dist import EXAMPLE, DegreeThresholdDistribution, realize_sampled
from cascade_clt.rng import mix

NO_SEED = DegreeThresholdDistribution([(1, 1, 1.0)])


class TestRunTrials:
    def test_dead_process(self):
        for r in mc.run_trials(NO_SEED, 50, 4, 0):
            assert (r.final_size, r.tau, r.A_at_t, r.a_hat_n_stop, r.xi) == (0, 0.0, 0, 0.0, 0.0)

    def test_seeds_follow_mix(self):
        recs = mc.run_trials(EXAMPLE, 200, 5, 42)
        assert [r.seed for r in recs] == [mix(42, k) for k in range(5)]
        assert [r.trial for r in recs] == list(range(5))

    def test_record_reproduces_from_seed(self):
        rec = mc.run_trials(EXAMPLE, 300, 3, 7, eval_time=0.05)[2]
        again = mc.run_trial(EXAMPLE, 300, 2, rec.seed, 0.05)
        assert again == rec

    def test_conservation_and_centering(self):
        for r in mc.run_trials(EXAMPLE, 1000, 10, 3):
            assert 0 <= r.final_size <= r.n and r.tau >= 0
            assert r.xi == pytest.approx((r.A_at_t - r.n * r.a_hat_n_stop) / math.sqrt(r.n))

    def test_workers_identical(self):
        a = mc.run_trials(EXAMPLE, 2000, 12, 5, workers=1)
        b = mc.run_trials(EXAMPLE, 2000, 12, 5, workers=3)
        assert a == b

    def test_eval_time_before_tau(self):
        # early evaluation: the count and the centring both use t, not tau
        r = mc.run_trials(EXAMPLE, 5000, 1, 0, eval_time=0.02)[0]
        seq = realize_sampled(EXAMPLE, 5000, mix(r.seed, 0))
        mg = build_multigraph(seq, mix(r.seed, 1))
        traj, _ = run_continuous(mg, seq.thresholds, mix(r.seed, 2), snapshot_grid=0)
        assert traj.tau > 0.02
        assert r.A_at_t <= r.final_size

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            mc.run_trials(EXAMPLE, 100, 0)
        with pytest.raises(ValueError):
            mc.run_trials(EXAMPLE, 100, 1, eval_time=-1.0)

    def test_failure_names_trial(self, monkeypatch):
        real = mc.run_trial

        def flaky(dist, n, trial, seed, eval_time, rule="strict"):
            if trial == 2:
                raise RuntimeError("boom")
            return real(dist, n, trial, seed, eval_time, rule)

        monkeypatch.setattr(mc, "run_trial", flaky)
        with pytest.raises(mc.TrialError) as exc:
            mc.run_trials(EXAMPLE, 100, 4, 0, eval_time=1.0)
        assert exc.value.trial == 2

    def test_mean_final_fraction(self):
        recs = mc.run_trials(EXAMPLE, 10_000, 100, 11)
        assert abs(np.mean([r.final_size / r.n for r in recs]) - 0.1009) < 0.005


class TestSummarize:
    def test_constant(self):
        s = mc.summarize([0.5] * 20, 0.0, 0.01)
        assert s.variance == 0.0 and s.ks_stat == pytest.approx(1.0)
        assert math.isnan(s.skewness)

    def test_normal_moments(self):
        x = np.random.default_rng(0).standard_normal(10_000)
        s = mc.summarize(x, 0.0, 1.0)
        assert abs(s.skewness) < 0.08 and abs(s.excess_kurtosis) < 0.2
        assert s.ks_pvalue > 0.01

    def test_small_samples(self):
        s = mc.summarize([1.0, 2.0, 4.0])
        assert s.skewness is None and s.excess_kurtosis is None and s.ks_stat is None
        assert s.variance == pytest.approx(np.var([1, 2, 4], ddof=1))
        with pytest.raises(mc.InsufficientSamples):
            mc.summarize([1.0])

    def test_ks_detects_wrong_scale(self):
        x = np.random.default_rng(1).standard_normal(2000)
        assert mc.summarize(x, 0.0, 2.0).ks_pvalue < 1e-6


class TestHB:
    def test_large(self):
        assert mc.hB_empirical_check(EXAMPLE, 100_000, 0) < 0.02

    def test_small_loose(self):
        assert mc.hB_empirical_check(EXAMPLE, 1000, 1) < 0.1

    def test_no_seed(self):
        assert mc.hB_empirical_check(NO_SEED, 1000, 0) == 0.0

    def test_size_floor(self):
        with pytest.raises(ValueError):
            mc.hB_empirical_check(EXAMPLE, 999, 0)


class TestTau:
    def test_example(self):
        r = mc.tau_concentration(EXAMPLE, 20_000, 30, 0)
        assert r.passed and abs(r.theory_t_star - 0.10536) < 1e-5

    def test_no_seed(self):
        r = mc.tau_concentration(NO_SEED, 1000, 3, 0)
        assert r.mean_tau == 0.0 == r.theory_t_star and r.passed

    def test_all_seeds_skipped(self):
        r = mc.tau_concentration(DegreeThresholdDistribution([(2, 0, 1.0)]), 500, 4, 0)
        assert r.skipped and math.isinf(r.theory_t_star) and math.isfinite(r.mean_tau)


class TestSweep:
    def test_rows_and_csv(self, tmp_path):
        rows = mc.convergence_sweep(EXAMPLE, [500, 2000], 6, 1)
        assert [r.n for r in rows] == [500, 2000]
        path = tmp_path / "sweep.csv"
        mc.write_sweep_csv(rows, path)
        assert mc.read_sweep_csv(path) == rows

    def test_single_trial(self):
        (row,) = mc.convergence_sweep(EXAMPLE, [500], 1, 0)
        assert row.var_xi is None

    def test_increasing_required(self):
        with pytest.raises(ValueError):
            mc.convergence_sweep(EXAMPLE, [1000, 1000], 2, 0)
        with pytest.raises(ValueError):
            mc.convergence_sweep(EXAMPLE, [], 2, 0)

    @pytest.mark.slow
    def test_finite_size_approach(self):
        rows = mc.convergence_sweep(EXAMPLE, [1000, 10_000, 100_000], 200, 2)
        sigma2 = theory.solve(EXAMPLE).sigma2_star
        for r in rows:
            se = math.sqrt(0.1009 * 0.9 / r.n / r.trials) * 4 + 2 / r.n
            assert abs(r.mean_final_fraction - 0.1009) < max(se, 0.002)
        for r in rows[1:]:
            assert abs(r.var_xi / sigma2 - 1) < 0.25


def test_variance_of_mean_shrinks():
    xi = np.array([r.xi for r in mc.run_trials(EXAMPLE, 2000, 400, 9)])
    halves = [xi[:100].mean(), xi[:200].mean(), xi.mean()]
    assert all(np.isfinite(halves))
    var = xi.var(ddof=1)
    # standard errors of the mean at 100 and 400 trials differ by the expected factor of 2
    assert math.sqrt(var / 100) / math.sqrt(var / 400) == pytest.approx(2.0)
    assert abs(xi.mean()) < 4 * math.sqrt(var / 400) + 0.01


def test_results_csv_roundtrip(tmp_path):
    recs = mc.run_trials(EXAMPLE, 500, 4, 0)
    path = tmp_path / "r.csv"
    mc.write_results_csv(recs, path)
    assert mc.read_results_csv(path) == recs
    assert path.read_text().splitlines()[0] == "trial,seed,n,final_size,tau,a_hat_n_stop,A_at_t,xi"
