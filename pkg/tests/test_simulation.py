"""Tests for data generation, the Monte Carlo engine and its kernels."""

import math

import numpy as np
import pytest
import scipy.stats

from blockfdr import _kernels
from blockfdr.core import false_rejections
from blockfdr.estimators import EstimatorSpec
from blockfdr.procedures import (
    adaptive_bh,
    adaptive_bonferroni,
    bky_adaptive_bh,
    two_stage_bh,
)
from blockfdr.core import bh, bonferroni
from blockfdr.simulation import (
    SimConfig,
    _rep_rng,
    generate,
    normal_cdf,
    preset_grid,
    run_mc,
    run_replications,
    truth_layout,
)


class TestTruthLayout:
    def test_even_split(self):
        truth = truth_layout(240, 120, 4)
        assert truth.n_true_nulls == 120
        assert truth.row_null_counts().tolist() == [2] * 60
        np.testing.assert_array_equal(truth.labels[:4], [0, 0, 1, 1])

    def test_240_in_blocks_of_3(self):
        truth = truth_layout(240, 120, 3)
        m = truth.row_null_counts()
        assert m[:40].tolist() == [1] * 40
        assert m[40:].tolist() == [2] * 40
        assert truth.n_true_nulls == 120

    def test_all_false_nulls(self):
        truth = truth_layout(12, 0, 3)
        assert truth.n_true_nulls == 0

    def test_round_robin_fallback(self):
        truth = truth_layout(12, 7, 4)
        assert truth.row_null_counts().tolist() == [3, 2, 2]
        # earliest positions first within each block
        np.testing.assert_array_equal(truth.labels[:4], [0, 0, 0, 1])

    def test_infeasible(self):
        with pytest.raises(ValueError):
            truth_layout(10, 3, 4)
        with pytest.raises(ValueError):
            truth_layout(8, 9, 4)


class TestNormalCdf:
    def test_center(self):
        assert normal_cdf(0.0) == 0.5

    def test_975_quantile(self):
        assert abs(normal_cdf(1.959964) - 0.975) < 5e-7

    def test_symmetry_grid(self):
        xs = np.linspace(-8, 8, 2001)
        sym = normal_cdf(xs) + normal_cdf(-xs)
        np.testing.assert_allclose(sym, 1.0, atol=1e-14)

    def test_reference_value(self):
        assert normal_cdf(1.0) == pytest.approx(0.84134474606854293, abs=1e-13)

    def test_scalar_matches_array(self):
        xs = np.array([-2.5, -0.3, 0.0, 1.7])
        arr = normal_cdf(xs)
        for x, v in zip(xs, arr):
            assert normal_cdf(float(x)) == pytest.approx(v, abs=1e-15)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            normal_cdf(float("nan"))
        with pytest.raises(ValueError):
            normal_cdf(np.array([0.0, np.inf]))


class TestGenerate:
    def test_null_pvalues_uniform_when_independent(self):
        cfg = SimConfig(n=100, n0=100, s=4, rho=0.0, reps=1, seed=3,
                        methods=("Bonf",))
        truth = truth_layout(100, 100, 4)
        samples = []
        for rep in range(100):
            samples.append(generate(cfg, truth, _rep_rng(3, rep)).values)
        stat = scipy.stats.kstest(np.concatenate(samples), "uniform")
        assert stat.pvalue > 0.001

    def test_marginals_uniform_under_correlation(self):
        cfg = SimConfig(n=100, n0=100, s=4, rho=0.7, reps=1, seed=4,
                        methods=("Bonf",))
        truth = truth_layout(100, 100, 4)
        samples = []
        for rep in range(100):
            samples.append(generate(cfg, truth, _rep_rng(4, rep)).values)
        stat = scipy.stats.kstest(np.concatenate(samples), "uniform")
        assert stat.pvalue > 0.001

    def test_within_block_correlation(self):
        # sample correlation of paired z-scores across 1e5 blocks
        cfg = SimConfig(n=2000, n0=2000, s=2, rho=0.8, reps=1, seed=5,
                        methods=("Bonf",))
        truth = truth_layout(2000, 2000, 2)
        first, second = [], []
        for rep in range(100):
            rng = _rep_rng(5, rep)
            b = cfg.n // cfg.s
            z = rng.standard_normal(b)
            eps = rng.standard_normal(cfg.n)
            x = math.sqrt(0.8) * np.repeat(z, 2) + math.sqrt(0.2) * eps
            first.append(x[0::2])
            second.append(x[1::2])
        r = np.corrcoef(np.concatenate(first), np.concatenate(second))[0, 1]
        assert abs(r - 0.8) < 0.05

    def test_pvalues_match_two_sided_transform(self):
        cfg = SimConfig(n=20, n0=10, s=2, rho=0.3, reps=1, seed=6,
                        methods=("Bonf",))
        truth = truth_layout(20, 10, 2)
        pv = generate(cfg, truth, _rep_rng(6, 0))
        # reconstruct the z-scores from the same stream
        rng = _rep_rng(6, 0)
        z = rng.standard_normal(10)
        eps = rng.standard_normal(20)
        mu = np.where(truth.labels == 1, cfg.d, 0.0)
        x = mu + math.sqrt(0.3) * np.repeat(z, 2) + math.sqrt(0.7) * eps
        expected = 2.0 * (1.0 - normal_cdf(np.abs(x)))
        np.testing.assert_allclose(pv.values, expected, atol=1e-15)

    def test_rejects_bad_rho(self):
        with pytest.raises(ValueError):
            SimConfig(n=8, n0=4, s=2, rho=1.0, methods=("BH",))


ALL_METHODS = ("BH", "adBH1", "adBH2", "adBH3", "tsBH", "Bonf", "adBon1", "adBon2")


class TestKernels:
    def test_backends_agree_exactly(self):
        cfg = SimConfig(n=48, n0=24, s=4, rho=0.6, lam=0.5, reps=400, seed=17,
                        methods=ALL_METHODS)
        _, v1, r1, t1 = run_replications(cfg, backend="numba")
        _, v2, r2, t2 = run_replications(cfg, backend="numpy")
        np.testing.assert_array_equal(v1, v2)
        np.testing.assert_array_equal(r1, r2)
        np.testing.assert_array_equal(t1, t2)

    @pytest.mark.parametrize("backend", ["numba", "numpy"])
    def test_kernel_counts_match_library_procedures(self, backend):
        cfg = SimConfig(n=24, n0=12, s=3, rho=0.4, lam=0.35, reps=60, seed=23,
                        methods=ALL_METHODS)
        truth, V, R, T = run_replications(cfg, backend=backend)
        h0 = truth.labels == 0
        spec1 = EstimatorSpec("storey", cfg.lam)
        spec2 = EstimatorSpec("block", cfg.lam)
        off = truth.layout.offsets()

        def flat_counts(idx_set):
            idx = np.fromiter(idx_set, dtype=np.int64, count=len(idx_set))
            rej = np.zeros(cfg.n, dtype=bool)
            rej[idx] = True
            return int((rej & h0).sum()), int(rej.sum()), int((rej & ~h0).sum())

        def outcome_counts(outcome):
            v = false_rejections(outcome, truth)
            return v, outcome.n_rejected, outcome.n_rejected - v

        for rep in range(cfg.reps):
            pv = generate(cfg, truth, _rep_rng(cfg.seed, rep))
            expected = [
                flat_counts(bh(pv.values, cfg.alpha)),
                outcome_counts(adaptive_bh(pv, cfg.alpha, spec1)),
                outcome_counts(adaptive_bh(pv, cfg.alpha, spec2)),
                flat_counts(bky_adaptive_bh(pv.values, cfg.alpha)),
                outcome_counts(two_stage_bh(pv, cfg.alpha)),
                flat_counts(bonferroni(pv.values, cfg.alpha)),
                outcome_counts(adaptive_bonferroni(pv, cfg.alpha, spec1)),
                outcome_counts(adaptive_bonferroni(pv, cfg.alpha, spec2)),
            ]
            for mi, (v, r, t) in enumerate(expected):
                assert (V[rep, mi], R[rep, mi], T[rep, mi]) == (v, r, t), \
                    f"rep {rep} method {cfg.methods[mi]}"

    def test_adaptive_methods_coincide_for_singleton_blocks(self):
        cfg = SimConfig(n=60, n0=30, s=1, rho=0.0, lam=0.5, reps=300, seed=29,
                        methods=("adBH1", "adBH2"))
        _, V, R, T = run_replications(cfg)
        np.testing.assert_array_equal(V[:, 0], V[:, 1])
        np.testing.assert_array_equal(R[:, 0], R[:, 1])

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(n=8, n0=4, s=2, rho=0.0, methods=("nope",))

    def test_adaptive_needs_lambda(self):
        with pytest.raises(ValueError):
            SimConfig(n=8, n0=4, s=2, rho=0.0, methods=("adBH2",))


class TestRunMC:
    def test_deterministic_reports(self):
        cfg = SimConfig(n=40, n0=20, s=2, rho=0.5, lam=0.5, reps=200, seed=31,
                        methods=("BH", "adBH2"))
        assert run_mc(cfg) == run_mc(cfg)

    def test_count_bounds(self):
        cfg = SimConfig(n=40, n0=30, s=2, rho=0.3, lam=0.5, reps=300, seed=37,
                        methods=ALL_METHODS)
        _, V, R, T = run_replications(cfg)
        assert np.all(V <= R) and np.all(R <= cfg.n)
        assert np.all(T <= cfg.n - cfg.n0)
        assert np.all(V + T == R)

    def test_no_false_nulls_gives_zero_fdr_everywhere(self):
        cfg = SimConfig(n=30, n0=0, s=3, rho=0.2, lam=0.5, reps=100, seed=41,
                        methods=("BH", "adBH2", "Bonf"))
        report = run_mc(cfg)
        for st in report.stats:
            assert st.fdr == 0.0
            assert st.fwer == 0.0

    def test_single_replication_has_no_se(self):
        cfg = SimConfig(n=20, n0=10, s=2, rho=0.0, lam=0.5, reps=1, seed=43,
                        methods=("BH",))
        st = run_mc(cfg).stats[0]
        assert st.fdr_se is None and st.fwer_se is None and st.power_se is None

    def test_se_matches_recomputation(self):
        cfg = SimConfig(n=30, n0=15, s=3, rho=0.4, lam=0.5, reps=50, seed=47,
                        methods=("adBH2",))
        _, V, R, T = run_replications(cfg)
        st = run_mc(cfg).stats[0]
        fdp = V[:, 0] / np.maximum(R[:, 0], 1)
        assert st.fdr == pytest.approx(fdp.mean(), abs=0)
        assert st.fdr_se == pytest.approx(fdp.std(ddof=1) / math.sqrt(cfg.reps), abs=0)
        pw = T[:, 0] / (cfg.n - cfg.n0)
        assert st.power == pytest.approx(pw.mean(), abs=0)

    def test_bonferroni_fwer_guarantee_all_null(self):
        cfg = SimConfig(n=100, n0=100, s=4, rho=0.0, reps=2000, seed=53,
                        methods=("Bonf",))
        st = run_mc(cfg).stats[0]
        assert st.fwer <= 0.05 + 3 * st.fwer_se

    def test_bh_fdr_under_independence(self):
        # exact pi0 * alpha = 0.025 for independent p-values
        cfg = SimConfig(n=240, n0=120, s=1, rho=0.0, reps=2000, seed=59,
                        methods=("BH",))
        st = run_mc(cfg).stats[0]
        assert abs(st.fdr - 0.025) <= 3 * st.fdr_se


class TestPresets:
    def test_grid_shapes(self):
        configs = preset_grid("fdr-figures", reps=2, seed=1)
        assert len(configs) == 4 * 3 * 10
        assert all(c.methods == ("BH", "adBH1", "adBH2", "adBH3") for c in configs)
        configs = preset_grid("fwer-figures", reps=2, seed=1)
        assert len(configs) == 4 * 3 * 10
        assert {c.s for c in configs} == {2, 4, 10, 20}

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            preset_grid("nope")
