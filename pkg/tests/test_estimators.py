"""Tests for the null-count estimators and the admissible-lambda bound."""

import math

import numpy as np
import pytest

from blockfdr.core import PValueMatrix
from blockfdr.estimators import (
    EstimatorSpec,
    as_estimator,
    lambda_threshold,
    n0_block,
    n0_storey,
    r_lambda,
)

PV = PValueMatrix.from_rows([[0.1, 0.9], [0.6, 0.7]])


class TestRLambda:
    def test_examples(self):
        assert r_lambda(PValueMatrix.from_rows([[1.0, 1.0]]), 0.5) == 0
        assert r_lambda(PValueMatrix.from_rows([[0.0], [0.0, 0.0]]), 0.5) == 3
        assert r_lambda(PV, 0.5) == 1

    def test_lambda_validation(self):
        for bad in (0.0, 1.0, -0.2, 1.3):
            with pytest.raises(ValueError):
                r_lambda(PV, bad)


class TestEstimates:
    def test_block_examples(self):
        assert n0_block(PV, 0.5) == 10.0
        zeros = PValueMatrix.from_rows([[0.0, 0.0], [0.0, 0.0]])
        assert n0_block(zeros, 0.5) == 4.0
        ones = PValueMatrix.from_rows([[1.0, 1.0], [1.0, 1.0]])
        # exceeds n and is deliberately not clamped
        assert n0_block(ones, 0.5) == 12.0

    def test_storey_examples(self):
        assert n0_storey(PV, 0.5) == 8.0
        zeros = PValueMatrix.from_rows([[0.0, 0.0], [0.0, 0.0]])
        assert n0_storey(zeros, 0.5) == 2.0

    def test_block_equals_storey_when_smax_is_1(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            pv = PValueMatrix.from_rows([[v] for v in rng.random(6)])
            lam = float(rng.uniform(0.05, 0.95))
            assert n0_block(pv, lam) == n0_storey(pv, lam)

    def test_difference_identity(self):
        # n0_block - n0_storey == (s_max - 1) / (1 - lambda), up to rounding
        rng = np.random.default_rng(6)
        for _ in range(200):
            sizes = [int(rng.integers(1, 5)) for _ in range(int(rng.integers(1, 5)))]
            pv = PValueMatrix.from_rows([rng.random(s) for s in sizes])
            lam = float(rng.uniform(0.05, 0.95))
            expected = (pv.layout.max_size - 1) / (1.0 - lam)
            assert math.isclose(n0_block(pv, lam) - n0_storey(pv, lam),
                                expected, rel_tol=1e-12, abs_tol=1e-12)

    def test_monotone_in_each_pvalue(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            vals = rng.random(6)
            pv = PValueMatrix.from_rows([vals[:2], vals[2:]])
            lam = float(rng.uniform(0.1, 0.9))
            base = n0_block(pv, lam)
            k = int(rng.integers(0, 6))
            raised = vals.copy()
            raised[k] = min(1.0, raised[k] + float(rng.uniform(0, 1)))
            pv2 = PValueMatrix.from_rows([raised[:2], raised[2:]])
            assert n0_block(pv2, lam) >= base

    def test_strictly_positive_lower_bound(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            pv = PValueMatrix.from_rows([rng.random(3), rng.random(2)])
            lam = float(rng.uniform(0.05, 0.95))
            assert n0_block(pv, lam) >= pv.layout.max_size / (1.0 - lam) > 0


class TestLambdaThreshold:
    def test_reference_values(self):
        # high-precision evaluations of (2b+3)^(-2/(b+2))
        assert lambda_threshold(1) == pytest.approx(0.34199518933533940, abs=1e-12)
        assert lambda_threshold(2) == pytest.approx(0.37796447300922723, abs=1e-12)
        # exceeds every lambda in {0.2, 0.5, 0.8}
        assert lambda_threshold(120) == pytest.approx(0.91388531841334478, abs=1e-12)

    def test_range_and_monotonicity(self):
        values = [lambda_threshold(b) for b in range(1, 201)]
        assert all(0.0 < v < 1.0 for v in values)
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_rejects_bad_b(self):
        with pytest.raises(ValueError):
            lambda_threshold(0)


class TestEstimatorSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            EstimatorSpec("other", 0.5)
        with pytest.raises(ValueError):
            EstimatorSpec("block", 1.0)

    def test_as_estimator(self):
        assert as_estimator(EstimatorSpec("block", 0.5))(PV) == 10.0
        assert as_estimator(EstimatorSpec("storey", 0.5))(PV) == 8.0
        assert as_estimator(lambda pv: 3.0)(PV) == 3.0
        with pytest.raises(TypeError):
            as_estimator("block")
