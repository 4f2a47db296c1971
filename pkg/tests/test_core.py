"""Tests for the domain types and the generic step-up machinery."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockfdr.core import (
    BlockLayout,
    PValueMatrix,
    TruthAssignment,
    bh,
    bonferroni,
    false_rejections,
    stepup,
)
from blockfdr.core import TestOutcome as Outcome


def bh_oracle(p, alpha):
    """Brute force: try every candidate rejection count from n down to 1."""
    p = list(p)
    n = len(p)
    p_sorted = sorted(p)
    for r in range(n, 0, -1):
        if p_sorted[r - 1] <= r * alpha / n:
            return frozenset(i for i in range(n) if p[i] <= p_sorted[r - 1])
    return frozenset()


class TestBlockLayout:
    def test_derived_quantities(self):
        layout = BlockLayout((2, 3, 1))
        assert layout.n == 6
        assert layout.n_blocks == 3
        assert layout.max_size == 3
        assert layout.mean_size == 2.0
        assert layout.offsets().tolist() == [0, 2, 5, 6]

    def test_invariants(self):
        layout = BlockLayout((4, 1, 2))
        assert layout.n >= layout.n_blocks >= 1
        assert layout.max_size >= layout.mean_size >= 1

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            BlockLayout(())
        with pytest.raises(ValueError):
            BlockLayout((2, 0))

    def test_equal_blocks(self):
        assert BlockLayout.equal_blocks(6, 2).sizes == (2, 2, 2)
        with pytest.raises(ValueError):
            BlockLayout.equal_blocks(7, 2)


class TestPValueMatrix:
    def test_from_rows(self):
        pv = PValueMatrix.from_rows([[0.1, 0.9], [0.6, 0.7]])
        assert pv.layout.sizes == (2, 2)
        assert pv.row(1).tolist() == [0.6, 0.7]

    def test_boundary_values_are_legal(self):
        PValueMatrix.from_rows([[0.0, 1.0]])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            PValueMatrix.from_rows([[0.1, 1.5]])
        with pytest.raises(ValueError):
            PValueMatrix.from_rows([[-0.1]])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            PValueMatrix(BlockLayout((2, 2)), np.array([0.1, 0.2, 0.3]))


class TestTruthAssignment:
    def test_counts(self):
        truth = TruthAssignment.from_rows([[0, 1], [0, 0], [1]])
        assert truth.n_true_nulls == 3
        assert truth.pi0 == 3 / 5
        assert truth.row_null_counts().tolist() == [1, 2, 0]

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            TruthAssignment.from_rows([[0, 2]])


class TestStepup:
    def test_worked_example(self):
        # thresholds pass at i=2, so both p <= 0.02 go
        assert stepup([0.01, 0.02, 0.5], [0.0167, 0.0333, 0.05]) == {0, 1}

    def test_all_ones_rejects_nothing(self):
        assert stepup([1.0, 1.0, 1.0], [0.01, 0.02, 0.05]) == frozenset()

    def test_all_zeros_rejects_everything(self):
        assert stepup([0.0] * 4, [0.01, 0.02, 0.03, 0.04]) == {0, 1, 2, 3}

    def test_errors(self):
        with pytest.raises(ValueError):
            stepup([0.1, 0.2], [0.05])
        with pytest.raises(ValueError):
            stepup([0.1], [1.5])
        with pytest.raises(ValueError):
            stepup([0.1, 0.2], [0.05, 0.01])
        with pytest.raises(ValueError):
            stepup([], [])

    def test_ties_are_rejected_together(self):
        out = stepup([0.02, 0.02, 0.9], [0.01, 0.03, 0.05])
        assert out == {0, 1}

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=10),
           st.floats(0.01, 0.99))
    @settings(max_examples=300, deadline=None)
    def test_downset_property(self, pvals, alpha):
        # if i is rejected, every j with a smaller-or-equal p-value is too
        n = len(pvals)
        crit = [(k + 1) * alpha / n for k in range(n)]
        out = stepup(pvals, crit)
        for i in out:
            for j in range(n):
                if pvals[j] <= pvals[i]:
                    assert j in out

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.data())
    @settings(max_examples=300, deadline=None)
    def test_monotone_in_constants(self, pvals, data):
        n = len(pvals)
        base = sorted(data.draw(st.lists(
            st.floats(0, 0.5), min_size=n, max_size=n)))
        bumps = data.draw(st.lists(st.floats(0, 0.4), min_size=n, max_size=n))
        raised = np.maximum.accumulate(np.asarray(base) + np.asarray(bumps))
        assert stepup(pvals, base) <= stepup(pvals, raised.tolist())


class TestBH:
    def test_examples(self):
        assert bh([0.01, 0.02, 0.5], 0.05) == {0, 1}
        assert bh([0.9], 0.05) == frozenset()
        # 0.04 > 0.05/2 and 0.9 > 0.05, so nothing passes either constant
        assert bh([0.04, 0.9], 0.05) == frozenset()

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            bh([0.1], 1.0)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            p = rng.random(n)
            if rng.random() < 0.2:
                p[rng.integers(0, n)] = 0.0
            alpha = float(rng.uniform(0.01, 0.5))
            assert bh(p, alpha) == bh_oracle(p, alpha)

    def test_bonferroni_subset_of_bh(self):
        rng = np.random.default_rng(99)
        for _ in range(500):
            n = int(rng.integers(1, 15))
            p = rng.random(n)
            alpha = float(rng.uniform(0.01, 0.5))
            assert bonferroni(p, alpha) <= bh(p, alpha)


class TestBonferroni:
    def test_examples(self):
        assert bonferroni([0.004, 0.02, 0.9], 0.05) == {0}
        assert bonferroni([0.0, 0.0], 0.3) == {0, 1}
        # boundary: threshold equals the p-value
        assert bonferroni([0.05], 0.05) == {0}


class TestFalseRejections:
    def test_examples(self):
        truth = TruthAssignment.from_rows([[0, 1], [1, 0]])
        empty = Outcome(frozenset(), 0)
        assert false_rejections(empty, truth) == 0

        all_null = TruthAssignment.from_rows([[0, 0], [0, 0]])
        everything = Outcome(
            frozenset([(0, 0), (0, 1), (1, 0), (1, 1)]), 4)
        assert false_rejections(everything, all_null) == 4

        some = Outcome(frozenset([(0, 0), (1, 0)]), 2)
        assert false_rejections(some, truth) == 1
        assert 0 <= false_rejections(some, truth) <= some.n_rejected

    def test_shape_mismatch(self):
        truth = TruthAssignment.from_rows([[0, 1]])
        bad = Outcome(frozenset([(3, 0)]), 1)
        with pytest.raises(ValueError):
            false_rejections(bad, truth)

    def test_outcome_count_consistency(self):
        with pytest.raises(ValueError):
            Outcome(frozenset([(0, 0)]), 2)
