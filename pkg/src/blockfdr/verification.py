"""Numerical verification of the facts the procedures rely on.

The centerpiece is the certification sum for the block null-count
estimator: under the worst-case configuration where every false-null
p-value is 0 and every true-null p-value is uniform, the row-deleted
estimate must satisfy

    sum_i m_i * E[ 1 / n0_hat(row i zeroed) ] <= 1,

where ``m_i`` counts true nulls in row ``i``.  For the block estimator
the row-zeroed count of p-values above ``lambda`` is Binomial, so the
sum has an exact finite form evaluated here by direct pmf summation;
a Monte Carlo evaluator covers arbitrary estimators through the same
row-zeroing interface.  The module also provides the inverse-moment
identity for binomial counts, the balanced column-sum rearrangement of
binary matrices, the monotonicity check for the admissible-lambda
curve, and a brute-force re-implementation of the procedures used as
an independent oracle in tests.
"""

from __future__ import annotations

import math
from itertools import combinations_with_replacement

import numpy as np

from .core import BlockLayout, PValueMatrix, TruthAssignment
from .estimators import (
    EstimatorLike,
    EstimatorSpec,
    as_estimator,
    lambda_threshold,
)
from .procedures import adaptive_bh, adaptive_bonferroni, two_stage_bh

__all__ = [
    "property1_lhs_exact",
    "property1_lhs_mc",
    "binomial_inverse_moment",
    "balanced_rearrangement",
    "lemma2_f",
    "grid_monotonicity_check",
    "brute_force_procedure",
    "check_certification",
    "check_rearrangement",
    "check_inverse_moment_identity",
    "check_lambda_curve",
    "check_procedure_oracles",
]


def _validated_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    return lam


def _expect_inv_shifted(nn: int, theta: float, shift: float) -> float:
    """E[1 / (W + shift)] for W ~ Binomial(nn, theta), by pmf summation.

    The pmf is built by the stable ratio recurrence, so no factorials
    overflow.
    """
    if nn < 0:
        raise ValueError("binomial size must be nonnegative")
    if theta <= 0.0:
        return 1.0 / shift
    if theta >= 1.0:
        return 1.0 / (nn + shift)
    pmf = (1.0 - theta) ** nn
    ratio = theta / (1.0 - theta)
    total = pmf / shift
    for k in range(nn):
        pmf *= (nn - k) * ratio / (k + 1)
        total += pmf / (k + 1 + shift)
    return total


def property1_lhs_exact(truth: TruthAssignment, lam: float) -> float:
    """Exact certification sum for the block estimator.

    With row ``i`` zeroed out, the count of p-values above ``lambda``
    under the worst-case configuration is Binomial(n0 - m_i, 1 - lambda)
    over the true nulls outside the row, so each row contributes
    ``m_i * (1 - lambda) * E[1 / (W_i + s_max)]``.  The result depends
    on the layout only through the block count, ``s_max`` and the
    per-row null counts.
    """
    lam = _validated_lambda(lam)
    m = truth.row_null_counts()
    n0 = int(m.sum())
    smax = truth.layout.max_size
    theta = 1.0 - lam
    cache: dict[int, float] = {}
    total = 0.0
    for mi in m:
        mi = int(mi)
        if mi == 0:
            continue
        nn = n0 - mi
        if nn not in cache:
            cache[nn] = _expect_inv_shifted(nn, theta, float(smax))
        total += mi * theta * cache[nn]
    return total


def property1_lhs_mc(
    truth: TruthAssignment,
    lam: float,
    estimator: EstimatorLike | None = None,
    reps: int = 2000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo version of the certification sum for any estimator.

    True-null p-values are drawn uniform, false-null ones fixed at 0;
    the estimator is evaluated on the matrix with each row zeroed in
    turn.  Returns (estimate, standard error).  Every replication uses
    its own counter-based stream keyed by (seed, rep).
    """
    lam = _validated_lambda(lam)
    if reps < 1:
        raise ValueError("reps must be at least 1")
    est = as_estimator(estimator) if estimator is not None \
        else as_estimator(EstimatorSpec("block", lam))
    layout = truth.layout
    m = truth.row_null_counts()
    null_idx = np.flatnonzero(truth.labels == 0)
    off = layout.offsets()
    rows_with_nulls = [i for i in range(layout.n_blocks) if m[i] > 0]

    totals = np.zeros(reps)
    for rep in range(reps):
        rng = np.random.Generator(np.random.Philox(key=[int(seed), int(rep)]))
        vals = np.zeros(layout.n)
        vals[null_idx] = rng.random(null_idx.size)
        acc = 0.0
        for i in rows_with_nulls:
            zeroed = vals.copy()
            zeroed[off[i]:off[i + 1]] = 0.0
            acc += m[i] / float(est(PValueMatrix(layout, zeroed)))
        totals[rep] = acc
    mean = float(np.mean(totals))
    se = float(np.std(totals, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return mean, se


def binomial_inverse_moment(nn: int, theta: float) -> float:
    """E[1 / (1 + X)] for X ~ Binomial(nn, theta), in closed form.

    Equals [1 - (1 - theta)^(nn + 1)] / ((nn + 1) * theta).  The
    degenerate theta = 0 case is returned as its limit 1.
    """
    nn = int(nn)
    if nn < 0:
        raise ValueError("binomial size must be nonnegative")
    theta = float(theta)
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if theta == 0.0 or nn == 0:
        return 1.0
    return (1.0 - (1.0 - theta) ** (nn + 1)) / ((nn + 1) * theta)


def balanced_rearrangement(A) -> np.ndarray:
    """Move each row's ones so that column sums differ by at most one.

    Row sums are preserved (ones only move within their own row).  Rows
    are processed in order, each assigning its ones to the currently
    least-filled columns, lowest index first; this keeps the column
    loads within a window of one at every step.
    """
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError("expected a two-dimensional matrix")
    if not np.all((A == 0) | (A == 1)):
        raise ValueError("entries must be 0 or 1")
    p, q = A.shape
    loads = np.zeros(q, dtype=np.int64)
    out = np.zeros((p, q), dtype=A.dtype)
    for i in range(p):
        k = int(A[i].sum())
        if k:
            order = np.lexsort((np.arange(q), loads))
            cols = order[:k]
            out[i, cols] = 1
            loads[cols] += 1
    return out


def lemma2_f(x):
    """The admissible-lambda curve (2x + 3)^(-2 / (x + 2)) for x >= 0."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0.0):
        raise ValueError("x must be nonnegative")
    if arr.ndim == 0:
        xf = float(arr)
        return (2.0 * xf + 3.0) ** (-2.0 / (xf + 2.0))
    return np.power(2.0 * arr + 3.0, -2.0 / (arr + 2.0))


def grid_monotonicity_check(lo: float = 0.0, hi: float = 200.0,
                            step: float = 0.01) -> bool:
    """Grid check: nondecreasing on [1, hi], below f(1) on [lo, 1]."""
    if not (0.0 <= lo < hi and step > 0.0):
        raise ValueError("need 0 <= lo < hi and step > 0")
    xs = np.arange(lo, hi + step / 2.0, step)
    fs = lemma2_f(xs)
    upper = xs >= 1.0
    if upper.sum() >= 2 and np.any(np.diff(fs[upper]) < 0.0):
        return False
    lower = xs <= 1.0
    # 1e-15 slack absorbs the ULP difference between scalar and vector pow
    if np.any(fs[lower] > lemma2_f(1.0) + 1e-15):
        return False
    return True


_BRUTE_FORCE_CAP = 20


def brute_force_procedure(
    pvals: PValueMatrix,
    alpha: float,
    method: str,
    lam: float | None = None,
    estimator_kind: str = "block",
) -> frozenset:
    """Literal re-implementation of the block procedures, for testing.

    Everything is computed from plain Python lists with exhaustive
    scans and no code shared with the production implementations.
    Capped at 20 hypotheses.
    """
    layout = pvals.layout
    if layout.n > _BRUTE_FORCE_CAP:
        raise ValueError(f"brute-force oracle capped at n = {_BRUTE_FORCE_CAP}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    rows = [[float(v) for v in pvals.row(i)] for i in range(layout.n_blocks)]
    b = len(rows)
    n = sum(len(r) for r in rows)

    if method == "two-stage-bh":
        sbar = n / b
        pt = [sbar * min(r) for r in rows]
        pt_sorted = sorted(pt)
        big = 0
        for i in range(1, b + 1):
            if pt_sorted[i - 1] <= (i * alpha) / b:
                big = i
        if big == 0:
            return frozenset()
        out = []
        for i in range(b):
            for j in range(len(rows[i])):
                if pt[i] <= pt_sorted[big - 1] and rows[i][j] <= (big * alpha) / n:
                    out.append((i, j))
        return frozenset(out)

    if method in ("adaptive-bh", "adaptive-bonferroni"):
        if lam is None or not 0.0 < lam < 1.0:
            raise ValueError("adaptive methods need lambda in (0, 1)")
        count = 0
        for r in rows:
            for v in r:
                if v <= lam:
                    count += 1
        smax = max(len(r) for r in rows)
        add = smax if estimator_kind == "block" else 1
        nhat = (n - count + add) / (1.0 - lam)

        if method == "adaptive-bonferroni":
            out = []
            for i in range(b):
                for j in range(len(rows[i])):
                    if rows[i][j] <= alpha / nhat:
                        out.append((i, j))
            return frozenset(out)

        pihat = nhat / n
        sbar = n / b
        qt = [pihat * (sbar * min(r)) for r in rows]
        qt_sorted = sorted(qt)
        big = 0
        for i in range(1, b + 1):
            if qt_sorted[i - 1] <= (i * alpha) / b:
                big = i
        if big == 0:
            return frozenset()
        out = []
        for i in range(b):
            for j in range(len(rows[i])):
                if qt[i] <= qt_sorted[big - 1] and \
                        pihat * rows[i][j] <= (big * alpha) / n:
                    out.append((i, j))
        return frozenset(out)

    raise ValueError(f"unknown method {method!r}")


# ----------------------------------------------------------------------
# Report-style checks driven by the CLI and the acceptance suite.
# Each returns (passed, details dict).
# ----------------------------------------------------------------------

def _rectangular_truth(b: int, smax: int, null_counts) -> TruthAssignment:
    labels = np.ones(b * smax, dtype=np.int8)
    for i, mi in enumerate(null_counts):
        labels[i * smax:i * smax + mi] = 0
    return TruthAssignment(BlockLayout.equal_blocks(b * smax, smax), labels)


def check_certification(max_b: int = 12, max_smax: int = 4,
                        tol: float = 1e-12) -> tuple[bool, dict]:
    """Exhaustive certification of the block estimator at the threshold.

    The exact sum depends only on (b, s_max, per-row null counts), so
    rectangular layouts with every multiset of per-row counts cover all
    layouts with s_i <= max_smax.  Checked at the admissible threshold
    and 0.05 above it.
    """
    worst = 0.0
    worst_case = None
    cases = 0
    failures = 0
    for b in range(1, max_b + 1):
        lam0 = lambda_threshold(b)
        lams = [lam0]
        if lam0 + 0.05 < 1.0:
            lams.append(lam0 + 0.05)
        for smax in range(1, max_smax + 1):
            for counts in combinations_with_replacement(range(smax + 1), b):
                truth = _rectangular_truth(b, smax, counts)
                for lam in lams:
                    lhs = property1_lhs_exact(truth, lam)
                    cases += 1
                    if lhs > worst:
                        worst = lhs
                        worst_case = {"b": b, "smax": smax,
                                      "null_counts": counts, "lambda": lam}
                    if lhs > 1.0 + tol:
                        failures += 1
    return failures == 0, {
        "cases": cases,
        "failures": failures,
        "worst_lhs": worst,
        "worst_case": worst_case,
        "tolerance": tol,
    }


def check_rearrangement(instances: int = 1000, seed: int = 0) -> tuple[bool, dict]:
    """Random binary matrices: row sums preserved, column sums balanced."""
    rng = np.random.Generator(np.random.Philox(key=[int(seed), 0]))
    bad = 0
    for _ in range(instances):
        p = int(rng.integers(1, 9))
        q = int(rng.integers(1, 9))
        A = (rng.random((p, q)) < rng.random()).astype(np.int64)
        B = balanced_rearrangement(A)
        m = int(A.sum())
        lo = m // q
        col = B.sum(axis=0)
        ok = (
            np.array_equal(A.sum(axis=1), B.sum(axis=1))
            and int(B.sum()) == m
            and np.all((col == lo) | (col == lo + 1))
        )
        if not ok:
            bad += 1
    return bad == 0, {"instances": instances, "failures": bad}


def check_inverse_moment_identity(max_n: int = 60, tol: float = 1e-12) -> tuple[bool, dict]:
    """Closed form against an independent exact-coefficient pmf sum."""
    thetas = [0.001, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.999, 1.0]
    worst = 0.0
    for nn in range(max_n + 1):
        for theta in thetas:
            direct = sum(
                math.comb(nn, k) * theta**k * (1.0 - theta) ** (nn - k) / (1 + k)
                for k in range(nn + 1)
            )
            err = abs(binomial_inverse_moment(nn, theta) - direct)
            worst = max(worst, err)
    return worst <= tol, {"max_n": max_n, "worst_error": worst, "tolerance": tol}


def check_lambda_curve(hi: float = 200.0, step: float = 0.01) -> tuple[bool, dict]:
    ok = grid_monotonicity_check(0.0, hi, step)
    return ok, {"hi": hi, "step": step,
                "f_at_1": lemma2_f(1.0), "f_at_hi": lemma2_f(hi)}


def _random_instance(rng):
    sizes = tuple(int(rng.integers(1, 4)) for _ in range(int(rng.integers(1, 5))))
    layout = BlockLayout(sizes)
    p = rng.random(layout.n)
    # sprinkle exact boundary values to exercise the tie handling
    zero_mask = rng.random(layout.n) < 0.05
    one_mask = rng.random(layout.n) < 0.05
    p[zero_mask] = 0.0
    p[one_mask & ~zero_mask] = 1.0
    return PValueMatrix(layout, p)


def check_procedure_oracles(instances: int = 1000, seed: int = 0) -> tuple[bool, dict]:
    """Production procedures against the brute-force oracle."""
    rng = np.random.Generator(np.random.Philox(key=[int(seed), 1]))
    mismatches = {"two-stage-bh": 0, "adaptive-bh": 0, "adaptive-bonferroni": 0}
    for _ in range(instances):
        pvals = _random_instance(rng)
        alpha = float(rng.uniform(0.01, 0.3))
        lam = float(rng.uniform(0.05, 0.95))
        kind = "block" if rng.random() < 0.5 else "storey"
        spec = EstimatorSpec(kind, lam)

        if two_stage_bh(pvals, alpha).rejected != \
                brute_force_procedure(pvals, alpha, "two-stage-bh"):
            mismatches["two-stage-bh"] += 1
        if adaptive_bh(pvals, alpha, spec).rejected != \
                brute_force_procedure(pvals, alpha, "adaptive-bh", lam, kind):
            mismatches["adaptive-bh"] += 1
        if adaptive_bonferroni(pvals, alpha, spec).rejected != \
                brute_force_procedure(pvals, alpha, "adaptive-bonferroni", lam, kind):
            mismatches["adaptive-bonferroni"] += 1
    ok = not any(mismatches.values())
    return ok, {"instances": instances, "mismatches": mismatches}
