"""Block-aware multiple-testing procedures.

The two-stage procedure first screens blocks with a step-up test on
Bonferroni-adjusted within-block minima, then rejects individual
hypotheses inside the surviving blocks at a threshold proportional to
the number of significant blocks.  The adaptive variants shrink every
p-value by the estimated true-null proportion before both stages, and
the adaptive single-step procedure simply tests each p-value against
``alpha`` divided by the estimated null count.

All procedures are pure functions; ties are handled by the non-strict
comparisons and need no extra tie-breaking.
"""

from __future__ import annotations

import numpy as np

from .core import PValueMatrix, TestOutcome, _validated_alpha, _validated_pvalues
from .estimators import EstimatorLike, as_estimator

__all__ = [
    "block_pvalues",
    "two_stage_bh",
    "adaptive_bh",
    "adaptive_bonferroni",
    "bky_adaptive_bh",
]


def block_pvalues(pvals: PValueMatrix) -> np.ndarray:
    """Per-block p-values: mean block size times the within-block minimum.

    Entries may exceed 1 when the scaled minimum does; they are used
    only relative to step-up constants, so no truncation is applied.
    """
    s_bar = pvals.layout.mean_size
    mins = np.array([row.min() for row in pvals.rows()])
    return s_bar * mins


def _stepup_index(sorted_vals: np.ndarray, alpha: float, denom: int) -> int:
    """Largest i with sorted_vals[i-1] <= i*alpha/denom, or 0."""
    k = sorted_vals.size
    crit = np.arange(1, k + 1) * alpha / denom
    passing = np.flatnonzero(sorted_vals <= crit)
    return int(passing[-1]) + 1 if passing.size else 0


def _collect(pvals: PValueMatrix, keep_block, keep_value) -> frozenset:
    out = []
    off = pvals.layout.offsets()
    for i in range(pvals.layout.n_blocks):
        if not keep_block(i):
            continue
        for j in range(pvals.layout.sizes[i]):
            if keep_value(pvals.values[off[i] + j]):
                out.append((i, j))
    return frozenset(out)


def two_stage_bh(pvals: PValueMatrix, alpha: float) -> TestOutcome:
    """Two-stage step-up procedure on block p-values.

    Stage one finds ``B``, the step-up count of blocks whose scaled
    minimum p-value passes ``i * alpha / b``.  Stage two rejects every
    hypothesis whose block p-value is at most the B-th smallest one and
    whose own p-value is at most ``B * alpha / n``.  When no block
    passes, everything is accepted.
    """
    alpha = _validated_alpha(alpha)
    layout = pvals.layout
    pt = block_pvalues(pvals)
    pt_sorted = np.sort(pt)
    b_sig = _stepup_index(pt_sorted, alpha, layout.n_blocks)
    if b_sig == 0:
        return TestOutcome(frozenset(), 0, 0)
    block_thr = pt_sorted[b_sig - 1]
    value_thr = b_sig * alpha / layout.n
    rejected = _collect(
        pvals,
        keep_block=lambda i: pt[i] <= block_thr,
        keep_value=lambda p: p <= value_thr,
    )
    return TestOutcome(rejected, len(rejected), b_sig)


def adaptive_bh(pvals: PValueMatrix, alpha: float, est: EstimatorLike) -> TestOutcome:
    """Adaptive version of :func:`two_stage_bh`.

    A single null-count estimate is taken from the full matrix; every
    p-value (individual and block-level) is scaled by the estimated
    null proportion before the two-stage rule runs.  The scaled values
    are deliberately left untruncated above 1.
    """
    alpha = _validated_alpha(alpha)
    layout = pvals.layout
    n0_hat = float(as_estimator(est)(pvals))
    if not (np.isfinite(n0_hat) and n0_hat > 0.0):
        raise ValueError(f"null-count estimate must be positive, got {n0_hat}")
    pi0_hat = n0_hat / layout.n

    qt = pi0_hat * block_pvalues(pvals)
    qt_sorted = np.sort(qt)
    b_sig = _stepup_index(qt_sorted, alpha, layout.n_blocks)
    if b_sig == 0:
        return TestOutcome(frozenset(), 0, 0, estimator_value=n0_hat)
    block_thr = qt_sorted[b_sig - 1]
    value_thr = b_sig * alpha / layout.n
    rejected = _collect(
        pvals,
        keep_block=lambda i: qt[i] <= block_thr,
        keep_value=lambda p: pi0_hat * p <= value_thr,
    )
    return TestOutcome(rejected, len(rejected), b_sig, estimator_value=n0_hat)


def adaptive_bonferroni(
    pvals: PValueMatrix, alpha: float, est: EstimatorLike
) -> TestOutcome:
    """Single-step test at ``alpha`` over the estimated null count."""
    alpha = _validated_alpha(alpha)
    n0_hat = float(as_estimator(est)(pvals))
    if not (np.isfinite(n0_hat) and n0_hat > 0.0):
        raise ValueError(f"null-count estimate must be positive, got {n0_hat}")
    threshold = alpha / n0_hat
    rejected = _collect(pvals, keep_block=lambda i: True,
                        keep_value=lambda p: p <= threshold)
    return TestOutcome(rejected, len(rejected), 0, estimator_value=n0_hat)


def bky_adaptive_bh(pvals, alpha: float) -> frozenset:
    """Two-stage adaptive step-up on a flat p-value list (no blocks).

    Stage one runs the linear step-up test at ``alpha' = alpha/(1+alpha)``
    giving ``r1`` rejections.  With ``r1 = 0`` nothing is rejected and
    with ``r1 = n`` everything is; otherwise the step-up test is rerun
    with constants ``i * alpha' / (n - r1)``.
    """
    p = _validated_pvalues(pvals)
    alpha = _validated_alpha(alpha)
    n = p.size
    alpha_prime = alpha / (1.0 + alpha)

    p_sorted = np.sort(p)
    r1 = _stepup_index(p_sorted, alpha_prime, n)
    if r1 == 0:
        return frozenset()
    if r1 == n:
        return frozenset(range(n))
    # Stage-two constants may exceed 1; they are used as-is.
    r2 = _stepup_index(p_sorted, alpha_prime, n - r1)
    threshold = p_sorted[r2 - 1]
    return frozenset(np.flatnonzero(p <= threshold).tolist())
