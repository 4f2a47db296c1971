"""Domain types and generic multiple-testing machinery.

Hypotheses are organized in non-overlapping blocks: block ``i`` holds
``s_i`` hypotheses, and a flat, block-major index order is used
everywhere (block 0 first, within-block positions in order).  The
step-up and single-step tests here are the building blocks for the
block-aware procedures in :mod:`blockfdr.procedures`.

All comparisons against critical constants are non-strict (``<=``), so
tied p-values are rejected or retained together and p-values equal to
exactly 0 or 1 are legal inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "BlockLayout",
    "PValueMatrix",
    "TruthAssignment",
    "TestOutcome",
    "stepup",
    "bh",
    "bonferroni",
    "false_rejections",
]


@dataclass(frozen=True)
class BlockLayout:
    """Block sizes ``s_1..s_b`` plus the derived totals.

    Attributes
    ----------
    sizes : tuple of int
        Positive block sizes, one per block.
    """

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) == 0:
            raise ValueError("layout needs at least one block")
        if any(s < 1 for s in sizes):
            raise ValueError("block sizes must be positive integers")
        object.__setattr__(self, "sizes", sizes)

    @property
    def n(self) -> int:
        """Total number of hypotheses."""
        return sum(self.sizes)

    @property
    def n_blocks(self) -> int:
        return len(self.sizes)

    @property
    def max_size(self) -> int:
        return max(self.sizes)

    @property
    def mean_size(self) -> float:
        """Average block size n / b."""
        return self.n / self.n_blocks

    def offsets(self) -> np.ndarray:
        """Flat start offset of each block, plus the total as last entry."""
        return np.concatenate(([0], np.cumsum(self.sizes)))

    @classmethod
    def equal_blocks(cls, n: int, s: int) -> "BlockLayout":
        """Layout of ``n`` hypotheses in blocks of common size ``s``."""
        if n % s != 0:
            raise ValueError(f"block size {s} does not divide n={n}")
        return cls((s,) * (n // s))


def _flatten_rows(rows: Iterable[Sequence[float]]) -> tuple[BlockLayout, np.ndarray]:
    rows = [np.asarray(r, dtype=np.float64) for r in rows]
    if any(r.ndim != 1 for r in rows):
        raise ValueError("each block must be a one-dimensional sequence")
    layout = BlockLayout(tuple(r.size for r in rows))
    return layout, np.concatenate(rows) if rows else np.empty(0)


@dataclass(frozen=True)
class PValueMatrix:
    """Ragged matrix of p-values conforming to a :class:`BlockLayout`.

    Values are stored flat in block-major order.
    """

    layout: BlockLayout
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size != self.layout.n:
            raise ValueError(
                f"expected {self.layout.n} p-values for this layout, got {v.size}"
            )
        if np.any(v < 0.0) or np.any(v > 1.0) or not np.all(np.isfinite(v)):
            raise ValueError("p-values must lie in [0, 1]")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]]) -> "PValueMatrix":
        layout, flat = _flatten_rows(rows)
        return cls(layout, flat)

    def row(self, i: int) -> np.ndarray:
        off = self.layout.offsets()
        return self.values[off[i]:off[i + 1]]

    def rows(self) -> Iterator[np.ndarray]:
        off = self.layout.offsets()
        for i in range(self.layout.n_blocks):
            yield self.values[off[i]:off[i + 1]]


@dataclass(frozen=True)
class TruthAssignment:
    """Ground-truth labels: 0 marks a true null, 1 a false null."""

    layout: BlockLayout
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.asarray(self.labels, dtype=np.int8)
        if h.ndim != 1 or h.size != self.layout.n:
            raise ValueError(
                f"expected {self.layout.n} labels for this layout, got {h.size}"
            )
        if not np.all((h == 0) | (h == 1)):
            raise ValueError("labels must be 0 (true null) or 1 (false null)")
        h.flags.writeable = False
        object.__setattr__(self, "labels", h)

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[int]]) -> "TruthAssignment":
        layout, flat = _flatten_rows(rows)
        return cls(layout, flat.astype(np.int8))

    @property
    def n_true_nulls(self) -> int:
        return int(np.sum(self.labels == 0))

    @property
    def pi0(self) -> float:
        """Proportion of true nulls."""
        return self.n_true_nulls / self.layout.n

    def row_null_counts(self) -> np.ndarray:
        """Number of true nulls in each block."""
        off = self.layout.offsets()
        return np.array(
            [int(np.sum(self.labels[off[i]:off[i + 1]] == 0))
             for i in range(self.layout.n_blocks)]
        )


@dataclass(frozen=True)
class TestOutcome:
    """Result of applying a multiple-testing procedure to one matrix.

    Attributes
    ----------
    rejected : frozenset of (block, within-block) index pairs
        Rejected hypotheses, 0-based.
    n_rejected : int
        Total rejections (``len(rejected)``).
    n_significant_blocks : int
        Number of blocks passed by the block-level step-up stage; 0 for
        procedures without a block stage.
    estimator_value : float or None
        The null-count estimate used, when the procedure is adaptive.
    """

    rejected: frozenset
    n_rejected: int
    n_significant_blocks: int = 0
    estimator_value: float | None = None

    def __post_init__(self):
        if self.n_rejected != len(self.rejected):
            raise ValueError("n_rejected must equal len(rejected)")


def _validated_pvalues(pvals) -> np.ndarray:
    p = np.asarray(pvals, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("p-values must form a non-empty one-dimensional sequence")
    return p


def stepup(pvals, critical_constants) -> frozenset:
    """Generic step-up test.

    With ordered p-values ``P_(1) <= ... <= P_(n)`` and nondecreasing
    constants ``a_1 <= ... <= a_n`` in [0, 1], let
    ``R = max{i : P_(i) <= a_i}``.  Every hypothesis whose p-value is at
    most ``P_(R)`` is rejected; if no such maximum exists nothing is.

    Returns the set of rejected flat indices.
    """
    p = _validated_pvalues(pvals)
    crit = np.asarray(critical_constants, dtype=np.float64)
    if crit.shape != p.shape:
        raise ValueError(
            f"length mismatch: {p.size} p-values vs {crit.size} critical constants"
        )
    if np.any(crit < 0.0) or np.any(crit > 1.0):
        raise ValueError("critical constants must lie in [0, 1]")
    if np.any(np.diff(crit) < 0.0):
        raise ValueError("critical constants must be nondecreasing")

    p_sorted = np.sort(p)
    passing = np.flatnonzero(p_sorted <= crit)
    if passing.size == 0:
        return frozenset()
    threshold = p_sorted[passing[-1]]
    return frozenset(np.flatnonzero(p <= threshold).tolist())


def _validated_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def bh(pvals, alpha: float) -> frozenset:
    """Step-up test with the linear critical constants ``i * alpha / n``."""
    p = _validated_pvalues(pvals)
    alpha = _validated_alpha(alpha)
    n = p.size
    crit = np.arange(1, n + 1) * alpha / n
    return stepup(p, crit)


def bonferroni(pvals, alpha: float) -> frozenset:
    """Single-step test at the constant ``alpha / n``."""
    p = _validated_pvalues(pvals)
    alpha = _validated_alpha(alpha)
    threshold = alpha / p.size
    return frozenset(np.flatnonzero(p <= threshold).tolist())


def false_rejections(outcome: TestOutcome, truth: TruthAssignment) -> int:
    """Count rejections of true nulls (V)."""
    off = truth.layout.offsets()
    v = 0
    for (i, j) in outcome.rejected:
        if not (0 <= i < truth.layout.n_blocks and 0 <= j < truth.layout.sizes[i]):
            raise ValueError(f"rejected index ({i}, {j}) is outside the layout")
        if truth.labels[off[i] + j] == 0:
            v += 1
    return v
