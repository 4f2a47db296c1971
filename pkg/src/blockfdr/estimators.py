"""Estimators for the number of true null hypotheses.

Both estimators count the p-values above a tuning parameter ``lambda``
and rescale; the block-aware variant replaces Storey's ``+1`` correction
with ``+s_max`` so that the estimate stays valid when p-values are
dependent within blocks.  ``lambda_threshold`` gives the smallest
``lambda`` for which the block estimator certifiably keeps the adaptive
procedures' error control.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .core import PValueMatrix

__all__ = [
    "EstimatorSpec",
    "r_lambda",
    "n0_storey",
    "n0_block",
    "lambda_threshold",
]

ESTIMATOR_KINDS = ("storey", "block")


@dataclass(frozen=True)
class EstimatorSpec:
    """Named null-count estimator with its tuning parameter."""

    kind: str
    lam: float

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")


# Procedures accept either a spec or any callable PValueMatrix -> float,
# e.g. a constant estimator used to recover the non-adaptive methods.
EstimatorLike = Union[EstimatorSpec, Callable[[PValueMatrix], float]]


def _validated_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    return lam


def r_lambda(pvals: PValueMatrix, lam: float) -> int:
    """Number of p-values in the matrix not exceeding ``lam``."""
    lam = _validated_lambda(lam)
    return int(np.sum(pvals.values <= lam))


def n0_storey(pvals: PValueMatrix, lam: float) -> float:
    """Storey-type estimate (n - R(lambda) + 1) / (1 - lambda)."""
    lam = _validated_lambda(lam)
    return (pvals.layout.n - r_lambda(pvals, lam) + 1) / (1.0 - lam)


def n0_block(pvals: PValueMatrix, lam: float) -> float:
    """Block-aware estimate (n - R(lambda) + s_max) / (1 - lambda).

    Strictly positive and nondecreasing in every entry of the matrix;
    deliberately not clamped to [1, n], so values above n are possible
    and simply make the adaptive procedures more conservative.
    """
    lam = _validated_lambda(lam)
    layout = pvals.layout
    return (layout.n - r_lambda(pvals, lam) + layout.max_size) / (1.0 - lam)


def lambda_threshold(b: int) -> float:
    """Smallest admissible lambda for the block estimator, (2b+3)^(-2/(b+2)).

    Strictly inside (0, 1) and nondecreasing in the block count ``b``.
    Smaller lambdas may still behave well empirically but carry no
    finite-sample guarantee.
    """
    b = int(b)
    if b < 1:
        raise ValueError(f"block count must be at least 1, got {b}")
    return float((2 * b + 3) ** (-2.0 / (b + 2)))


def as_estimator(est: EstimatorLike) -> Callable[[PValueMatrix], float]:
    """Normalize an estimator spec or callable to a callable."""
    if isinstance(est, EstimatorSpec):
        fn = n0_storey if est.kind == "storey" else n0_block
        lam = est.lam
        return lambda pvals: fn(pvals, lam)
    if callable(est):
        return est
    raise TypeError(f"not an estimator: {est!r}")
