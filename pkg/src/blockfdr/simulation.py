"""Monte Carlo engine for block-dependent multiple testing.

Data model: ``n`` z-scores split into blocks of common size ``s``, unit
variance, mean 0 under a true null and ``d`` under a false one, with
equicorrelation ``rho`` inside each block and independence across
blocks.  The correlation is realized exactly by a shared-factor
construction, ``X = mu + sqrt(rho) * Z_block + sqrt(1 - rho) * eps``,
so no covariance factorization is needed.  Two-sided p-values are
``2 * (1 - Phi(|X|))``.

Every replication draws from its own counter-based stream keyed by
``(seed, replication index)``, so results are bit-identical no matter
how work is chunked or which kernel backend runs the decisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from . import _kernels
from .core import BlockLayout, PValueMatrix, TruthAssignment
from ._kernels import ADAPTIVE_METHODS, METHOD_CODES

__all__ = [
    "SimConfig",
    "MethodStats",
    "SimReport",
    "truth_layout",
    "generate",
    "normal_cdf",
    "run_replications",
    "run_mc",
    "preset_grid",
    "PRESETS",
]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_CHUNK = 2048

KNOWN_METHODS = tuple(METHOD_CODES)
DEFAULT_RHO_GRID = tuple(i / 10 for i in range(10))
DEFAULT_SIGNAL_MEAN = math.sqrt(10.0)


def normal_cdf(x):
    """Standard normal CDF via the complementary error function.

    Absolute error is a few ULP (well below 1e-12).  Accepts scalars or
    arrays; rejects non-finite input.
    """
    if np.ndim(x) == 0:
        xf = float(x)
        if not math.isfinite(xf):
            raise ValueError(f"normal_cdf needs finite input, got {x}")
        return 0.5 * math.erfc(-xf * _INV_SQRT2)
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("normal_cdf needs finite input")
    return 0.5 * scipy.special.erfc(-arr * _INV_SQRT2)


def _two_sided_pvalues(x: np.ndarray) -> np.ndarray:
    # 2 * (1 - Phi(|x|)) folded into one erfc call
    return scipy.special.erfc(np.abs(x) * _INV_SQRT2)


@dataclass(frozen=True)
class SimConfig:
    """One simulation cell: data-generating parameters plus methods."""

    n: int
    n0: int
    s: int
    rho: float
    lam: float | None = None
    d: float = DEFAULT_SIGNAL_MEAN
    alpha: float = 0.05
    reps: int = 2000
    seed: int = 0
    methods: tuple[str, ...] = ("BH",)

    def __post_init__(self):
        if self.n < 1 or self.n % self.s != 0:
            raise ValueError(f"block size {self.s} must divide n={self.n}")
        if not 0 <= self.n0 <= self.n:
            raise ValueError(f"n0 must lie in [0, n], got {self.n0}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        methods = tuple(self.methods)
        unknown = [m for m in methods if m not in METHOD_CODES]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {KNOWN_METHODS}")
        if not methods:
            raise ValueError("at least one method is required")
        needs_lam = [m for m in methods if m in ADAPTIVE_METHODS]
        if needs_lam:
            if self.lam is None:
                raise ValueError(f"methods {needs_lam} require lambda")
            if not 0.0 < self.lam < 1.0:
                raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        object.__setattr__(self, "methods", methods)

    @property
    def n_blocks(self) -> int:
        return self.n // self.s


@dataclass(frozen=True)
class MethodStats:
    """Monte Carlo estimates for one method within one configuration.

    Standard errors are sample standard deviation over replications
    divided by sqrt(reps); None when reps == 1.
    """

    method: str
    fdr: float
    fdr_se: float | None
    fwer: float
    fwer_se: float | None
    power: float
    power_se: float | None


@dataclass(frozen=True)
class SimReport:
    config: SimConfig
    stats: tuple[MethodStats, ...] = field(default=())


def truth_layout(n: int, n0: int, s: int) -> TruthAssignment:
    """Truth pattern used by the simulations.

    Blocks of even size with half the hypotheses null get their first
    ``s/2`` positions as true nulls.  The 240/120/3 configuration puts
    one true null in each of the first 40 blocks and two in each of the
    remaining 40.  Anything else deals the ``n0`` true nulls round-robin
    across blocks, earliest positions first.
    """
    if n < 1 or s < 1 or n % s != 0:
        raise ValueError(f"block size {s} must divide n={n}")
    if not 0 <= n0 <= n:
        raise ValueError(f"n0 must lie in [0, n], got {n0}")
    b = n // s
    if s % 2 == 0 and 2 * n0 == n:
        per_row = np.full(b, s // 2, dtype=np.int64)
    elif s == 3 and n == 240 and n0 == 120:
        per_row = np.array([1] * 40 + [2] * 40, dtype=np.int64)
    else:
        per_row = np.zeros(b, dtype=np.int64)
        remaining = n0
        while remaining > 0:
            for i in range(b):
                if remaining == 0:
                    break
                if per_row[i] < s:
                    per_row[i] += 1
                    remaining -= 1
    labels = np.ones(n, dtype=np.int8)
    for i in range(b):
        labels[i * s:i * s + per_row[i]] = 0
    return TruthAssignment(BlockLayout.equal_blocks(n, s), labels)


def generate(config: SimConfig, truth: TruthAssignment, rng) -> PValueMatrix:
    """Draw one replication of two-sided p-values.

    Consumes exactly ``n_blocks + n`` standard normals from ``rng`` (the
    shared block factors first).
    """
    n, s, rho = config.n, config.s, config.rho
    b = n // s
    z = rng.standard_normal(b)
    eps = rng.standard_normal(n)
    mu = np.where(truth.labels == 1, config.d, 0.0)
    x = mu + math.sqrt(rho) * np.repeat(z, s) + math.sqrt(1.0 - rho) * eps
    return PValueMatrix(truth.layout, _two_sided_pvalues(x))


def _rep_rng(seed: int, rep: int):
    return np.random.Generator(np.random.Philox(key=[int(seed), int(rep)]))


def run_replications(config: SimConfig, backend: str | None = None):
    """Raw per-replication counts.

    Returns ``(truth, V, R, T)`` where the arrays are (reps, n_methods)
    int64: false rejections, rejections, true positives, columns in
    ``config.methods`` order.
    """
    truth = truth_layout(config.n, config.n0, config.s)
    h0 = np.asarray(truth.labels == 0)
    reps = config.reps
    m = len(config.methods)
    lam = config.lam if config.lam is not None else math.nan

    V = np.empty((reps, m), np.int64)
    R = np.empty((reps, m), np.int64)
    T = np.empty((reps, m), np.int64)
    for start in range(0, reps, _CHUNK):
        stop = min(start + _CHUNK, reps)
        P = np.empty((stop - start, config.n))
        for k, rep in enumerate(range(start, stop)):
            P[k] = generate(config, truth, _rep_rng(config.seed, rep)).values
        v, r, t = _kernels.batch_counts(
            P, h0, config.s, config.alpha, lam, config.methods, backend=backend
        )
        V[start:stop] = v
        R[start:stop] = r
        T[start:stop] = t
    return truth, V, R, T


def _mean_se(values: np.ndarray) -> tuple[float, float | None]:
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, None
    se = float(np.std(values, ddof=1) / math.sqrt(values.size))
    return mean, se


def run_mc(config: SimConfig, backend: str | None = None) -> SimReport:
    """Estimate FDR, FWER and average power for every requested method.

    Per replication the accumulated statistics are V / max(R, 1), the
    indicator of V >= 1, and true positives over ``n - n0`` (0 when all
    hypotheses are null).  Output is bit-identical for identical
    (config, seed) regardless of worker count or backend.
    """
    _, V, R, T = run_replications(config, backend=backend)
    n_false = config.n - config.n0
    stats = []
    for mi, name in enumerate(config.methods):
        fdp = V[:, mi] / np.maximum(R[:, mi], 1)
        fwe = (V[:, mi] >= 1).astype(np.float64)
        if n_false > 0:
            pw = T[:, mi] / n_false
        else:
            pw = np.zeros(config.reps)
        fdr, fdr_se = _mean_se(fdp)
        fwer, fwer_se = _mean_se(fwe)
        power, power_se = _mean_se(pw)
        stats.append(MethodStats(name, fdr, fdr_se, fwer, fwer_se, power, power_se))
    return SimReport(config, tuple(stats))


PRESETS = {
    "fdr-figures": {
        "n": 240,
        "n0": 120,
        "s": (2, 3, 4, 6),
        "lam": (0.2, 0.5, 0.8),
        "rho": DEFAULT_RHO_GRID,
        "methods": ("BH", "adBH1", "adBH2", "adBH3"),
    },
    "fwer-figures": {
        "n": 100,
        "n0": 50,
        "s": (2, 4, 10, 20),
        "lam": (0.2, 0.5, 0.8),
        "rho": DEFAULT_RHO_GRID,
        "methods": ("Bonf", "adBon1", "adBon2"),
    },
}


def preset_grid(name: str, reps: int = 2000, seed: int = 0,
                alpha: float = 0.05) -> list[SimConfig]:
    """Configurations of a named preset, in (s, lambda, rho) order."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    spec = PRESETS[name]
    out = []
    for s in spec["s"]:
        for lam in spec["lam"]:
            for rho in spec["rho"]:
                out.append(SimConfig(
                    n=spec["n"], n0=spec["n0"], s=s, rho=rho, lam=lam,
                    alpha=alpha, reps=reps, seed=seed, methods=spec["methods"],
                ))
    return out
