"""Batch decision kernels for the Monte Carlo engine.

Given a batch of p-value vectors (one row per replication, equal block
sizes), these kernels count rejections, false rejections and true
positives for each requested method.  Two interchangeable backends are
provided: numba-compiled per-replication loops (parallel over rows) and
a vectorized pure-numpy path.  Both evaluate the same IEEE expressions
on the same input bits, so their outputs are identical; the numpy path
is selected automatically when numba is unavailable or when the
``BLOCKFDR_NO_NUMBA`` environment variable is set to a non-empty value
other than ``0``.

Method codes: 0 BH, 1 adBH1, 2 adBH2, 3 adBH3 (BKY), 4 tsBH, 5 Bonf,
6 adBon1, 7 adBon2.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    numba = None
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap

    prange = range

_FLAG = os.environ.get("BLOCKFDR_NO_NUMBA", "")
NUMBA_ENABLED = _HAVE_NUMBA and _FLAG in ("", "0")

METHOD_CODES = {
    "BH": 0,
    "adBH1": 1,
    "adBH2": 2,
    "adBH3": 3,
    "tsBH": 4,
    "Bonf": 5,
    "adBon1": 6,
    "adBon2": 7,
}

ADAPTIVE_METHODS = frozenset({"adBH1", "adBH2", "adBon1", "adBon2"})


def active_backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def set_worker_cap(threads: int) -> None:
    """Cap the numba thread pool; no-op on the numpy backend."""
    if threads < 1:
        raise ValueError("thread cap must be at least 1")
    if NUMBA_ENABLED:
        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))


# ----------------------------------------------------------------------
# numba backend
# ----------------------------------------------------------------------

@njit(cache=True)
def _stepup_count(sorted_vals, coef, denom):
    # largest i with sorted_vals[i-1] <= (i*coef)/denom, else 0
    for i in range(sorted_vals.shape[0], 0, -1):
        if sorted_vals[i - 1] <= (i * coef) / denom:
            return i
    return 0


@njit(cache=True)
def _count_flat(p, h0, thr):
    v = 0
    r = 0
    t = 0
    for j in range(p.shape[0]):
        if p[j] <= thr:
            r += 1
            if h0[j]:
                v += 1
            else:
                t += 1
    return v, r, t


@njit(cache=True)
def _count_blocked(p, h0, s, ptilde, scale, block_thr, value_thr):
    v = 0
    r = 0
    t = 0
    for i in range(ptilde.shape[0]):
        if scale * ptilde[i] <= block_thr:
            for j in range(s):
                k = i * s + j
                if scale * p[k] <= value_thr:
                    r += 1
                    if h0[k]:
                        v += 1
                    else:
                        t += 1
    return v, r, t


@njit(cache=True)
def _rep_counts(p, h0, s, alpha, lam, codes, v_out, r_out, t_out):
    n = p.shape[0]
    b = n // s
    s_bar = n / b
    p_sorted = np.sort(p)

    ptilde = np.empty(b)
    for i in range(b):
        m = p[i * s]
        for j in range(1, s):
            x = p[i * s + j]
            if x < m:
                m = x
        ptilde[i] = s_bar * m
    pt_sorted = np.sort(ptilde)

    rlam = 0
    if lam == lam:  # skip when lam is nan (no adaptive method requested)
        for j in range(n):
            if p[j] <= lam:
                rlam += 1

    for mi in range(codes.shape[0]):
        code = codes[mi]
        v = 0
        r = 0
        t = 0
        if code == 0:  # linear step-up on the flat vector
            rr = _stepup_count(p_sorted, alpha, n)
            if rr > 0:
                v, r, t = _count_flat(p, h0, p_sorted[rr - 1])
        elif code == 1 or code == 2:  # adaptive two-stage
            add = 1.0 if code == 1 else float(s)
            nhat = (n - rlam + add) / (1.0 - lam)
            pihat = nhat / n
            qt_sorted = pihat * pt_sorted
            bsig = _stepup_count(qt_sorted, alpha, b)
            if bsig > 0:
                v, r, t = _count_blocked(
                    p, h0, s, ptilde, pihat,
                    qt_sorted[bsig - 1], (bsig * alpha) / n,
                )
        elif code == 3:  # two-stage flat adaptive (BKY)
            ap = alpha / (1.0 + alpha)
            r1 = _stepup_count(p_sorted, ap, n)
            if r1 == n:
                v, r, t = _count_flat(p, h0, 2.0)
            elif r1 > 0:
                r2 = _stepup_count(p_sorted, ap, n - r1)
                v, r, t = _count_flat(p, h0, p_sorted[r2 - 1])
        elif code == 4:  # two-stage on blocks, non-adaptive
            bsig = _stepup_count(pt_sorted, alpha, b)
            if bsig > 0:
                v, r, t = _count_blocked(
                    p, h0, s, ptilde, 1.0,
                    pt_sorted[bsig - 1], (bsig * alpha) / n,
                )
        elif code == 5:  # single-step
            v, r, t = _count_flat(p, h0, alpha / n)
        else:  # 6, 7: adaptive single-step
            add = 1.0 if code == 6 else float(s)
            nhat = (n - rlam + add) / (1.0 - lam)
            v, r, t = _count_flat(p, h0, alpha / nhat)
        v_out[mi] = v
        r_out[mi] = r
        t_out[mi] = t


@njit(parallel=True, cache=True)
def _counts_numba(P, h0, s, alpha, lam, codes, V, R, T):
    for row in prange(P.shape[0]):
        _rep_counts(P[row], h0, s, alpha, lam, codes, V[row], R[row], T[row])


# ----------------------------------------------------------------------
# numpy backend
# ----------------------------------------------------------------------

def _stepup_count_np(sorted_vals, coef, denom):
    k = sorted_vals.shape[1]
    idx = np.arange(1, k + 1, dtype=np.int64)
    if np.ndim(denom) == 0:
        crit = (idx * coef) / denom
    else:
        crit = (idx * coef) / np.asarray(denom)[:, None]
    ok = sorted_vals <= crit
    rev = ok[:, ::-1]
    first = rev.argmax(axis=1)
    return np.where(ok.any(axis=1), k - first, 0).astype(np.int64)


def _count_flat_np(P, h0, thr):
    rej = P <= thr[:, None]
    r = rej.sum(axis=1)
    v = (rej & h0).sum(axis=1)
    return v, r, r - v


def _count_blocked_np(P, h0, b, s, Pt, scale, block_thr, value_thr):
    keep_block = (scale * Pt) <= block_thr[:, None]
    keep_value = (scale * P) <= value_thr[:, None]
    rej = keep_block[:, :, None] & keep_value.reshape(len(P), b, s)
    r = rej.sum(axis=(1, 2))
    v = (rej & h0.reshape(b, s)).sum(axis=(1, 2))
    return v, r, r - v


def _counts_numpy(P, h0, s, alpha, lam, codes):
    reps, n = P.shape
    b = n // s
    s_bar = n / b
    m = len(codes)
    P_sorted = np.sort(P, axis=1)
    Pt = s_bar * P.reshape(reps, b, s).min(axis=2)
    Pt_sorted = np.sort(Pt, axis=1)
    rlam = (P <= lam).sum(axis=1) if lam == lam else np.zeros(reps, np.int64)
    rows = np.arange(reps)

    V = np.empty((reps, m), np.int64)
    R = np.empty((reps, m), np.int64)
    T = np.empty((reps, m), np.int64)
    for mi, code in enumerate(codes):
        if code == 0:
            rr = _stepup_count_np(P_sorted, alpha, n)
            thr = np.where(rr > 0, P_sorted[rows, np.maximum(rr, 1) - 1], -1.0)
            v, r, t = _count_flat_np(P, h0, thr)
        elif code in (1, 2):
            add = 1.0 if code == 1 else float(s)
            nhat = (n - rlam + add) / (1.0 - lam)
            pihat = nhat / n
            qt_sorted = pihat[:, None] * Pt_sorted
            bsig = _stepup_count_np(qt_sorted, alpha, b)
            has = bsig > 0
            block_thr = np.where(has, qt_sorted[rows, np.maximum(bsig, 1) - 1], -1.0)
            value_thr = np.where(has, (bsig * alpha) / n, -1.0)
            v, r, t = _count_blocked_np(
                P, h0, b, s, Pt, pihat[:, None], block_thr, value_thr
            )
        elif code == 3:
            ap = alpha / (1.0 + alpha)
            r1 = _stepup_count_np(P_sorted, ap, n)
            mid = (r1 > 0) & (r1 < n)
            denom = np.where(mid, n - r1, 1)
            r2 = _stepup_count_np(P_sorted, ap, denom)
            thr = np.where(mid, P_sorted[rows, np.maximum(r2, 1) - 1], -1.0)
            thr = np.where(r1 == n, 2.0, thr)
            v, r, t = _count_flat_np(P, h0, thr)
        elif code == 4:
            bsig = _stepup_count_np(Pt_sorted, alpha, b)
            has = bsig > 0
            block_thr = np.where(has, Pt_sorted[rows, np.maximum(bsig, 1) - 1], -1.0)
            value_thr = np.where(has, (bsig * alpha) / n, -1.0)
            v, r, t = _count_blocked_np(P, h0, b, s, Pt, 1.0, block_thr, value_thr)
        elif code == 5:
            thr = np.full(reps, alpha / n)
            v, r, t = _count_flat_np(P, h0, thr)
        else:
            add = 1.0 if code == 6 else float(s)
            nhat = (n - rlam + add) / (1.0 - lam)
            v, r, t = _count_flat_np(P, h0, alpha / nhat)
        V[:, mi] = v
        R[:, mi] = r
        T[:, mi] = t
    return V, R, T


# ----------------------------------------------------------------------
# dispatch
# ----------------------------------------------------------------------

def batch_counts(P, h0, s, alpha, lam, methods, backend=None):
    """Per-replication (V, R, T) counts for each method.

    Parameters
    ----------
    P : (reps, n) float64 array of p-values, blocks of size ``s`` laid
        out contiguously within each row.
    h0 : (n,) bool array, True where the null hypothesis is true.
    lam : estimator tuning parameter, or nan when no adaptive method is
        requested.
    methods : sequence of method names from ``METHOD_CODES``.
    backend : "numba", "numpy" or None for the module default.
    """
    P = np.ascontiguousarray(P, dtype=np.float64)
    h0 = np.ascontiguousarray(h0, dtype=np.bool_)
    codes = np.array([METHOD_CODES[name] for name in methods], dtype=np.int64)
    if P.ndim != 2 or P.shape[1] != h0.shape[0]:
        raise ValueError("P must be (reps, n) with n matching the truth mask")
    if P.shape[1] % s != 0:
        raise ValueError("block size must divide the row length")
    if backend is None:
        backend = active_backend()
    if backend == "numba":
        if not NUMBA_ENABLED:
            raise RuntimeError("numba backend requested but not available")
        reps, m = P.shape[0], len(codes)
        V = np.empty((reps, m), np.int64)
        R = np.empty((reps, m), np.int64)
        T = np.empty((reps, m), np.int64)
        _counts_numba(P, h0, np.int64(s), float(alpha), float(lam), codes, V, R, T)
        return V, R, T
    if backend == "numpy":
        return _counts_numpy(P, h0, int(s), float(alpha), float(lam), codes)
    raise ValueError(f"unknown backend {backend!r}")
