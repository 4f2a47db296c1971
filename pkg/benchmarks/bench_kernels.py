"""Benchmark the numba decision kernels against the numpy fallback.

Runs the two simulation scales on identical inputs and reports wall
time per call for each backend.  Invoke from the repository root:

    python benchmarks/bench_kernels.py [--reps 2000] [--loops 5]

Set BLOCKFDR_NO_NUMBA=1 to confirm the engine itself falls back cleanly.
"""

import argparse
import time

import numpy as np

from blockfdr import _kernels
from blockfdr.simulation import SimConfig, generate, truth_layout


def _batch(cfg):
    truth = truth_layout(cfg.n, cfg.n0, cfg.s)
    P = np.empty((cfg.reps, cfg.n))
    for rep in range(cfg.reps):
        rng = np.random.Generator(np.random.Philox(key=[cfg.seed, rep]))
        P[rep] = generate(cfg, truth, rng).values
    return P, np.asarray(truth.labels == 0)


def _time(fn, loops):
    best = np.inf
    for _ in range(loops):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--loops", type=int, default=5)
    args = ap.parse_args()

    scenarios = [
        ("fdr scale  n=240 s=4", SimConfig(
            n=240, n0=120, s=4, rho=0.5, lam=0.5, reps=args.reps, seed=0,
            methods=("BH", "adBH1", "adBH2", "adBH3", "tsBH"))),
        ("fwer scale n=100 s=10", SimConfig(
            n=100, n0=50, s=10, rho=0.5, lam=0.8, reps=args.reps, seed=0,
            methods=("Bonf", "adBon1", "adBon2"))),
    ]

    print(f"backends: numba available = {_kernels.NUMBA_ENABLED}, "
          f"default = {_kernels.active_backend()}")
    for label, cfg in scenarios:
        P, h0 = _batch(cfg)
        run = lambda backend: _kernels.batch_counts(
            P, h0, cfg.s, cfg.alpha, cfg.lam, cfg.methods, backend=backend)
        t_np = _time(lambda: run("numpy"), args.loops)
        line = f"{label}  reps={cfg.reps}  numpy {t_np*1e3:8.2f} ms"
        if _kernels.NUMBA_ENABLED:
            run("numba")  # compile before timing
            t_nb = _time(lambda: run("numba"), args.loops)
            same = all(np.array_equal(a, b)
                       for a, b in zip(run("numba"), run("numpy")))
            line += f"  numba {t_nb*1e3:8.2f} ms  speedup {t_np/t_nb:5.2f}x" \
                    f"  identical={same}"
        print(line)


if __name__ == "__main__":
    main()
