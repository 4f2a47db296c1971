"""Command-line interface.

Subcommands: ``test`` analyzes a p-value file, ``simulate`` runs Monte
Carlo grids, ``verify`` runs the numerical verification checks and
``threshold`` prints the smallest admissible estimator lambda for a
block count.  Exit codes: 0 ok, 1 verification failure, 2 malformed
input file, 3 invalid parameters.

Input files are CSV with header ``block_id,hypothesis_id,p_value``;
blocks need not be contiguous and are ordered by first appearance.
Machine-readable output carries floats at 17 significant digits; human
summaries (on stderr) use 4.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from ._kernels import set_worker_cap
from .core import PValueMatrix, TestOutcome, bh, bonferroni
from .estimators import EstimatorSpec, lambda_threshold
from .procedures import adaptive_bh, adaptive_bonferroni, bky_adaptive_bh, two_stage_bh
from .simulation import (
    DEFAULT_RHO_GRID,
    DEFAULT_SIGNAL_MEAN,
    PRESETS,
    SimConfig,
    preset_grid,
    run_mc,
)
from . import verification

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_INPUT = 2
EXIT_PARAM = 3

SEED_ENV_VAR = "BLOCKFDR_SEED"

CSV_HEADER = [
    "method", "n", "n0", "s", "lambda", "rho", "alpha", "reps", "seed",
    "fdr", "fdr_se", "fwer", "fwer_se", "power", "power_se",
]

TEST_METHODS = (
    "bh", "bonferroni", "two-stage-bh", "adaptive-bh", "adaptive-bonferroni", "bky",
)


class InputError(Exception):
    """Malformed input file (message names the offending line)."""


class ParameterError(Exception):
    """Invalid parameter values."""


def _fmt(x) -> str:
    """Machine format: 17 significant digits, empty for missing."""
    if x is None:
        return ""
    return format(float(x), ".17g")


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    raw = os.environ.get(SEED_ENV_VAR, "0")
    try:
        return int(raw)
    except ValueError:
        raise ParameterError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")


def _resolve_alpha(args, settings: dict | None = None) -> float:
    if args.alpha is not None:
        return args.alpha
    if settings and "alpha" in settings:
        try:
            return float(settings["alpha"])
        except ValueError:
            raise ParameterError(f"cannot parse alpha={settings['alpha']!r}")
    return 0.05


# ----------------------------------------------------------------------
# test
# ----------------------------------------------------------------------

def read_pvalue_file(path: str):
    """Parse a p-value CSV into (PValueMatrix, per-block id rows)."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: line 1: empty file")
        if [h.strip() for h in header] != ["block_id", "hypothesis_id", "p_value"]:
            raise InputError(
                f"{path}: line 1: expected header block_id,hypothesis_id,p_value"
            )
        block_order: list[str] = []
        rows: dict[str, list] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            block_id, hyp_id, raw_p = (field.strip() for field in row)
            try:
                p = float(raw_p)
            except ValueError:
                raise InputError(f"{path}: line {lineno}: p_value {raw_p!r} is not a number")
            if not 0.0 <= p <= 1.0:
                raise InputError(f"{path}: line {lineno}: p_value {p} outside [0, 1]")
            if block_id not in rows:
                rows[block_id] = []
                block_order.append(block_id)
            rows[block_id].append((hyp_id, p))
        if not block_order:
            raise InputError(f"{path}: line 2: no data rows")
    pvals = PValueMatrix.from_rows(
        [[p for _, p in rows[bid]] for bid in block_order]
    )
    ids = [[(bid, hid) for hid, _ in rows[bid]] for bid in block_order]
    return pvals, ids


def _run_test_method(args, pvals: PValueMatrix):
    method = args.method
    alpha = _resolve_alpha(args)
    lam = args.lam
    if method in ("adaptive-bh", "adaptive-bonferroni"):
        if lam is None:
            raise ParameterError(f"method {method} requires --lambda")
        spec = EstimatorSpec(args.estimator, lam)
        thr = lambda_threshold(pvals.layout.n_blocks)
        if lam < thr:
            print(
                f"warning: lambda={lam:.4g} is below the admissible threshold "
                f"{thr:.4g} for b={pvals.layout.n_blocks}; error control is not "
                "certified at this value",
                file=sys.stderr,
            )
        fn = adaptive_bh if method == "adaptive-bh" else adaptive_bonferroni
        return fn(pvals, alpha, spec)
    if method == "two-stage-bh":
        return two_stage_bh(pvals, alpha)
    # flat methods: map flat indices back to (block, within) pairs
    if method == "bh":
        flat = bh(pvals.values, alpha)
    elif method == "bonferroni":
        flat = bonferroni(pvals.values, alpha)
    else:
        flat = bky_adaptive_bh(pvals.values, alpha)
    off = pvals.layout.offsets()
    pairs = []
    for k in sorted(flat):
        i = int(np.searchsorted(off, k, side="right")) - 1
        pairs.append((i, int(k - off[i])))
    return TestOutcome(frozenset(pairs), len(pairs), 0)


def cmd_test(args) -> int:
    pvals, ids = read_pvalue_file(args.input)
    try:
        outcome = _run_test_method(args, pvals)
    except ValueError as exc:
        raise ParameterError(str(exc))

    layout = pvals.layout
    off = layout.offsets()
    decisions = []
    for i in range(layout.n_blocks):
        for j in range(layout.sizes[i]):
            bid, hid = ids[i][j]
            decisions.append({
                "block_id": bid,
                "hypothesis_id": hid,
                "block": i,
                "index": j,
                "p_value": float(pvals.values[off[i] + j]),
                "rejected": (i, j) in outcome.rejected,
            })
    n0_hat = outcome.estimator_value
    payload = {
        "method": args.method,
        "alpha": _resolve_alpha(args),
        "lambda": args.lam,
        "estimator": args.estimator if n0_hat is not None else None,
        "n": layout.n,
        "b": layout.n_blocks,
        "R": outcome.n_rejected,
        "B": outcome.n_significant_blocks,
        "n0_hat": n0_hat,
        "pi0_hat": (n0_hat / layout.n) if n0_hat is not None else None,
        "decisions": decisions,
    }

    out = io.StringIO()
    if args.format == "json":
        json.dump(payload, out, indent=2)
        out.write("\n")
    else:
        delim = "," if args.format == "csv" else "\t"
        writer = csv.writer(out, delimiter=delim, lineterminator="\n")
        writer.writerow(["block_id", "hypothesis_id", "block", "index",
                         "p_value", "rejected"])
        for d in decisions:
            writer.writerow([d["block_id"], d["hypothesis_id"], d["block"],
                             d["index"], _fmt(d["p_value"]),
                             "true" if d["rejected"] else "false"])
    _write_output(args.output, out.getvalue())

    summary = f"n={layout.n} b={layout.n_blocks} R={outcome.n_rejected} B={outcome.n_significant_blocks}"
    if n0_hat is not None:
        summary += f" n0_hat={n0_hat:.4g} pi0_hat={n0_hat / layout.n:.4g}"
    print(summary, file=sys.stderr)
    return EXIT_OK


# ----------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------

def _parse_list(raw: str, kind):
    try:
        return [kind(tok) for tok in str(raw).split(",") if tok != ""]
    except ValueError:
        raise ParameterError(f"cannot parse list {raw!r}")


def read_config_file(path: str) -> dict:
    """key=value simulation settings; # starts a comment."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}")
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}: line {lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in ("n", "n0", "s", "lambda", "rho", "alpha", "d",
                           "reps", "seed", "methods"):
                raise InputError(f"{path}: line {lineno}: unknown key {key!r}")
            out[key] = value
    return out


def _simulate_configs(args) -> list[SimConfig]:
    seed = _resolve_seed(args)
    if args.preset is not None:
        return preset_grid(args.preset, reps=args.reps or 2000, seed=seed,
                           alpha=_resolve_alpha(args))

    settings = read_config_file(args.config) if args.config else {}

    def pick(flag_value, key, fallback=None):
        if flag_value is not None:
            return flag_value
        return settings.get(key, fallback)

    n = pick(args.n, "n")
    n0 = pick(args.n0, "n0")
    if n is None or n0 is None:
        raise ParameterError("simulate needs --preset, or n and n0 (flags or config file)")
    s_list = _parse_list(pick(args.s, "s", "1"), int)
    rho_list = _parse_list(pick(args.rho, "rho", ",".join(map(str, DEFAULT_RHO_GRID))), float)
    lam_raw = pick(args.lam, "lambda")
    lam_list = _parse_list(lam_raw, float) if lam_raw is not None else [None]
    methods = tuple(_parse_list(pick(args.methods, "methods", "BH"), str))
    alpha = _resolve_alpha(args, settings)
    d = float(pick(args.d, "d", DEFAULT_SIGNAL_MEAN))
    reps = int(pick(args.reps, "reps", 2000))
    if getattr(args, "seed", None) is None and "seed" in settings:
        try:
            seed = int(settings["seed"])
        except ValueError:
            raise ParameterError(f"cannot parse seed={settings['seed']!r}")

    configs = []
    try:
        for s in s_list:
            for lam in lam_list:
                for rho in rho_list:
                    configs.append(SimConfig(
                        n=int(n), n0=int(n0), s=int(s), rho=float(rho),
                        lam=lam, d=d, alpha=alpha, reps=reps, seed=seed,
                        methods=methods,
                    ))
    except ValueError as exc:
        raise ParameterError(str(exc))
    return configs


def _report_rows(report) -> list[list[str]]:
    cfg = report.config
    rows = []
    for st in report.stats:
        rows.append([
            st.method, str(cfg.n), str(cfg.n0), str(cfg.s),
            _fmt(cfg.lam), _fmt(cfg.rho), _fmt(cfg.alpha),
            str(cfg.reps), str(cfg.seed),
            _fmt(st.fdr), _fmt(st.fdr_se),
            _fmt(st.fwer), _fmt(st.fwer_se),
            _fmt(st.power), _fmt(st.power_se),
        ])
    return rows


def cmd_simulate(args) -> int:
    configs = _simulate_configs(args)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for cfg in configs:
        try:
            report = run_mc(cfg)
        except ValueError as exc:
            raise ParameterError(str(exc))
        writer.writerows(_report_rows(report))
    _write_output(args.output, out.getvalue())
    return EXIT_OK


# ----------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------

def cmd_verify(args) -> int:
    scopes = []
    if args.property1:
        scopes.append("certification")
    if args.lemma1:
        scopes.append("rearrangement")
    if args.identity:
        scopes.append("inverse-moment")
    if args.lemma2:
        scopes.append("lambda-curve")
    if args.oracles:
        scopes.append("oracles")
    if not scopes:
        scopes = ["certification", "rearrangement", "inverse-moment",
                  "lambda-curve", "oracles"]
    seed = _resolve_seed(args)

    all_ok = True
    lines = []
    for scope in scopes:
        if scope == "certification":
            ok, info = verification.check_certification(max_b=args.max_b)
            detail = (f"cases={info['cases']} worst_lhs={info['worst_lhs']:.6g} "
                      f"(bound 1+{info['tolerance']:g})")
        elif scope == "rearrangement":
            ok, info = verification.check_rearrangement(args.instances, seed)
            detail = f"instances={info['instances']} failures={info['failures']}"
        elif scope == "inverse-moment":
            ok, info = verification.check_inverse_moment_identity()
            detail = (f"max_n={info['max_n']} worst_error={info['worst_error']:.3g} "
                      f"(tol {info['tolerance']:g})")
        elif scope == "lambda-curve":
            ok, info = verification.check_lambda_curve()
            detail = (f"grid [0,{info['hi']:g}] step {info['step']:g} "
                      f"f(1)={info['f_at_1']:.6g} f(hi)={info['f_at_hi']:.6g}")
        else:
            ok, info = verification.check_procedure_oracles(args.instances, seed)
            detail = f"instances={info['instances']} mismatches={info['mismatches']}"
        all_ok &= ok
        lines.append(f"{scope}: {'PASS' if ok else 'FAIL'} ({detail})")

    text = "\n".join(lines) + "\n"
    _write_output(args.output, text)
    return EXIT_OK if all_ok else EXIT_VERIFY


# ----------------------------------------------------------------------
# threshold
# ----------------------------------------------------------------------

def cmd_threshold(args) -> int:
    if args.b < 1:
        raise ParameterError(f"block count must be at least 1, got {args.b}")
    _write_output(args.output, _fmt(lambda_threshold(args.b)) + "\n")
    return EXIT_OK


# ----------------------------------------------------------------------
# wiring
# ----------------------------------------------------------------------

def _write_output(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed (default: ${SEED_ENV_VAR} or 0)")
    common.add_argument("--alpha", type=float, default=None,
                        help="test level in (0, 1), default 0.05")
    common.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="estimator tuning parameter in (0, 1)")
    common.add_argument("--output", default=None, help="write to file instead of stdout")
    common.add_argument("--threads", type=int, default=None,
                        help="cap worker threads used by the simulation kernels")

    parser = argparse.ArgumentParser(
        prog="blockfdr",
        description="Multiple testing under block dependence: analysis, "
                    "simulation and verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", parents=[common],
                            help="analyze a p-value file")
    p_test.add_argument("input", help="CSV with header block_id,hypothesis_id,p_value")
    p_test.add_argument("--method", choices=TEST_METHODS, default="two-stage-bh")
    p_test.add_argument("--estimator", choices=("block", "storey"), default="block")
    p_test.add_argument("--format", choices=("json", "csv", "tsv"), default="json")
    p_test.set_defaults(func=cmd_test)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="run Monte Carlo grids, CSV output")
    p_sim.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p_sim.add_argument("--config", default=None, help="key=value settings file")
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--n0", type=int, default=None)
    p_sim.add_argument("--s", default=None, help="comma list of block sizes")
    p_sim.add_argument("--rho", default=None, help="comma list of correlations")
    p_sim.add_argument("--methods", default=None, help="comma list of method names")
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--d", type=float, default=None, help="signal mean")
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", parents=[common],
                           help="run numerical verification checks")
    p_ver.add_argument("--property1", action="store_true",
                       help="exhaustive estimator certification")
    p_ver.add_argument("--lemma1", action="store_true",
                       help="balanced rearrangement property")
    p_ver.add_argument("--lemma2", action="store_true",
                       help="admissible-lambda curve monotonicity")
    p_ver.add_argument("--identity", action="store_true",
                       help="binomial inverse-moment identity")
    p_ver.add_argument("--oracles", action="store_true",
                       help="procedures against the brute-force oracle")
    p_ver.add_argument("--max-b", type=int, default=12)
    p_ver.add_argument("--instances", type=int, default=1000)
    p_ver.set_defaults(func=cmd_verify)

    p_thr = sub.add_parser("threshold", parents=[common],
                           help="print the smallest admissible lambda for b blocks")
    p_thr.add_argument("b", type=int)
    p_thr.set_defaults(func=cmd_threshold)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "threads", None) is not None:
            try:
                set_worker_cap(args.threads)
            except ValueError as exc:
                raise ParameterError(str(exc))
        if args.lam is not None and not 0.0 < args.lam < 1.0:
            raise ParameterError(f"lambda must lie in (0, 1), got {args.lam}")
        if args.alpha is not None and not 0.0 < args.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {args.alpha}")
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
