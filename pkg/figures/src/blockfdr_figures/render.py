"""Panel-grid rendering of simulation results.

Reads the simulation CSV (schema: method, n, n0, s, lambda, rho, alpha,
reps, seed, fdr, fdr_se, fwer, fwer_se, power, power_se) and draws one
panel per (block size, lambda) combination with the chosen metric
against the within-block correlation, one line per method and a
horizontal reference at the test level.  Rendering is a pure function
of the CSV: plotted y-values are the CSV values, unmodified.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

METRICS = ("fdr", "fwer", "power")

_REQUIRED = ("method", "s", "lambda", "rho", "alpha")

# mirrors the figure conventions: baseline solid, the estimator-based
# variants dash-dotted / long-dashed, the flat comparator dotted
LINE_STYLES = {
    "BH": "solid",
    "adBH1": "dashdot",
    "adBH2": (0, (8, 3)),
    "adBH3": "dotted",
    "tsBH": (0, (5, 2)),
    "Bonf": "solid",
    "adBon1": "dotted",
    "adBon2": (0, (8, 3)),
}


@dataclass(frozen=True)
class FigureSpec:
    """What to plot: the metric column and the reference level.

    ``reference`` defaults to the alpha recorded in the CSV.
    """

    metric: str
    reference: float | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")


def load_rows(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [c for c in _REQUIRED if c not in fields]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def _panel_key(row):
    return int(row["s"]), row["lambda"]


def render(csv_path: str, spec: FigureSpec, out_path: str):
    """Draw the panel grid and write it to ``out_path`` (png or svg).

    Returns the matplotlib figure so callers can inspect the plotted
    data without re-reading the image.
    """
    rows = load_rows(csv_path)
    if spec.metric not in rows[0]:
        raise ValueError(f"{csv_path}: missing metric column {spec.metric!r}")
    rows = [r for r in rows if r[spec.metric] not in ("", None)]
    if not rows:
        raise ValueError(f"{csv_path}: no rows carry metric {spec.metric!r}")

    s_values = sorted({int(r["s"]) for r in rows})
    lam_values = sorted({r["lambda"] for r in rows},
                        key=lambda v: float(v) if v else -1.0)
    methods = list(dict.fromkeys(r["method"] for r in rows))
    reference = spec.reference
    if reference is None:
        reference = float(rows[0]["alpha"])

    fig, axes = plt.subplots(
        len(s_values), len(lam_values),
        squeeze=False, sharex=True, sharey=True,
        figsize=(3.2 * len(lam_values), 2.4 * len(s_values)),
    )
    for i, s in enumerate(s_values):
        for j, lam in enumerate(lam_values):
            ax = axes[i][j]
            panel = [r for r in rows if _panel_key(r) == (s, lam)]
            for method in methods:
                cells = sorted((float(r["rho"]), float(r[spec.metric]))
                               for r in panel if r["method"] == method)
                if not cells:
                    continue
                xs = [c[0] for c in cells]
                ys = [c[1] for c in cells]
                ax.plot(xs, ys, label=method,
                        linestyle=LINE_STYLES.get(method, "solid"),
                        marker="o" if len(xs) == 1 else None,
                        markersize=3)
            ax.axhline(reference, color="0.6", linewidth=0.8, zorder=0)
            title = f"s = {s}" + (f", lambda = {float(lam):g}" if lam else "")
            ax.set_title(title, fontsize=9)
            if i == len(s_values) - 1:
                ax.set_xlabel("rho")
            if j == 0:
                ax.set_ylabel(spec.metric)
    handles, labels = axes[0][0].get_legend_handles_labels()
    if handles:
        fig.legend(handles, labels, loc="lower center",
                   ncol=len(labels), frameon=False)
    fig.tight_layout(rect=(0, 0.05, 1, 1))
    fig.savefig(out_path)
    return fig
