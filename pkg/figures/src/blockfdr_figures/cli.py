"""plot_figures: render a simulation CSV into a panel-grid image."""

import argparse
import sys

from .render import METRICS, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot_figures",
        description="Draw metric-vs-correlation panel grids from a "
                    "blockfdr simulation CSV.",
    )
    parser.add_argument("csv", help="simulation results CSV")
    parser.add_argument("--metric", choices=METRICS, default="fdr")
    parser.add_argument("--out", required=True, help="output image (png or svg)")
    parser.add_argument("--reference", type=float, default=None,
                        help="horizontal reference level (default: alpha from the CSV)")
    args = parser.parse_args(argv)
    try:
        render(args.csv, FigureSpec(args.metric, args.reference), args.out)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
