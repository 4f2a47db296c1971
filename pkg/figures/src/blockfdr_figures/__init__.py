"""Figure rendering for blockfdr simulation CSVs."""

from .render import FigureSpec, load_rows, render

__version__ = "0.1.0"

__all__ = ["FigureSpec", "load_rows", "render", "__version__"]
