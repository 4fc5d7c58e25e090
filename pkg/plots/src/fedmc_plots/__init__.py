"""Figure rendering for fedmc experiment outputs."""

__version__ = "0.1.0"

from .render import KINDS, FigureSpec, SchemaError, render

__all__ = ["KINDS", "FigureSpec", "SchemaError", "render"]
