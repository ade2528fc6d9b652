"""figrender: batch figure renderer for the trajectory-engine CSV outputs."""

__version__ = "0.1.0"

from .render import KINDS, FigureSpec, SchemaError, render
