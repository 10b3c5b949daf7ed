"""Figure rendering for harvestmc solver outputs."""

from .render import FigureSpec, SchemaError, read_solution, render, spec_from_json

__version__ = "0.1.0"
