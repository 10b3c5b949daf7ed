"""Render solver CSV outputs as line plots or surface/contour pairs.

All numbers come from the CSV files; this package reshapes and draws, nothing
more.  1-D solutions (columns x, regime, V, u_star) become one curve per
regime and input file; 2-D solutions (axis1, x, regime, V, u_star) become a
3-D surface on the left and a filled contour on the right for one regime.

Rendering is pure: the style is pinned below and savefig metadata is fixed,
so identical CSV inputs produce byte-identical image files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib
matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "svg.hashsalt": "harvestplots",
}

COLUMNS_1D = ["x", "regime", "V", "u_star"]
COLUMNS_2D = ["axis1", "x", "regime", "V", "u_star"]


class SchemaError(ValueError):
    """CSV does not match the solver emitter schema."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input files, plot kind, labels, output path."""

    inputs: Sequence[str]
    kind: str                       # "lines" | "surface_contour"
    output: str
    column: str = "u_star"          # "V" or "u_star"
    regime: int = 1                 # surface_contour: which regime to show
    xlabel: Optional[str] = None
    ylabel: Optional[str] = None
    axis1label: Optional[str] = None
    title: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("lines", "surface_contour"):
            raise SchemaError(f"unknown plot kind '{self.kind}'")
        if self.column not in ("V", "u_star"):
            raise SchemaError(f"unknown column '{self.column}'"
                              " (expected V or u_star)")
        if not self.inputs:
            raise SchemaError("no input CSV files given")


def spec_from_json(path) -> FigureSpec:
    with open(path) as f:
        data = json.load(f)
    return FigureSpec(**data)


def read_solution(path):
    """Parse a solver CSV; returns (meta, columns, float array).

    Raises SchemaError naming the offending column on mismatch.
    """
    with open(path) as f:
        first = f.readline().rstrip("\n")
        meta = {}
        if first.startswith("#"):
            meta = dict(item.split("=", 1) for item in first[1:].split()
                        if "=" in item)
            header = f.readline().rstrip("\n")
        else:
            header = first
        cols = header.split(",")
        expected = COLUMNS_2D if cols and cols[0] == "axis1" else COLUMNS_1D
        for got, want in zip(cols, expected):
            if got != want:
                raise SchemaError(f"{path}: expected column '{want}', "
                                  f"found '{got}'")
        if len(cols) != len(expected):
            raise SchemaError(f"{path}: expected {len(expected)} columns, "
                              f"found {len(cols)}")
        rows = [[float(v) for v in row] for row in csv.reader(f) if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return meta, cols, np.asarray(rows)


def _series_1d(path, column):
    _, cols, data = read_solution(path)
    if "axis1" in cols:
        raise SchemaError(f"{path}: 2-D solution passed to a lines plot")
    ci = cols.index(column)
    xs = np.unique(data[:, 0])
    out = []
    for k in np.unique(data[:, 1]).astype(int):
        sel = data[data[:, 1] == k]
        order = np.argsort(sel[:, 0])
        out.append((k, sel[order, 0], sel[order, ci]))
    return xs, out


def _grid_2d(path, column, regime):
    _, cols, data = read_solution(path)
    if "axis1" not in cols:
        raise SchemaError(f"{path}: 1-D solution passed to a surface plot")
    ci = cols.index(column)
    sel = data[data[:, 2].astype(int) == regime]
    if sel.size == 0:
        raise SchemaError(f"{path}: regime {regime} absent")
    ax1 = np.unique(sel[:, 0])
    ax2 = np.unique(sel[:, 1])
    grid = np.full((ax1.size, ax2.size), np.nan)
    i = np.searchsorted(ax1, sel[:, 0])
    j = np.searchsorted(ax2, sel[:, 1])
    grid[i, j] = sel[:, ci]
    if np.any(np.isnan(grid)):
        raise SchemaError(f"{path}: incomplete (axis1, x) lattice")
    return ax1, ax2, grid


def render(spec: FigureSpec) -> Path:
    """Draw the figure described by ``spec``; returns the written path."""
    with plt.rc_context(STYLE):
        if spec.kind == "lines":
            fig = _render_lines(spec)
        else:
            fig = _render_surface_contour(spec)
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, metadata=_fixed_metadata(out.suffix))
        plt.close(fig)
    return out


def _fixed_metadata(suffix):
    if suffix.lower() == ".png":
        return {"Software": "harvestplots"}
    if suffix.lower() == ".svg":
        return {"Creator": "harvestplots", "Date": None}
    return None


def _render_lines(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for path in spec.inputs:
        stem = Path(path).stem.replace("_solution", "")
        _, series = _series_1d(path, spec.column)
        for k, xs, ys in series:
            label = f"{stem} regime {k}" if len(spec.inputs) > 1 \
                else f"regime {k}"
            ax.plot(xs, ys, label=label)
    ax.set_xlabel(spec.xlabel or "population x")
    ax.set_ylabel(spec.ylabel or spec.column)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(loc="best")
    fig.tight_layout()
    return fig


def _render_surface_contour(spec: FigureSpec):
    if len(spec.inputs) != 1:
        raise SchemaError("surface_contour takes exactly one input CSV")
    ax1, ax2, grid = _grid_2d(spec.inputs[0], spec.column, spec.regime)
    fig = plt.figure(figsize=(9.0, 3.8))
    surf_ax = fig.add_subplot(1, 2, 1, projection="3d")
    a1, a2 = np.meshgrid(ax1, ax2, indexing="ij")
    surf_ax.plot_surface(a1, a2, grid, cmap="viridis", linewidth=0,
                         antialiased=False)
    surf_ax.set_xlabel(spec.axis1label or "axis1")
    surf_ax.set_ylabel(spec.xlabel or "population x")
    surf_ax.set_zlabel(spec.column)
    cont_ax = fig.add_subplot(1, 2, 2)
    cs = cont_ax.contourf(a1, a2, grid, levels=12, cmap="viridis")
    fig.colorbar(cs, ax=cont_ax, shrink=0.9)
    cont_ax.set_xlabel(spec.axis1label or "axis1")
    cont_ax.set_ylabel(spec.xlabel or "population x")
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig
