"""Command line front end: render figures from solver CSV files."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, render, spec_from_json


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="harvestplots",
        description="Render harvestmc solution CSVs as figures")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="draw one figure")
    p.add_argument("inputs", nargs="*", help="solution CSV files")
    p.add_argument("--spec", help="JSON FigureSpec file (overrides positionals)")
    p.add_argument("--kind", choices=["lines", "surface_contour"],
                   default="lines")
    p.add_argument("--column", choices=["V", "u_star"], default="u_star")
    p.add_argument("--regime", type=int, default=1)
    p.add_argument("--out", default="figure.png")
    p.add_argument("--xlabel")
    p.add_argument("--ylabel")
    p.add_argument("--axis1label")
    p.add_argument("--title")
    args = parser.parse_args(argv)

    try:
        if args.spec:
            spec = spec_from_json(args.spec)
        else:
            spec = FigureSpec(inputs=args.inputs, kind=args.kind,
                              output=args.out, column=args.column,
                              regime=args.regime, xlabel=args.xlabel,
                              ylabel=args.ylabel, axis1label=args.axis1label,
                              title=args.title)
        out = render(spec)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"figure written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
