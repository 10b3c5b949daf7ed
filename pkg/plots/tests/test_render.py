import json
from pathlib import Path

import pytest

from harvestplots import FigureSpec, SchemaError, read_solution, render
from harvestplots.cli import main

FIXTURES = Path(__file__).parent / "fixtures"
FIG1 = str(FIXTURES / "fig1_solution.csv")
FIG7 = str(FIXTURES / "fig7_solution.csv")

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_read_solution_schema():
    meta, cols, data = read_solution(FIG1)
    assert meta["formulation"] == "baseline"
    assert cols == ["x", "regime", "V", "u_star"]
    assert data.shape == (82, 4)


def test_lines_figure(tmp_path):
    out = tmp_path / "fig1.png"
    spec = FigureSpec(inputs=[FIG1], kind="lines", output=str(out),
                      column="V", ylabel="value")
    assert render(spec) == out
    assert out.read_bytes()[:8] == PNG_MAGIC


def test_lines_policy_column(tmp_path):
    out = tmp_path / "fig1_policy.png"
    render(FigureSpec(inputs=[FIG1], kind="lines", output=str(out),
                      column="u_star"))
    assert out.exists()


def test_surface_contour_pair(tmp_path):
    out = tmp_path / "fig7.png"
    spec = FigureSpec(inputs=[FIG7], kind="surface_contour", output=str(out),
                      column="u_star", regime=1, axis1label="price state")
    render(spec)
    assert out.read_bytes()[:8] == PNG_MAGIC


def test_rendering_is_deterministic(tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    for out in (a, b):
        render(FigureSpec(inputs=[FIG1], kind="lines", output=str(out)))
    assert a.read_bytes() == b.read_bytes()


def test_svg_output(tmp_path):
    out = tmp_path / "fig1.svg"
    render(FigureSpec(inputs=[FIG1], kind="lines", output=str(out)))
    assert out.read_text().lstrip().startswith("<?xml")


def test_empty_csv_rejected_before_writing(tmp_path):
    empty = tmp_path / "empty_solution.csv"
    empty.write_text("# formulation=baseline config_hash=x\n"
                     "x,regime,V,u_star\n")
    out = tmp_path / "never.png"
    with pytest.raises(SchemaError, match="no data rows"):
        render(FigureSpec(inputs=[str(empty)], kind="lines", output=str(out)))
    assert not out.exists()


def test_schema_mismatch_names_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,alpha,V,u_star\n0,1,1.0,0.0\n")
    with pytest.raises(SchemaError, match="'regime'.*'alpha'"):
        read_solution(bad)


def test_dimension_mismatch_rejected(tmp_path):
    with pytest.raises(SchemaError, match="2-D"):
        render(FigureSpec(inputs=[FIG7], kind="lines",
                          output=str(tmp_path / "x.png")))
    with pytest.raises(SchemaError, match="1-D"):
        render(FigureSpec(inputs=[FIG1], kind="surface_contour",
                          output=str(tmp_path / "y.png")))


def test_cli_positional(tmp_path, capsys):
    out = tmp_path / "cli.png"
    assert main(["render", FIG1, "--kind", "lines", "--column", "V",
                 "--out", str(out)]) == 0
    assert out.exists()
    assert "figure written" in capsys.readouterr().out


def test_cli_spec_file(tmp_path):
    out = tmp_path / "spec.png"
    spec_path = tmp_path / "fig.json"
    spec_path.write_text(json.dumps({
        "inputs": [FIG7], "kind": "surface_contour", "output": str(out),
        "column": "u_star", "regime": 1}))
    assert main(["render", "--spec", str(spec_path)]) == 0
    assert out.exists()


def test_cli_error_exit_code(tmp_path, capsys):
    missing = str(tmp_path / "nope.csv")
    assert main(["render", missing, "--out", str(tmp_path / "o.png")]) == 1
    assert "error:" in capsys.readouterr().err
