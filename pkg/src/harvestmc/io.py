"""CSV emitters and readers for solver and Monte Carlo artifacts.

Solution files carry a comment header naming the formulation and the config
hash, then a column header and one row per (state, regime):

    # formulation=baseline config_hash=0123abcd4567
    x,regime,V,u_star
    0,1,36.470593563562,-2

2-D formulations prepend the first-axis coordinate (price phi or
time-of-period gamma) as column ``axis1``.  All floats are written with
repr-faithful 17-digit shortest formatting, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import ConfigError
from .kernel import ControlSet
from .solver import Policy, ValueFunction


def _fmt(v: float) -> str:
    return repr(float(v))


def write_solution_csv(path, value: ValueFunction, policy: Policy,
                       config_hash: str) -> None:
    vv, pv = value.values, policy.values
    m0 = vv.shape[-1]
    with open(path, "w", newline="") as f:
        f.write(f"# formulation={value.formulation} "
                f"config_hash={config_hash}\n")
        if len(value.axes) == 1:
            f.write("x,regime,V,u_star\n")
            for i, x in enumerate(value.axes[0]):
                for k in range(m0):
                    f.write(f"{_fmt(x)},{k + 1},{_fmt(vv[i, k])},"
                            f"{_fmt(pv[i, k])}\n")
        else:
            f.write("axis1,x,regime,V,u_star\n")
            ax1, ax2 = value.axes
            for a, g in enumerate(ax1):
                for i, x in enumerate(ax2):
                    for k in range(m0):
                        f.write(f"{_fmt(g)},{_fmt(x)},{k + 1},"
                                f"{_fmt(vv[a, i, k])},{_fmt(pv[a, i, k])}\n")


def read_solution_csv(path):
    """Parse a solution file back into header info and value/policy arrays.

    Returns (meta dict, axes tuple, V array, u array) with the same shapes
    the solver produces.
    """
    with open(path) as f:
        first = f.readline()
        if not first.startswith("#"):
            raise ConfigError(f"{path}: missing comment header")
        meta = dict(item.split("=", 1) for item in first[1:].split())
        reader = csv.reader(f)
        cols = next(reader)
        rows = [[float(c) for c in row] for row in reader if row]
    data = np.array(rows)
    if cols[0] == "x":
        xs = np.unique(data[:, 0])
        m0 = int(data[:, 1].max())
        vv = np.full((xs.size, m0), np.nan)
        pv = np.full((xs.size, m0), np.nan)
        xi = np.searchsorted(xs, data[:, 0])
        ki = data[:, 1].astype(int) - 1
        vv[xi, ki] = data[:, 2]
        pv[xi, ki] = data[:, 3]
        return meta, (xs,), vv, pv
    if cols[0] != "axis1":
        raise ConfigError(f"{path}: unrecognized column layout {cols}")
    ax1 = np.unique(data[:, 0])
    ax2 = np.unique(data[:, 1])
    m0 = int(data[:, 2].max())
    vv = np.full((ax1.size, ax2.size, m0), np.nan)
    pv = np.full((ax1.size, ax2.size, m0), np.nan)
    ai = np.searchsorted(ax1, data[:, 0])
    xi = np.searchsorted(ax2, data[:, 1])
    ki = data[:, 2].astype(int) - 1
    vv[ai, xi, ki] = data[:, 3]
    pv[ai, xi, ki] = data[:, 4]
    return meta, (ax1, ax2), vv, pv


def policy_from_csv(path, formulation: str, controls: ControlSet) -> Policy:
    meta, axes, _, pv = read_solution_csv(path)
    if meta.get("formulation", formulation) != formulation:
        raise ConfigError(
            f"{path}: policy was solved for formulation "
            f"'{meta.get('formulation')}', expected '{formulation}'")
    return Policy(pv, axes, formulation, controls)


def write_mc_csv(path, estimates, config_hash: str) -> None:
    """One row per estimate: start point, mean, SE, tail bound, path count."""
    with open(path, "w", newline="") as f:
        f.write(f"# config_hash={config_hash}\n")
        f.write("x0,alpha0,J_hat,standard_error,tail_bound,paths\n")
        for (x0, a0, est) in estimates:
            x0s = _fmt(x0) if np.isscalar(x0) else \
                "|".join(_fmt(v) for v in x0)
            f.write(f"{x0s},{a0},{_fmt(est.mean)},{_fmt(est.standard_error)},"
                    f"{_fmt(est.tail_bound)},{est.paths}\n")


def write_check_report(path, report, config_hash: str) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# config_hash={config_hash}\n")
        f.write("metric,value\n")
        f.write(f"formulation,{report.formulation}\n")
        f.write(f"rows_checked,{report.rows_checked}\n")
        f.write(f"max_row_sum_error,{_fmt(report.max_row_sum_error)}\n")
        f.write(f"max_first_moment_error,"
                f"{_fmt(report.max_first_moment_error)}\n")
        f.write(f"max_variance_error,{_fmt(report.max_variance_error)}\n")
        f.write(f"max_variance_rate,{_fmt(report.max_variance_rate)}\n")
        f.write(f"max_variance_bound_ratio,"
                f"{_fmt(report.max_variance_bound_ratio)}\n")
        f.write(f"max_switch_error,{_fmt(report.max_switch_error)}\n")
        f.write(f"violations,{len(report.violations)}\n")
        f.write(f"passed,{str(report.passed).lower()}\n")


def write_trace_csv(path, trace) -> None:
    with open(path, "w", newline="") as f:
        f.write("t,x,regime,u,running_payoff\n")
        for (t, x, a, u, p) in trace:
            f.write(f"{_fmt(t)},{_fmt(x)},{a},{_fmt(u)},{_fmt(p)}\n")
