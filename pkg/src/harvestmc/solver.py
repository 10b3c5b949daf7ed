"""Discounted value iteration on approximating chains, and diagnostics.

``value_iteration`` finds the fixed point of the Bellman operator

    V(x, a) = max_u [ e^{-delta dt(x,a,u)} sum_y q(y | x,a,u) V(y)
                      + p(x, a, u) dt(x,a,u) ]

by synchronous sweeps from V_0 = 0, stopping when a Bellman application moves
the value by less than ``tol`` in sup norm.  Between Bellman applications the
solver may run frozen-policy sweeps (the argmax is reused, everything else is
identical); this accelerates the small-discount regime without changing the
fixed point or the stopping test, which is always evaluated on a true Bellman
sweep.  Set ``policy_refresh=1`` to re-maximize on every sweep.

``solve_periodic`` computes the current-value function W(gamma, x, a) of the
seasonal formulation by repeated backward passes over one period with the
periodic closure W(T) = W(0); each pass contracts the error by e^{-delta T}.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import economics
from ._sweeps import (bellman_max_sweep, frozen_policy_block,
                      periodic_backward_sweep)
from .dynamics import ModelSpec, SwitchingGenerator
from .errors import InvalidParams, MaxIterations, NonContraction
from .kernel import (PERIODIC, STOCHASTIC_PRICE, VARIABLE_EFFORT, ControlSet,
                     PeriodicKernel, TransitionKernel)


@dataclass(frozen=True)
class ValueFunction:
    """Values over (state axes ..., regime); axes hold the grid coordinates."""

    values: np.ndarray
    axes: tuple
    formulation: str


@dataclass(frozen=True)
class Policy:
    """Optimal control values, same layout as the value function."""

    values: np.ndarray
    axes: tuple
    formulation: str
    control_set: ControlSet


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_sup_change: float
    tolerance: float
    wall_time: float
    bellman_sweeps: int = 0
    eval_sweeps: int = 0
    converged: bool = True


def _pref_order(u: np.ndarray) -> np.ndarray:
    """Tie-break order for the argmax: smallest |u| first, then smallest u."""
    return np.lexsort((u, np.abs(u)))


def _tabulate_rewards(pricecost, t, xs, m0, u) -> np.ndarray:
    """Reward table p(t, x, k, u) of shape (n_x, m0, n_u)."""
    out = np.empty((xs.size, m0, u.size))
    for k in range(m0):
        try:
            r = np.asarray(economics.evaluate(pricecost, t, xs[:, None], k + 1,
                                              u[None, :]), dtype=float)
            out[:, k, :] = np.broadcast_to(r, (xs.size, u.size))
        except (TypeError, ValueError):
            out[:, k, :] = [[economics.evaluate(pricecost, t, float(x), k + 1,
                                                float(uj))
                             for uj in u] for x in xs]
    return out


def _assemble(kernel: TransitionKernel, pricecost, delta: float):
    """Precompute the sweep arrays for a materialized kernel."""
    if delta <= 0:
        raise InvalidParams("discount rate delta must be > 0")
    u = kernel.controls.values
    m0 = kernel.m0
    if np.any(kernel.dt[kernel.admissible] <= 0.0):
        raise NonContraction("kernel has a non-positive interpolation interval")

    xs = kernel.space_coords[-1]
    nspace = kernel.n_space
    # reward at the row coordinates; the price state enters additively
    rew = np.empty((nspace, m0, u.size))
    if kernel.formulation == STOCHASTIC_PRICE:
        xu = np.unique(xs)
        tab = _tabulate_rewards(pricecost, 0.0, xu, m0, u)
        xi = np.searchsorted(xu, xs)
        rew[:] = tab[xi]
        rew += kernel.space_coords[0][:, None, None] * u[None, None, :]
    else:
        xu, xi = np.unique(xs, return_inverse=True)
        rew[:] = _tabulate_rewards(pricecost, 0.0, xu, m0, u)[xi]
    rdt = rew.reshape(kernel.n_rows, u.size) * kernel.dt
    beta = np.exp(-delta * kernel.dt)
    adm = kernel.admissible
    rdt = np.where(adm, rdt, 0.0)
    beta = np.where(adm, beta, 0.0)
    return (np.ascontiguousarray(kernel.probs),
            np.ascontiguousarray(kernel.targets),
            np.ascontiguousarray(beta),
            np.ascontiguousarray(rdt),
            np.ascontiguousarray(adm),
            _pref_order(u))


def _shape_1d2d(kernel: TransitionKernel):
    if len(kernel.space_coords) == 2:
        g = kernel.grid
        ax1 = g.axis1 if g is not None else np.unique(kernel.space_coords[0])
        ax2 = g.axis2 if g is not None else np.unique(kernel.space_coords[1])
        return (ax1, ax2), (ax1.size, ax2.size, kernel.m0)
    ax = kernel.grid.states if kernel.grid is not None else kernel.space_coords[0]
    return (ax,), (ax.size, kernel.m0)


def bellman_apply(kernel: TransitionKernel, pricecost, delta: float,
                  values: np.ndarray):
    """One Bellman application T(V); returns (new values, policy values).

    ``values`` and the results use the shaped layout (state axes ..., regime).
    """
    probs, targets, beta, rdt, adm, pref = _assemble(kernel, pricecost, delta)
    axes, shape = _shape_1d2d(kernel)
    v = np.ascontiguousarray(values, dtype=float).reshape(kernel.n_rows)
    vout = np.empty_like(v)
    pol = np.empty(kernel.n_rows, dtype=np.int32)
    bellman_max_sweep(v, probs, targets, beta, rdt, adm, pref, vout, pol)
    return vout.reshape(shape), kernel.controls.values[pol].reshape(shape)


def value_iteration(kernel: TransitionKernel, pricecost, delta: float,
                    tol: float = 1e-8, max_iterations: int = 10_000_000,
                    policy_refresh: int = 512):
    """Solve the discounted control problem on a materialized kernel.

    Returns (ValueFunction, Policy, SolveReport).  Initial values and controls
    are identically zero.  Raises MaxIterations (with the partial result
    attached) if the budget is exhausted, NonContraction for a malformed
    kernel.
    """
    if policy_refresh < 1:
        raise InvalidParams("policy_refresh must be >= 1")
    t0 = time.perf_counter()
    probs, targets, beta, rdt, adm, pref = _assemble(kernel, pricecost, delta)
    n = kernel.n_rows
    v = np.zeros(n)
    vn = np.empty(n)
    pol = np.empty(n, dtype=np.int32)

    n_max = n_eval = 0
    d = bellman_max_sweep(v, probs, targets, beta, rdt, adm, pref, vn, pol)
    n_max += 1
    v, vn = vn, v
    while d >= tol:
        if n_max + n_eval >= max_iterations:
            _raise_max_iterations(kernel, v, pol, d, tol, t0, n_max, n_eval)
        budget = min(policy_refresh - 1, max_iterations - n_max - n_eval - 1)
        if budget > 0:
            _, done = frozen_policy_block(v, probs, targets, beta, rdt, pol,
                                          vn, budget, 0.25 * tol)
            n_eval += int(done)
        d = bellman_max_sweep(v, probs, targets, beta, rdt, adm, pref, vn, pol)
        n_max += 1
        v, vn = vn, v

    report = SolveReport(iterations=n_max + n_eval, final_sup_change=float(d),
                         tolerance=tol, wall_time=time.perf_counter() - t0,
                         bellman_sweeps=n_max, eval_sweeps=n_eval)
    value, policy = _pack(kernel, v, pol)
    return value, policy, report


def _pack(kernel: TransitionKernel, v, pol):
    axes, shape = _shape_1d2d(kernel)
    value = ValueFunction(v.reshape(shape).copy(), axes, kernel.formulation)
    policy = Policy(kernel.controls.values[pol].reshape(shape), axes,
                    kernel.formulation, kernel.controls)
    return value, policy


def _raise_max_iterations(kernel, v, pol, d, tol, t0, n_max, n_eval):
    value, policy = _pack(kernel, v, pol)
    report = SolveReport(iterations=n_max + n_eval, final_sup_change=float(d),
                         tolerance=tol, wall_time=time.perf_counter() - t0,
                         bellman_sweeps=n_max, eval_sweeps=n_eval,
                         converged=False)
    raise MaxIterations(
        f"no convergence below {tol:g} within {n_max + n_eval} sweeps "
        f"(last sup change {d:.3e})", value=value, policy=policy, report=report)


def solve_periodic(kernel: PeriodicKernel, pricecost, delta: float,
                   T: Optional[float] = None, tol: float = 1e-8,
                   max_iterations: int = 1_000_000):
    """Solve the seasonal formulation for the current-value function W.

    W(gamma, x, a) is the value discounted to time gamma; it satisfies the
    one-step recursion with reward p(gamma, x, a, u) h1 and discounted
    continuation at gamma + h1, closed periodically by W(T) = W(0).  Backward
    passes run until the gamma = 0 slice moves by less than ``tol`` between
    consecutive passes; one final pass records the argmax everywhere.
    """
    if delta <= 0:
        raise InvalidParams("discount rate delta must be > 0")
    grid = kernel.grid
    if T is not None and abs(T - grid.bound1) > 1e-9:
        raise InvalidParams("given period T does not match the kernel grid")
    t0 = time.perf_counter()
    gam, xs = grid.axis1, grid.axis2
    u = kernel.controls.values
    m0 = kernel.m0
    n1, nx = gam.size, xs.size

    rdt = np.empty((n1, nx, m0, u.size))
    for s in range(n1):
        rdt[s] = _tabulate_rewards(pricecost, float(gam[s]), xs, m0, u)
    rdt *= grid.h1
    rdt = np.ascontiguousarray(rdt)
    beta = float(np.exp(-delta * grid.h1))
    u = u.copy()
    pref = _pref_order(u)
    adm0 = np.ascontiguousarray(kernel.adm0)
    b = np.ascontiguousarray(kernel.b)
    sig2 = np.ascontiguousarray(kernel.sig2)
    rates = kernel.rates.copy()

    w = np.zeros((n1, nx, m0))
    pol = np.zeros((n1, nx, m0), dtype=np.int32)
    sweeps = 0
    d0 = np.inf
    while d0 >= tol:
        if sweeps >= max_iterations:
            value = ValueFunction(w.copy(), (gam, xs), PERIODIC)
            policy = Policy(u[pol], (gam, xs), PERIODIC, kernel.controls)
            report = SolveReport(sweeps, float(d0), tol,
                                 time.perf_counter() - t0, converged=False)
            raise MaxIterations(
                f"periodic solve: no convergence below {tol:g} within "
                f"{sweeps} passes", value=value, policy=policy, report=report)
        d0 = periodic_backward_sweep(w, b, sig2, rdt, rates, adm0, pref, u,
                                     beta, grid.h1, grid.h2, pol, False)
        sweeps += 1
    d0 = periodic_backward_sweep(w, b, sig2, rdt, rates, adm0, pref, u, beta,
                                 grid.h1, grid.h2, pol, True)
    sweeps += 1

    report = SolveReport(iterations=sweeps, final_sup_change=float(d0),
                         tolerance=tol, wall_time=time.perf_counter() - t0,
                         bellman_sweeps=sweeps)
    value = ValueFunction(w, (gam, xs), PERIODIC)
    policy = Policy(u[pol], (gam, xs), PERIODIC, kernel.controls)
    return value, policy, report


@dataclass(frozen=True)
class PolicyShape:
    """Shape classification of a single regime's policy curve."""

    regime: int
    kind: str                      # bang_bang | monotone_step |
    threshold: Optional[float]     # monotone_continuous | non_monotone
    n_distinct: int


def classify_policy(policy: Policy, controls: Optional[ControlSet] = None):
    """Classify each regime's policy over a 1-D population grid.

    bang-bang means the policy jumps once from the minimal to the maximal
    control at a population threshold (the reported threshold is the smallest
    population using the maximal control).  One interior value is tolerated
    inside the transition cell: when the continuous threshold falls between
    grid nodes, the exact discrete argmax matches the drift there (u close to
    b), which enlarges the interpolation interval and wins by an O(h) margin;
    the artifact occupies at most one node and vanishes as h -> 0.

    A nondecreasing policy that is not bang-bang is a step function when
    fewer than 15% of neighboring grid points differ, else continuous.
    """
    if len(policy.axes) != 1:
        raise InvalidParams("classify_policy expects a 1-D state policy")
    cs = controls if controls is not None else policy.control_set
    umin, umax = float(cs.values[0]), float(cs.values[-1])
    x = policy.axes[0]
    shapes = []
    for k in range(policy.values.shape[-1]):
        seq = policy.values[:, k]
        diffs = np.diff(seq)
        nondecreasing = bool(np.all(diffs >= 0.0))
        distinct = int(np.unique(seq).size)
        if not nondecreasing:
            shapes.append(PolicyShape(k + 1, "non_monotone", None, distinct))
            continue
        is_min = seq == umin
        is_max = seq == umax
        interior = int(np.count_nonzero(~is_min & ~is_max))
        if is_min[0] and is_max[-1] and interior <= 1:
            thr = float(x[np.argmax(is_max)])
            shapes.append(PolicyShape(k + 1, "bang_bang", thr, distinct))
            continue
        frac = int(np.count_nonzero(diffs != 0.0)) / max(1, seq.size - 1)
        kind = "monotone_step" if frac <= 0.15 else "monotone_continuous"
        shapes.append(PolicyShape(k + 1, kind, None, distinct))
    return shapes


class HJBResidual(NamedTuple):
    x: np.ndarray
    residual: np.ndarray           # (n_interior, m0)


def hjb_residual(value: ValueFunction, model: ModelSpec,
                 gen: SwitchingGenerator, pricecost, controls: ControlSet,
                 delta: float) -> HJBResidual:
    """Maximized HJB bracket at interior grid points, by central differences.

    Diagnostic only; the solver never touches this.  For a converged value
    function the residual shrinks with the mesh away from policy kinks.
    """
    if len(value.axes) != 1:
        raise InvalidParams("hjb_residual expects a 1-D value function")
    x = value.axes[0]
    h = float(x[1] - x[0])
    v = value.values
    m0 = v.shape[1]
    u = controls.values
    vp = (v[2:] - v[:-2]) / (2.0 * h)
    vpp = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    xin = x[1:-1]
    b = np.stack([np.asarray(model.drift(0.0, xin, k + 1), dtype=float)
                  for k in range(m0)], axis=1)
    sig2 = np.stack([np.asarray(model.diffusion(0.0, xin, k + 1),
                                dtype=float) ** 2
                     for k in range(m0)], axis=1)
    switch = (v @ gen.rates.T)[1:-1]
    rew = _tabulate_rewards(pricecost, 0.0, xin, m0, u)
    if pricecost.mode == economics.VARIABLE_EFFORT:
        ueff = xin[:, None, None] * u[None, None, :]
    else:
        ueff = u[None, None, :]
    bracket = (vp[:, :, None] * (b[:, :, None] - ueff)
               + 0.5 * sig2[:, :, None] * vpp[:, :, None]
               + switch[:, :, None] + rew
               - delta * v[1:-1][:, :, None])
    return HJBResidual(xin, bracket.max(axis=2))
