"""Locally consistent controlled Markov chains on state grids.

Four builders produce the transition probabilities and interpolation
intervals for the four problem formulations:

- ``build_baseline``: 1-D population grid, control enters the drift as -u.
- ``build_variable_effort``: control enters as -u*x.
- ``build_stochastic_price``: 2-D (price, population) grid with a common mesh.
- ``build_periodic``: 2-D (time-of-period, population) grid, explicit scheme
  with a CFL-type step restriction and deterministic time advance.

The first three kernels are fully materialized: per (state, regime, control)
a fixed set of move slots holds probabilities and flat target indices, where
the flat index of (space point s, regime k) is ``s*m0 + k``.  The periodic
kernel stores coefficient tables instead (a full-resolution seasonal kernel
would not fit in memory) and realizes any slice's rows on demand; all row
contracts and checks below apply to it unchanged.

Boundary handling: at the top of each axis the outward move is reflected
(its mass is redirected to the boundary point itself); at x = 0 (and phi = 0)
a control is admissible only if its downward probability is exactly zero, so
the chain can never leave the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .dynamics import ModelSpec, PriceDynamicsSpec, SwitchingGenerator
from .errors import CflViolation, EmptyAdmissibleSet, InvalidParams

BASELINE = "baseline"
VARIABLE_EFFORT = "variable_effort"
STOCHASTIC_PRICE = "stochastic_price"
PERIODIC = "periodic"


def _check_mesh(span: float, h: float, label: str) -> int:
    if h <= 0 or span <= 0:
        raise InvalidParams(f"{label}: mesh and bound must be > 0")
    n = round(span / h)
    if n < 1 or abs(n * h - span) > 1e-9 * max(1.0, span):
        raise InvalidParams(f"{label}: bound {span} is not an integer multiple of {h}")
    return n


@dataclass(frozen=True)
class Grid1D:
    """Uniform population grid {0, h, 2h, ..., B}."""

    h: float
    B: float

    def __post_init__(self):
        _check_mesh(self.B, self.h, "Grid1D")

    @property
    def n(self) -> int:
        return _check_mesh(self.B, self.h, "Grid1D")

    @property
    def states(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h


@dataclass(frozen=True)
class Grid2D:
    """Lattice (k1*h1, k2*h2); axis 1 is price phi or time-of-period gamma.

    With ``periodic1`` the first axis wraps modulo bound1 = T and holds the
    points {0, h1, ..., T - h1}; otherwise it holds {0, ..., bound1} inclusive.
    """

    h1: float
    h2: float
    bound1: float
    bound2: float
    periodic1: bool = False

    def __post_init__(self):
        _check_mesh(self.bound1, self.h1, "Grid2D axis 1")
        _check_mesh(self.bound2, self.h2, "Grid2D axis 2")

    @property
    def n1(self) -> int:
        n = _check_mesh(self.bound1, self.h1, "Grid2D axis 1")
        return n - 1 if self.periodic1 else n

    @property
    def n2(self) -> int:
        return _check_mesh(self.bound2, self.h2, "Grid2D axis 2")

    @property
    def axis1(self) -> np.ndarray:
        return np.arange(self.n1 + 1) * self.h1

    @property
    def axis2(self) -> np.ndarray:
        return np.arange(self.n2 + 1) * self.h2


@dataclass(frozen=True)
class ControlSet:
    """Sorted finite set of harvesting (u > 0) / stocking (u < 0) rates; 0 in U."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0 or np.any(np.diff(v) <= 0):
            raise InvalidParams("controls must be a strictly increasing 1-D list")
        if not np.any(v == 0.0):
            raise InvalidParams("the control set must contain 0")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_range(cls, umin: float, umax: float, step: float) -> "ControlSet":
        if step <= 0:
            raise InvalidParams("control step must be > 0")
        k0, k1 = round(umin / step), round(umax / step)
        if abs(k0 * step - umin) > 1e-9 or abs(k1 * step - umax) > 1e-9:
            raise InvalidParams("control bounds must be integer multiples of the step")
        if not k0 <= 0 <= k1:
            raise InvalidParams("the control range must contain 0")
        return cls(np.arange(k0, k1 + 1) * step)

    @property
    def n(self) -> int:
        return self.values.size


class KernelRow(NamedTuple):
    """Sparse view of one (state, regime, control) transition row."""

    coords: tuple
    regime: int          # 1-based
    control: float
    dt: float
    entries: list        # [(target coords, target regime, probability), ...]


@dataclass(frozen=True)
class TransitionKernel:
    """Materialized controlled chain for the non-periodic formulations.

    ``probs``/``targets`` are (n_rows, n_controls, n_slots); ``targets`` holds
    flat (space, regime) indices.  ``space_coords`` gives, per axis, the
    coordinate of each space point (1-D kernels have one axis).  Inadmissible
    (row, control) pairs keep placeholder probabilities; every consumer must
    honor ``admissible``.
    """

    formulation: str
    controls: ControlSet
    m0: int
    space_coords: tuple          # tuple of (n_space,) coordinate arrays
    probs: np.ndarray
    targets: np.ndarray
    dt: np.ndarray
    admissible: np.ndarray
    grid: object = None

    @property
    def n_space(self) -> int:
        return self.space_coords[0].size

    @property
    def n_rows(self) -> int:
        return self.probs.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.probs.sum(axis=2)

    def rows(self) -> Iterator[KernelRow]:
        """Iterate admissible rows in their sparse form."""
        u = self.controls.values
        for r in range(self.n_rows):
            s, k = divmod(r, self.m0)
            coords = tuple(ax[s] for ax in self.space_coords)
            for j in range(u.size):
                if not self.admissible[r, j]:
                    continue
                entries = []
                for q in range(self.probs.shape[2]):
                    p = self.probs[r, j, q]
                    if p <= 0.0:
                        continue
                    ts, tk = divmod(int(self.targets[r, j, q]), self.m0)
                    tcoords = tuple(ax[ts] for ax in self.space_coords)
                    entries.append((tcoords, tk + 1, float(p)))
                yield KernelRow(coords, k + 1, float(u[j]),
                               float(self.dt[r, j]), entries)


def _eval_grid(fn, t, x, alpha) -> np.ndarray:
    """Evaluate a coefficient on a grid, tolerating scalar-only callables."""
    x = np.asarray(x, dtype=float)
    try:
        out = np.asarray(fn(t, x, alpha), dtype=float)
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(t, float(xi), alpha)) for xi in x])


def _coeff_tables(model: ModelSpec, t: float, x: np.ndarray):
    """Stack drift and squared diffusion over regimes: shapes (nx, m0)."""
    b = np.stack([_eval_grid(model.drift, t, x, k + 1)
                  for k in range(model.regimes)], axis=1)
    sig = np.stack([_eval_grid(model.diffusion, t, x, k + 1)
                    for k in range(model.regimes)], axis=1)
    if np.any(sig < 0):
        raise InvalidParams("diffusion evaluator returned a negative value")
    return b, sig * sig


def _build_1d(model: ModelSpec, gen: SwitchingGenerator, grid: Grid1D,
              controls: ControlSet, variable_effort: bool) -> TransitionKernel:
    if not model.time_homogeneous:
        raise InvalidParams("baseline/variable-effort kernels need a "
                            "time-homogeneous model")
    x = grid.states
    h = grid.h
    nx, m0, nu = x.size, gen.m0, controls.n
    b, sig2 = _coeff_tables(model, 0.0, x)          # (nx, m0)
    u = controls.values
    ueff = (u[None, :] * x[:, None])[:, None, :] if variable_effort \
        else np.broadcast_to(u, (nx, 1, nu))
    bu = b[:, :, None] - ueff                        # (nx, m0, nu)
    qkk = np.diag(gen.rates)
    qh = sig2[:, :, None] + h * np.abs(bu) - h * h * qkk[None, :, None] + h
    pup = (sig2[:, :, None] / 2.0 + np.maximum(bu, 0.0) * h) / qh
    pdn = (sig2[:, :, None] / 2.0 + np.maximum(-bu, 0.0) * h) / qh
    pself = h / qh
    dt = h * h / qh

    nslots = 3 + m0
    probs = np.zeros((nx, m0, nu, nslots))
    targets = np.zeros((nx, m0, nu, nslots), dtype=np.int32)
    probs[..., 0] = pup
    probs[..., 1] = pdn
    probs[..., 2] = pself
    for l in range(m0):
        pk = (h * h * gen.rates[:, l])[None, :, None] / qh
        pk = pk * (np.arange(m0) != l)[None, :, None]  # no slot for l == k
        probs[..., 3 + l] = pk

    i = np.arange(nx)
    up_i = np.minimum(i + 1, nx - 1)                 # reflection at x = B
    dn_i = np.maximum(i - 1, 0)
    k = np.arange(m0)
    targets[..., 0] = (up_i[:, None] * m0 + k[None, :])[:, :, None]
    targets[..., 1] = (dn_i[:, None] * m0 + k[None, :])[:, :, None]
    targets[..., 2] = (i[:, None] * m0 + k[None, :])[:, :, None]
    for l in range(m0):
        targets[..., 3 + l] = (i[:, None] * m0 + l)[:, :, None]

    admissible = np.ones((nx, m0, nu), dtype=bool)
    admissible[0] = pdn[0] == 0.0
    _require_admissible(admissible[0], "x = 0")

    nrows = nx * m0
    return TransitionKernel(
        formulation=VARIABLE_EFFORT if variable_effort else BASELINE,
        controls=controls, m0=m0, space_coords=(x,),
        probs=probs.reshape(nrows, nu, nslots),
        targets=targets.reshape(nrows, nu, nslots),
        dt=dt.reshape(nrows, nu),
        admissible=admissible.reshape(nrows, nu),
        grid=grid)


def _require_admissible(adm_state: np.ndarray, label: str) -> None:
    bad = ~adm_state.any(axis=-1)
    if np.any(bad):
        k = int(np.argmax(bad)) + 1
        raise EmptyAdmissibleSet(
            f"no admissible control at {label}, regime {k}: every control "
            "assigns positive probability to leaving the grid")


def build_baseline(model: ModelSpec, gen: SwitchingGenerator, grid: Grid1D,
                   controls: ControlSet) -> TransitionKernel:
    """Chain for bounded-rate harvesting: drift term b - u."""
    return _build_1d(model, gen, grid, controls, variable_effort=False)


def build_variable_effort(model: ModelSpec, gen: SwitchingGenerator,
                          grid: Grid1D, controls: ControlSet) -> TransitionKernel:
    """Chain for effort-bounded harvesting: drift term b - u*x."""
    return _build_1d(model, gen, grid, controls, variable_effort=True)


def build_stochastic_price(model: ModelSpec, gen: SwitchingGenerator,
                           price_dyn: PriceDynamicsSpec, grid: Grid2D,
                           controls: ControlSet) -> TransitionKernel:
    """Chain on the (phi, x) lattice for the stochastic-price formulation.

    Both axes share one mesh h.  The price coefficients are evaluated at the
    price coordinate phi.  Five spatial moves: x +- h, phi +- h, regime switch,
    plus the self loop.
    """
    if not model.time_homogeneous:
        raise InvalidParams("stochastic-price kernel needs a time-homogeneous model")
    if grid.periodic1:
        raise InvalidParams("stochastic-price grid must not be periodic")
    if abs(grid.h1 - grid.h2) > 1e-12:
        raise InvalidParams("stochastic-price grid uses one common mesh h1 = h2")
    h = grid.h2
    phi, x = grid.axis1, grid.axis2
    nphi, nx, m0, nu = phi.size, x.size, gen.m0, controls.n
    b, sig2 = _coeff_tables(model, 0.0, x)                       # (nx, m0)
    b0 = np.stack([_eval_price(price_dyn.drift0, phi, k + 1)
                   for k in range(m0)], axis=1)                  # (nphi, m0)
    s0 = np.stack([_eval_price(price_dyn.diffusion0, phi, k + 1)
                   for k in range(m0)], axis=1)
    if np.any(s0 < 0):
        raise InvalidParams("price diffusion evaluator returned a negative value")
    sig02 = s0 * s0

    u = controls.values
    shape = (nphi, nx, m0, nu)
    bu = np.broadcast_to(b[None, :, :, None] - u[None, None, None, :], shape)
    qkk = np.diag(gen.rates)
    qh = (sig2[None, :, :, None] + h * np.abs(bu)
          + sig02[:, None, :, None] + h * np.abs(b0)[:, None, :, None]
          - h * h * qkk[None, None, :, None] + h)                # (nphi, nx, m0, nu)
    dt = h * h / qh

    nslots = 5 + m0
    probs = np.zeros(shape + (nslots,))
    targets = np.zeros(shape + (nslots,), dtype=np.int32)
    probs[..., 0] = (sig2[None, :, :, None] / 2.0 + np.maximum(bu, 0.0) * h) / qh
    probs[..., 1] = (sig2[None, :, :, None] / 2.0 + np.maximum(-bu, 0.0) * h) / qh
    probs[..., 2] = h / qh
    probs[..., 3] = (sig02[:, None, :, None] / 2.0
                     + h * np.maximum(b0, 0.0)[:, None, :, None]) / qh
    probs[..., 4] = (sig02[:, None, :, None] / 2.0
                     + h * np.maximum(-b0, 0.0)[:, None, :, None]) / qh
    for l in range(m0):
        pk = (h * h * gen.rates[:, l])[None, None, :, None] / qh
        probs[..., 5 + l] = pk * (np.arange(m0) != l)[None, None, :, None]

    iphi = np.arange(nphi)[:, None, None, None]
    ix = np.arange(nx)[None, :, None, None]
    k = np.arange(m0)[None, None, :, None]
    flat = lambda ip, ii, kk: (ip * nx + ii) * m0 + kk
    targets[..., 0] = flat(iphi, np.minimum(ix + 1, nx - 1), k)   # reflect at x = B
    targets[..., 1] = flat(iphi, np.maximum(ix - 1, 0), k)
    targets[..., 2] = flat(iphi, ix, k)
    targets[..., 3] = flat(np.minimum(iphi + 1, nphi - 1), ix, k)  # reflect at phi max
    targets[..., 4] = flat(np.maximum(iphi - 1, 0), ix, k)
    for l in range(m0):
        targets[..., 5 + l] = flat(iphi, ix, np.full_like(k, l))

    admissible = np.ones(shape, dtype=bool)
    admissible[:, 0] &= probs[:, 0, :, :, 1] == 0.0    # x = 0: no down move
    admissible[0] &= probs[0, :, :, :, 4] == 0.0       # phi = 0: no down move
    for ip in range(nphi):
        _require_admissible(admissible[ip, 0],
                            f"(phi = {phi[ip]:g}, x = 0)")
    for ii in range(1, nx):
        _require_admissible(admissible[0, ii], f"(phi = 0, x = {x[ii]:g})")

    coords1 = np.repeat(phi, nx)
    coords2 = np.tile(x, nphi)
    nrows = nphi * nx * m0
    return TransitionKernel(
        formulation=STOCHASTIC_PRICE, controls=controls, m0=m0,
        space_coords=(coords1, coords2),
        probs=probs.reshape(nrows, nu, nslots),
        targets=targets.reshape(nrows, nu, nslots),
        dt=dt.reshape(nrows, nu),
        admissible=admissible.reshape(nrows, nu),
        grid=grid)


def _eval_price(fn, phi, alpha) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    try:
        out = np.asarray(fn(phi, alpha), dtype=float)
        if out.shape == phi.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(p), alpha)) for p in phi])


@dataclass(frozen=True)
class PeriodicKernel:
    """Explicit-scheme chain for periodic coefficients.

    Time always advances by h1 (wrapping T to 0), so dt = h1 everywhere and
    the chain rows depend on the slice only through the coefficient tables
    ``b`` and ``sig2`` of shape (n_slices, nx, m0).  ``adm0`` marks admissible
    controls at x = 0 per slice and regime.
    """

    formulation: str
    controls: ControlSet
    m0: int
    grid: Grid2D
    rates: np.ndarray
    b: np.ndarray
    sig2: np.ndarray
    adm0: np.ndarray

    @property
    def n_slices(self) -> int:
        return self.b.shape[0]

    @property
    def h1(self) -> float:
        return self.grid.h1

    @property
    def h2(self) -> float:
        return self.grid.h2

    def slice_probs(self, s: int):
        """Realize slice s: (pup, pdn, psw, pself), each (nx, m0, nu[, m0])."""
        h1, h2 = self.grid.h1, self.grid.h2
        u = self.controls.values
        bu = self.b[s][:, :, None] - u[None, None, :]
        c = h1 / (h2 * h2)
        pup = (self.sig2[s][:, :, None] / 2.0 + np.maximum(bu, 0.0) * h2) * c
        pdn = (self.sig2[s][:, :, None] / 2.0 + np.maximum(-bu, 0.0) * h2) * c
        nx = pup.shape[0]
        psw = np.broadcast_to(h1 * self.rates[None, :, :, None] *
                              (~np.eye(self.m0, dtype=bool))[None, :, :, None],
                              (nx, self.m0, self.m0, u.size)).copy()
        # psw axes: (x, from-regime, to-regime, control)
        pself = 1.0 - pup - pdn - psw.sum(axis=2)
        pself[-1] += pup[-1]                           # x = B: up move reflected
        pup[-1] = 0.0
        return pup, pdn, psw, pself

    def rows(self) -> Iterator[KernelRow]:
        gam, x = self.grid.axis1, self.grid.axis2
        u = self.controls.values
        nx, m0 = x.size, self.m0
        for s in range(self.n_slices):
            pup, pdn, psw, pself = self.slice_probs(s)
            gnext = gam[(s + 1) % self.n_slices]
            for i in range(nx):
                for k in range(m0):
                    for j in range(u.size):
                        if i == 0 and not self.adm0[s, k, j]:
                            continue
                        entries = []
                        if i < nx - 1 and pup[i, k, j] > 0:
                            entries.append(((gnext, x[i + 1]), k + 1, float(pup[i, k, j])))
                        if pdn[i, k, j] > 0:
                            entries.append(((gnext, x[i - 1]), k + 1, float(pdn[i, k, j])))
                        for l in range(m0):
                            if l != k and psw[i, k, l, j] > 0:
                                entries.append(((gnext, x[i]), l + 1, float(psw[i, k, l, j])))
                        if pself[i, k, j] > 0:
                            entries.append(((gnext, x[i]), k + 1, float(pself[i, k, j])))
                        yield KernelRow((gam[s], x[i]), k + 1, float(u[j]),
                                       self.grid.h1, entries)


def build_periodic(model: ModelSpec, gen: SwitchingGenerator, grid: Grid2D,
                   controls: ControlSet) -> PeriodicKernel:
    """Explicit periodic chain; raises CflViolation if h1 is too large.

    Stability requires a nonnegative self-probability at every
    (gamma, x, regime, control):
    (sigma^2 + |b - u| h2) h1 / h2^2 + h1 * sum_{l != k} q_kl <= 1.
    """
    if model.period is None:
        raise InvalidParams("build_periodic needs a model with a period")
    if not grid.periodic1:
        raise InvalidParams("build_periodic needs a gamma-periodic Grid2D")
    if abs(grid.bound1 - model.period) > 1e-9:
        raise InvalidParams("grid axis-1 span must equal the model period")
    gam, x = grid.axis1, grid.axis2
    m0 = gen.m0
    tabs = [_coeff_tables(model, float(g), x) for g in gam]
    b = np.stack([tb for tb, _ in tabs])          # (n1, nx, m0)
    sig2 = np.stack([s2 for _, s2 in tabs])
    u = controls.values
    h1, h2 = grid.h1, grid.h2
    qsum = gen.rates.sum(axis=1) - np.diag(gen.rates)   # sum_{l != k} q_kl

    worst_rate, worst_idx = -np.inf, None
    for s in range(gam.size):
        bu = np.abs(b[s][:, :, None] - u[None, None, :])
        rate = (sig2[s][:, :, None] + bu * h2) / (h2 * h2) + qsum[None, :, None]
        m = float(rate.max())
        if m > worst_rate:
            worst_rate = m
            i, k, j = np.unravel_index(int(rate.argmax()), rate.shape)
            worst_idx = (s, i, k, j)
    if worst_rate * h1 > 1.0 + 1e-12:
        s, i, k, j = worst_idx
        raise CflViolation(
            f"h1 = {h1:g} violates the explicit-scheme stability bound at "
            f"(gamma = {gam[s]:g}, x = {x[i]:g}, regime {k + 1}, u = {u[j]:g}); "
            f"largest admissible h1 is {1.0 / worst_rate:.6g}",
            gamma=float(gam[s]), x=float(x[i]), regime=int(k + 1),
            control=float(u[j]), h1_max=1.0 / worst_rate)

    # x = 0 admissibility: the down move must carry no mass
    dn0 = sig2[:, 0, :, None] / 2.0 + np.maximum(-(b[:, 0, :, None] - u), 0.0) * h2
    adm0 = dn0 == 0.0
    for s in range(gam.size):
        _require_admissible(adm0[s], f"(gamma = {gam[s]:g}, x = 0)")

    return PeriodicKernel(formulation=PERIODIC, controls=controls, m0=m0,
                          grid=grid, rates=gen.rates, b=b, sig2=sig2, adm0=adm0)


@dataclass
class ConsistencyReport:
    """Outcome of the local-consistency audit of a built kernel.

    First moments and regime-switch probabilities are exact by construction,
    so their errors are compared against ``tolerance``; the conditional
    variance carries an O(h) error compared against the computable bound
    h * (|b - u_eff| + h |q_kk| + 1) * dt, reported as a ratio.
    """

    formulation: str
    rows_checked: int
    max_row_sum_error: float
    max_first_moment_error: float
    max_variance_error: float
    max_variance_rate: float
    max_variance_bound_ratio: float
    max_switch_error: float
    max_aux_first_moment_error: float = 0.0
    max_aux_variance_error: float = 0.0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def _moments(probs, tspace, adm, coord, space):
    """Row-wise mean/variance of a coordinate jump, masked by admissibility."""
    dvals = coord[tspace] - coord[space][:, None, None]   # (rows, nu, slots)
    mean = (probs * dvals).sum(axis=2)
    second = (probs * dvals * dvals).sum(axis=2)
    var = second - mean * mean
    return np.where(adm, mean, 0.0), np.where(adm, var, 0.0)


def _collect(viol, kind, err, tol, where, coords, regime, control):
    if err > tol:
        viol.append({
            "kind": kind, "error": float(err), "tolerance": float(tol),
            "coords": coords, "regime": int(regime), "control": float(control),
        })


def consistency_check(kernel, model: ModelSpec, gen: SwitchingGenerator,
                      tolerance: float = 1e-12,
                      price_dyn: Optional[PriceDynamicsSpec] = None) -> ConsistencyReport:
    """Audit local consistency of a kernel by direct summation over its rows.

    Checks, for every interior admissible (state, regime, control): row sums,
    the exact first-moment identity E[dX] = (b - u_eff) dt, the variance gap
    |Var[dX] - sigma^2 dt| against its O(h) bound, and the exact switch
    probabilities q_kl dt.  The 2-D price kernel is additionally checked in
    its price coordinate; the periodic kernel's time coordinate advances
    deterministically by construction.  Diagnostic only: returns a report and
    never raises.
    """
    if isinstance(kernel, PeriodicKernel):
        return _consistency_periodic(kernel, model, gen, tolerance)

    u = kernel.controls.values
    m0 = kernel.m0
    nrows = kernel.n_rows
    rows = np.arange(nrows)
    space = rows // m0
    regime = rows % m0
    xvals = kernel.space_coords[-1]                 # population coordinate
    x_row = xvals[space]

    interior = np.ones(nrows, dtype=bool)
    for ax in kernel.space_coords:
        interior &= (ax[space] > ax.min()) & (ax[space] < ax.max())
    adm = kernel.admissible & interior[:, None]

    if kernel.formulation == VARIABLE_EFFORT:
        ueff = x_row[:, None] * u[None, :]
    else:
        ueff = np.broadcast_to(u, (nrows, u.size))

    t0 = 0.0
    b = np.stack([_eval_grid(model.drift, t0, np.unique(xvals), k + 1)
                  for k in range(m0)], axis=1)
    # map per (space) population value back to rows via searchsorted
    xu = np.unique(xvals)
    xi = np.searchsorted(xu, x_row)
    sig2 = np.stack([_eval_grid(model.diffusion, t0, xu, k + 1) ** 2
                     for k in range(m0)], axis=1)
    b_row = b[xi, regime]
    sig2_row = sig2[xi, regime]
    qkk_row = np.abs(np.diag(gen.rates))[regime]

    rowsum = kernel.probs.sum(axis=2)
    rs_err = np.where(adm, np.abs(rowsum - 1.0), 0.0)

    tregime = kernel.targets % m0
    tspace = kernel.targets // m0

    # population jumps measured over all slots (switch slots keep the same
    # space point, so they contribute zero displacement)
    dx_mean, dx_var = _moments(kernel.probs, tspace, adm, xvals, space)
    fm_err = np.where(adm, np.abs(dx_mean - (b_row[:, None] - ueff)
                                  * kernel.dt), 0.0)
    var_err = np.where(adm, np.abs(dx_var - sig2_row[:, None] * kernel.dt), 0.0)
    var_rate = var_err / kernel.dt
    h = float(np.min(np.diff(xu)))
    var_bound = h * (np.abs(b_row[:, None] - ueff) + h * qkk_row[:, None]
                     + 1.0) * kernel.dt
    var_ratio = np.where(adm, var_err / var_bound, 0.0)

    sw_err = np.zeros_like(kernel.dt)
    for l in range(m0):
        mask = (tregime == l) & (regime[:, None] != l)[:, :, None]
        psw = (kernel.probs * mask).sum(axis=2)
        q_l = np.where(regime != l, gen.rates[regime, l], 0.0)
        sw_err = np.maximum(sw_err, np.abs(psw - q_l[:, None] * kernel.dt))
    sw_err = np.where(adm, sw_err, 0.0)

    aux_fm = aux_var = 0.0
    if kernel.formulation == STOCHASTIC_PRICE and price_dyn is not None:
        phis = kernel.space_coords[0]
        pu = np.unique(phis)
        b0 = np.stack([_eval_price(price_dyn.drift0, pu, k + 1)
                       for k in range(m0)], axis=1)
        s02 = np.stack([_eval_price(price_dyn.diffusion0, pu, k + 1) ** 2
                        for k in range(m0)], axis=1)
        pi = np.searchsorted(pu, phis[space])
        dphi_mean, dphi_var = _moments(kernel.probs, tspace, adm, phis, space)
        aux_fm_arr = np.where(adm, np.abs(dphi_mean - b0[pi, regime][:, None]
                                          * kernel.dt), 0.0)
        aux_var_arr = np.where(adm, np.abs(dphi_var - s02[pi, regime][:, None]
                                           * kernel.dt), 0.0)
        aux_fm = float(aux_fm_arr.max())
        aux_var = float(aux_var_arr.max())

    viol = []
    for kind, err, tol in (("row_sum", rs_err, tolerance),
                           ("first_moment", fm_err, tolerance),
                           ("variance_bound", np.where(var_ratio > 1.0,
                                                       var_ratio, 0.0), 1.0),
                           ("switch_probability", sw_err, tolerance)):
        if err.max() > tol:
            r, j = np.unravel_index(int(err.argmax()), err.shape)
            s, k = divmod(int(r), m0)
            coords = tuple(float(ax[s]) for ax in kernel.space_coords)
            _collect(viol, kind, float(err[r, j]), tol, None, coords, k + 1,
                     u[j])

    return ConsistencyReport(
        formulation=kernel.formulation,
        rows_checked=int(adm.sum()),
        max_row_sum_error=float(rs_err.max()),
        max_first_moment_error=float(fm_err.max()),
        max_variance_error=float(var_err.max()),
        max_variance_rate=float(var_rate.max()),
        max_variance_bound_ratio=float(var_ratio.max()),
        max_switch_error=float(sw_err.max()),
        max_aux_first_moment_error=aux_fm,
        max_aux_variance_error=aux_var,
        violations=viol)


def _consistency_periodic(kernel: PeriodicKernel, model: ModelSpec,
                          gen: SwitchingGenerator,
                          tolerance: float) -> ConsistencyReport:
    gam, x = kernel.grid.axis1, kernel.grid.axis2
    u = kernel.controls.values
    h1, h2 = kernel.h1, kernel.h2
    m0 = kernel.m0
    rs_max = fm_max = var_max = rate_max = ratio_max = sw_max = 0.0
    checked = 0
    viol = []
    qkk = np.abs(np.diag(gen.rates))
    for s in range(kernel.n_slices):
        pup, pdn, psw, pself = kernel.slice_probs(s)
        rowsum = pup + pdn + psw.sum(axis=2) + pself
        inner = slice(1, x.size - 1)
        bu = kernel.b[s][:, :, None] - u[None, None, :]
        mean = h2 * (pup - pdn)
        var = h2 * h2 * (pup + pdn) - mean * mean
        fm = np.abs(mean - bu * h1)[inner]
        ve = np.abs(var - kernel.sig2[s][:, :, None] * h1)[inner]
        vb = (h2 * (np.abs(bu) + h2 * qkk[None, :, None] + 1.0) * h1)[inner]
        sw = np.abs(psw - h1 * kernel.rates[None, :, :, None]
                    * (~np.eye(m0, dtype=bool))[None, :, :, None])
        rs = np.abs(rowsum - 1.0)[inner]
        checked += fm.size
        rs_max = max(rs_max, float(rs.max()))
        fm_max = max(fm_max, float(fm.max()))
        var_max = max(var_max, float(ve.max()))
        rate_max = max(rate_max, float(ve.max()) / h1)
        ratio_max = max(ratio_max, float((ve / vb).max()))
        sw_max = max(sw_max, float(sw[inner].max()))
        for kind, err, tol in (("row_sum", float(rs.max()), tolerance),
                               ("first_moment", float(fm.max()), tolerance),
                               ("variance_bound", float((ve / vb).max()), 1.0),
                               ("switch_probability", float(sw[inner].max()),
                                tolerance)):
            if err > tol and len(viol) < 100:
                _collect(viol, kind, err, tol, None, (float(gam[s]),), 0, 0.0)

    return ConsistencyReport(
        formulation=PERIODIC, rows_checked=checked,
        max_row_sum_error=rs_max, max_first_moment_error=fm_max,
        max_variance_error=var_max, max_variance_rate=rate_max,
        max_variance_bound_ratio=ratio_max,
        max_switch_error=sw_max, violations=viol)


def dump_rows(kernel, path) -> None:
    """Write one delimited record per admissible row for audit.

    Columns: formulation, state coordinates, regime, control, dt, then the
    transition list as ``coords>regime:prob`` items joined by ';'.
    """
    with open(path, "w") as f:
        f.write("formulation,coords,regime,control,dt,transitions\n")
        for row in kernel.rows():
            coords = "|".join(f"{c:.12g}" for c in row.coords)
            ent = ";".join(
                "|".join(f"{c:.12g}" for c in np.atleast_1d(tc))
                + f">{tk}:{p:.17g}"
                for tc, tk, p in row.entries)
            f.write(f"{kernel.formulation},{coords},{row.regime},"
                    f"{row.control:.12g},{row.dt:.17g},{ent}\n")
