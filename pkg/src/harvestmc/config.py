"""Experiment configuration: TOML parsing, validation, and assembly.

A config file has a top-level ``formulation`` tag and sections mirroring the
package modules::

    formulation = "baseline"

    [dynamics.model]        # catalog model and its parameters
    [dynamics.generator]    # switching rates
    [dynamics.price_dynamics]   # stochastic_price formulation only
    [economics.price]       # price form
    [economics.cost]        # cost form
    [kernel.grid]           # h (or h1/h2), B, phi_max
    [kernel.controls]       # min, max, step
    [solver]                # delta, tolerance, max_iterations
    [montecarlo]            # optional: paths, dt, horizon, seed, x0, alpha0

Every output file records a short hash of the effective (parsed plus
overridden) configuration, so identical configs are recognizable downstream.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as toml
else:
    import tomli as toml

from . import dynamics, economics
from .dynamics import ModelSpec, PriceDynamicsSpec, SwitchingGenerator
from .economics import PriceCostSpec
from .errors import ConfigError
from .kernel import (BASELINE, PERIODIC, STOCHASTIC_PRICE, VARIABLE_EFFORT,
                     ControlSet, Grid1D, Grid2D)
from .montecarlo import SimConfig

FORMULATIONS = (BASELINE, VARIABLE_EFFORT, STOCHASTIC_PRICE, PERIODIC)


@dataclass(frozen=True)
class ExperimentConfig:
    """All solver inputs assembled from one parsed config."""

    formulation: str
    model: ModelSpec
    generator: SwitchingGenerator
    pricecost: PriceCostSpec
    price_dyn: Optional[PriceDynamicsSpec]
    grid: object
    controls: ControlSet
    delta: float
    tolerance: float
    max_iterations: int
    policy_refresh: int
    mc: Optional[SimConfig]
    mc_start: Optional[tuple]
    config_hash: str
    raw: dict


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as f:
            return toml.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except toml.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}")


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def set_by_path(raw: dict, dotted: str, value) -> None:
    """Assign a (possibly new) value at a dotted key path like
    'dynamics.generator.rate'."""
    keys = dotted.split(".")
    node = raw
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"config path '{dotted}': '{k}' is not a table")
    node[keys[-1]] = value


class _Section:
    """Typed accessor that reports the full key path on errors."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"[{path}] must be a table")
        self.data = dict(data)
        self.path = path

    def take(self, key, default=None, required=False, kind=None):
        if key not in self.data:
            if required:
                raise ConfigError(f"missing required key '{self.path}.{key}'")
            return default
        v = self.data.pop(key)
        if kind is float and isinstance(v, (int, float)) \
                and not isinstance(v, bool):
            return float(v)
        if kind is int and isinstance(v, int) and not isinstance(v, bool):
            return int(v)
        if kind is not None and not isinstance(v, kind):
            raise ConfigError(f"'{self.path}.{key}' has wrong type "
                              f"({type(v).__name__})")
        return v

    def finish(self):
        if self.data:
            extra = ", ".join(sorted(self.data))
            raise ConfigError(f"unknown keys in [{self.path}]: {extra}")


def _build_model(sec: _Section) -> ModelSpec:
    kind = sec.take("kind", required=True, kind=str)
    params = dict(sec.data)
    sec.data.clear()
    try:
        return dynamics.catalog(kind, **params)
    except TypeError as e:
        raise ConfigError(f"[dynamics.model]: {e}")


def _build_generator(sec: _Section) -> SwitchingGenerator:
    rate = sec.take("rate", kind=float)
    rates = sec.take("rates", kind=list)
    sec.finish()
    if (rate is None) == (rates is None):
        raise ConfigError("[dynamics.generator] needs exactly one of "
                          "'rate' (symmetric 2-state) or 'rates' (matrix)")
    if rate is not None:
        return dynamics.symmetric_two_state(rate)
    return SwitchingGenerator(np.array(rates, dtype=float))


def _build_price(sec: _Section):
    kind = sec.take("kind", default="constant", kind=str)
    if kind == "constant":
        value = sec.take("value", default=1.0, kind=float)
        sec.finish()
        return economics.constant_price(value)
    if kind in ("demand_linear", "demand_iso_elastic", "demand_constant"):
        form = economics.DemandForm(
            kind={"demand_linear": "linear",
                  "demand_iso_elastic": "iso_elastic",
                  "demand_constant": "constant"}[kind],
            k1=sec.take("k1", default=1.0, kind=float),
            k2=sec.take("k2", default=1.0, kind=float),
            eps=sec.take("eps", default=-1.0, kind=float),
            pbar=sec.take("pbar", default=10.0, kind=float),
            normalized=sec.take("normalized", default=True, kind=bool))
        sec.finish()
        return economics.demand_price_fn(form)
    raise ConfigError(f"unknown price kind '{kind}'")


def _build_cost(sec: _Section):
    kind = sec.take("kind", default="zero", kind=str)
    params = dict(sec.data)
    sec.data.clear()
    try:
        cost = economics.catalog_cost(kind, **params)
    except TypeError as e:
        raise ConfigError(f"[economics.cost]: {e}")
    u_floor = -float(params.get("scale", 3.0)) if kind == "log1p" else None
    period = params.get("period") if kind == "seasonal_quadratic" else None
    return cost, u_floor, period


def build_experiment(raw: dict) -> ExperimentConfig:
    """Validate a parsed config dict and construct all module inputs."""
    raw = dict(raw)
    h = config_hash(raw)
    form = raw.get("formulation", BASELINE)
    if form not in FORMULATIONS:
        raise ConfigError(f"unknown formulation '{form}' "
                          f"(expected one of {', '.join(FORMULATIONS)})")

    dyn_tab = raw.get("dynamics", {})
    if "model" not in dyn_tab:
        raise ConfigError("missing required table [dynamics.model]")
    model = _build_model(_Section(dyn_tab["model"], "dynamics.model"))
    if "generator" in dyn_tab:
        gen = _build_generator(_Section(dyn_tab["generator"],
                                        "dynamics.generator"))
    else:
        gen = SwitchingGenerator(np.zeros((model.regimes, model.regimes)))
    if model.regimes != gen.m0:
        raise ConfigError(
            f"model has {model.regimes} regimes but the generator has "
            f"{gen.m0}")

    price_dyn = None
    if form == STOCHASTIC_PRICE:
        if "price_dynamics" not in dyn_tab:
            raise ConfigError("stochastic_price formulation needs "
                              "[dynamics.price_dynamics]")
        sec = _Section(dyn_tab["price_dynamics"], "dynamics.price_dynamics")
        kind = sec.take("kind", default="logistic", kind=str)
        params = dict(sec.data)
        sec.data.clear()
        price_dyn = dynamics.catalog_price_dynamics(kind, **params)

    econ_tab = raw.get("economics", {})
    mode = economics.VARIABLE_EFFORT if form == VARIABLE_EFFORT \
        else economics.ABSOLUTE
    price = _build_price(_Section(econ_tab.get("price", {}),
                                  "economics.price"))
    cost, u_floor, cost_period = _build_cost(_Section(econ_tab.get("cost", {}),
                                                      "economics.cost"))
    period = model.period if model.period is not None else cost_period
    pricecost = PriceCostSpec(price, cost, mode, period, u_floor)

    kern_tab = raw.get("kernel", {})
    gsec = _Section(kern_tab.get("grid", {}), "kernel.grid")
    csec = _Section(kern_tab.get("controls", {}), "kernel.controls")
    controls = ControlSet.from_range(csec.take("min", default=-2.0, kind=float),
                                     csec.take("max", default=3.0, kind=float),
                                     csec.take("step", default=0.002,
                                               kind=float))
    csec.finish()
    vals = economics.admissible_controls(pricecost, controls.values)
    if vals.size != controls.n:
        controls = ControlSet(vals)

    B = gsec.take("B", default=4.0, kind=float)
    if form in (BASELINE, VARIABLE_EFFORT):
        grid = Grid1D(h=gsec.take("h", required=True, kind=float), B=B)
    elif form == STOCHASTIC_PRICE:
        hh = gsec.take("h", required=True, kind=float)
        phi_max = gsec.take("phi_max", default=price_dyn.phi_max, kind=float)
        grid = Grid2D(h1=hh, h2=hh, bound1=phi_max, bound2=B)
    else:
        if model.period is None:
            raise ConfigError("periodic formulation needs a model with a "
                              "period (seasonal catalog entry)")
        grid = Grid2D(h1=gsec.take("h1", required=True, kind=float),
                      h2=gsec.take("h2", required=True, kind=float),
                      bound1=model.period, bound2=B, periodic1=True)
    gsec.finish()

    ssec = _Section(raw.get("solver", {}), "solver")
    delta = ssec.take("delta", default=0.02, kind=float)
    tolerance = ssec.take("tolerance", default=1e-8, kind=float)
    max_iterations = ssec.take("max_iterations", default=10_000_000, kind=int)
    policy_refresh = ssec.take("policy_refresh", default=512, kind=int)
    ssec.finish()
    if delta <= 0:
        raise ConfigError("'solver.delta' must be > 0")

    mc = mc_start = None
    if "montecarlo" in raw:
        msec = _Section(raw["montecarlo"], "montecarlo")
        x0 = msec.take("x0", default=1.0, kind=float)
        alpha0 = msec.take("alpha0", default=1, kind=int)
        phi0 = msec.take("phi0", default=None, kind=float)
        mc = SimConfig(dt=msec.take("dt", default=1e-3, kind=float),
                       horizon=msec.take("horizon", default=600.0, kind=float),
                       paths=msec.take("paths", default=10_000, kind=int),
                       seed=msec.take("seed", default=0, kind=int),
                       delta=delta,
                       trace_stride=msec.take("trace_stride", default=100,
                                              kind=int),
                       track_occupancy=msec.take("track_occupancy",
                                                 default=False, kind=bool))
        msec.finish()
        if not 1 <= alpha0 <= gen.m0:
            raise ConfigError("'montecarlo.alpha0' out of range")
        mc_start = ((phi0, x0), alpha0) if form == STOCHASTIC_PRICE \
            else (x0, alpha0)
        if form == STOCHASTIC_PRICE and phi0 is None:
            raise ConfigError("stochastic_price simulation needs "
                              "'montecarlo.phi0'")

    known = {"formulation", "dynamics", "economics", "kernel", "solver",
             "montecarlo"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(extra))}")

    return ExperimentConfig(form, model, gen, pricecost, price_dyn, grid,
                            controls, delta, tolerance, max_iterations,
                            policy_refresh, mc, mc_start, h, raw)


def load_experiment(path) -> ExperimentConfig:
    return build_experiment(load_toml(path))
