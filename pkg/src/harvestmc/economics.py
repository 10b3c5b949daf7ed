"""Price-cost functions: demand-curve price forms and the cost catalog.

The solver consumes a single reward evaluator p(t, x, alpha, u).  In absolute
mode p = P*u - C (the control is a quantity per unit time); in variable-effort
mode p = P*x*u - C (the control is an effort rate, the harvested quantity is
u*x).  Price and cost evaluators take (t, x, alpha, u) and must be bounded on
compact (x, u) boxes; all catalog costs vanish at u = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, InvalidParams, UnknownCost

ABSOLUTE = "absolute"
VARIABLE_EFFORT = "variable_effort"


@dataclass(frozen=True)
class PriceCostSpec:
    """Price and cost evaluators plus the harvesting mode.

    ``u_domain_min`` is an open lower bound on admissible controls used to
    keep cost evaluators total (the log1p cost is undefined for u <= -scale);
    controls at or below it are dropped when a control set is assembled.
    """

    price: Callable
    cost: Callable
    mode: str = ABSOLUTE
    period: Optional[float] = None
    u_domain_min: Optional[float] = None

    def __post_init__(self):
        if self.mode not in (ABSOLUTE, VARIABLE_EFFORT):
            raise InvalidParams(f"unknown price-cost mode '{self.mode}'")


def evaluate(spec: PriceCostSpec, t, x, alpha, u):
    """Reward flow p(t, x, alpha, u) under the spec's mode."""
    revenue = spec.price(t, x, alpha, u) * np.asarray(u)
    if spec.mode == VARIABLE_EFFORT:
        revenue = revenue * np.asarray(x)
    return revenue - spec.cost(t, x, alpha, u)


@dataclass(frozen=True)
class DemandForm:
    """Instantaneous market demand: price as a function of the supplied rate.

    kinds: ``constant`` (price k1); ``linear`` (k1 - k2*u, floored at 0);
    ``iso_elastic`` (constant price elasticity ``eps`` < 0).  The iso-elastic
    form is stored normalized, k1*(1 + u/k2)^(1/eps), matching the display
    form used in the experiments; set ``normalized=False`` for the generic
    k1*|k2 + u|^(1/eps).  Output is always capped at ``pbar``.
    """

    kind: str
    k1: float = 1.0
    k2: float = 1.0
    eps: float = -1.0
    pbar: float = 10.0
    normalized: bool = True

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "iso_elastic"):
            raise InvalidParams(f"unknown demand form '{self.kind}'")
        if self.k1 <= 0 or self.k2 <= 0 or self.pbar <= 0:
            raise InvalidParams("demand constants k1, k2, pbar must be > 0")
        if self.kind == "iso_elastic" and self.eps >= 0:
            raise InvalidParams("price elasticity eps must be < 0")


def demand_price(form: DemandForm, u):
    """Evaluate the demand price at supply rate u, clamped to [0, pbar]."""
    u = np.asarray(u, dtype=float)
    if form.kind == "constant":
        out = np.full_like(u, min(form.k1, form.pbar))
    elif form.kind == "linear":
        out = np.clip(form.k1 - form.k2 * u, 0.0, form.pbar)
    else:
        base = np.abs(1.0 + u / form.k2) if form.normalized else np.abs(form.k2 + u)
        with np.errstate(divide="ignore"):
            raw = form.k1 * np.where(base > 0.0, base ** (1.0 / form.eps), np.inf)
        out = np.minimum(raw, form.pbar)
    return out if out.ndim else float(out)


def catalog_cost(kind: str, **params) -> Callable:
    """Build a catalog cost evaluator C(t, x, alpha, u).

    kinds: ``zero``; ``quadratic`` (coeff*u^2, coeff default 1/2);
    ``sqrt_abs``; ``log1p`` (ln(1 + u/scale), domain u > -scale);
    ``abs``; ``seasonal_quadratic`` ((1 + sin(2 pi t / period)) * coeff * u^2).
    """
    if kind == "zero":
        def cost(t, x, alpha, u):
            return np.zeros_like(np.asarray(u, dtype=float))
        return cost
    if kind == "quadratic":
        coeff = float(params.pop("coeff", 0.5))
        def cost(t, x, alpha, u):
            return coeff * np.asarray(u) ** 2
        return cost
    if kind == "sqrt_abs":
        def cost(t, x, alpha, u):
            return np.sqrt(np.abs(u))
        return cost
    if kind == "log1p":
        scale = float(params.pop("scale", 3.0))
        def cost(t, x, alpha, u):
            u = np.asarray(u, dtype=float)
            if np.any(u <= -scale):
                raise DomainError(f"log1p cost undefined for u <= -{scale}")
            return np.log(1.0 + u / scale)
        return cost
    if kind == "abs":
        def cost(t, x, alpha, u):
            return np.abs(u)
        return cost
    if kind == "seasonal_quadratic":
        coeff = float(params.pop("coeff", 0.5))
        period = float(params.pop("period", 1.0))
        w = 2.0 * np.pi / period
        def cost(t, x, alpha, u):
            return (1.0 + np.sin(w * np.asarray(t, dtype=float))) * coeff * np.asarray(u) ** 2
        return cost
    raise UnknownCost(f"unknown cost '{kind}'")


def constant_price(value: float = 1.0) -> Callable:
    def price(t, x, alpha, u):
        return np.full_like(np.asarray(u, dtype=float), value)
    return price


def demand_price_fn(form: DemandForm) -> Callable:
    """Wrap a DemandForm as a price evaluator (state- and time-independent)."""
    def price(t, x, alpha, u):
        return demand_price(form, u)
    return price


def make_pricecost(price: Callable, cost: Callable, mode: str = ABSOLUTE,
                   period: Optional[float] = None,
                   u_domain_min: Optional[float] = None) -> PriceCostSpec:
    return PriceCostSpec(price, cost, mode, period, u_domain_min)


def admissible_controls(spec: PriceCostSpec, values: np.ndarray) -> np.ndarray:
    """Drop controls outside the cost evaluator's domain."""
    values = np.asarray(values, dtype=float)
    if spec.u_domain_min is None:
        return values
    return values[values > spec.u_domain_min]
