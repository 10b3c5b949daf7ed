"""Population models with Markovian switching and derived quantities.

A model is a pair of coefficient evaluators ``b(t, x, alpha)`` and
``sigma(t, x, alpha)`` together with the regime count and an optional period.
Evaluators are pure functions; time-homogeneous models ignore ``t``.  Regimes
are numbered 1..m0.  All catalog evaluators accept numpy arrays for ``x`` (and
for ``alpha``, as an integer array of the same shape) so that grid tabulation
and vectorized simulation need no wrapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParams, NotPerCapitaModel, ReducibleGenerator, UnknownModel

Evaluator = Callable[[float, np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class SwitchingGenerator:
    """Generator matrix Q of the environmental Markov chain.

    Off-diagonal entries are jump rates (1/time); each row sums to zero.  The
    diagonal is recomputed as minus the off-diagonal row sum so the zero-sum
    invariant holds exactly.  ``m0 = 1`` with rates ``[[0]]`` is the
    no-switching degenerate case.
    """

    rates: np.ndarray

    def __post_init__(self):
        q = np.array(self.rates, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
            raise InvalidParams("generator must be a square m0 x m0 matrix")
        off = q.copy()
        np.fill_diagonal(off, 0.0)
        if np.any(off < 0.0):
            raise InvalidParams("off-diagonal transition rates must be >= 0")
        if np.max(np.abs(q.sum(axis=1))) > 1e-9:
            raise InvalidParams("generator rows must sum to 0")
        np.fill_diagonal(off, -off.sum(axis=1))
        off.flags.writeable = False
        object.__setattr__(self, "rates", off)

    @property
    def m0(self) -> int:
        return self.rates.shape[0]

    def is_irreducible(self) -> bool:
        """True when the positive-rate graph is strongly connected."""
        m = self.m0
        if m == 1:
            return True
        adj = self.rates > 0.0
        return _reaches_all(adj) and _reaches_all(adj.T)


def symmetric_two_state(rate: float) -> SwitchingGenerator:
    """Two-regime generator with q12 = q21 = rate."""
    if rate < 0:
        raise InvalidParams("switching rate must be >= 0")
    return SwitchingGenerator(np.array([[-rate, rate], [rate, -rate]]))


def _reaches_all(adj: np.ndarray) -> bool:
    m = adj.shape[0]
    seen = np.zeros(m, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        i = stack.pop()
        for j in np.nonzero(adj[i])[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


@dataclass(frozen=True)
class PerCapitaParams:
    """Regime-wise (mu, kappa, sigma) of a linear-diffusion per-capita model."""

    mu: np.ndarray
    kappa: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class ModelSpec:
    """Drift/diffusion evaluators plus regime count and optional period."""

    name: str
    drift: Evaluator
    diffusion: Evaluator
    regimes: int
    period: Optional[float] = None
    percap: Optional[PerCapitaParams] = field(default=None, repr=False)

    @property
    def time_homogeneous(self) -> bool:
        return self.period is None


@dataclass(frozen=True)
class PriceDynamicsSpec:
    """Coefficients b0(phi, alpha), sigma0(phi, alpha) of the price SDE."""

    drift0: Callable
    diffusion0: Callable
    phi_max: float


def stationary_distribution(gen: SwitchingGenerator) -> np.ndarray:
    """Stationary distribution nu of the switching chain, solving nu Q = 0.

    Solves the dense linear system with the normalization row appended; m0 is
    small so no sparse machinery is warranted.

    Raises
    ------
    ReducibleGenerator
        If the rate graph is not strongly connected.
    """
    if not gen.is_irreducible():
        raise ReducibleGenerator("generator rate graph is not strongly connected")
    m = gen.m0
    if m == 1:
        return np.array([1.0])
    a = np.vstack([gen.rates.T[:-1], np.ones(m)])
    b = np.zeros(m)
    b[-1] = 1.0
    nu = np.linalg.solve(a, b)
    resid = np.max(np.abs(nu @ gen.rates))
    if resid > 1e-12 or np.any(nu <= 0.0):
        raise ReducibleGenerator(
            f"stationary solve failed (residual {resid:.2e}); generator ill-conditioned"
        )
    return nu


def stochastic_growth_rate(model: ModelSpec, alpha: int) -> float:
    """r(alpha) = mu(alpha) - sigma^2(alpha)/2 for per-capita models."""
    if model.percap is None:
        raise NotPerCapitaModel(
            f"model '{model.name}' has no regime-wise per-capita parameters"
        )
    p = model.percap
    return float(p.mu[alpha - 1] - p.sigma[alpha - 1] ** 2 / 2.0)


def persistence_criterion(model: ModelSpec, gen: SwitchingGenerator) -> float:
    """Stationary average of the regime growth rates, sum_k nu_k r(k)."""
    nu = stationary_distribution(gen)
    return float(
        sum(nu[k] * stochastic_growth_rate(model, k + 1) for k in range(gen.m0))
    )


def averaged_model(model: ModelSpec, gen: SwitchingGenerator) -> ModelSpec:
    """Fast-switching limit: single-regime model with stationary-averaged coefficients.

    Drift averages linearly, the diffusion averages in quadrature.  Averaging a
    per-capita (Verhulst) model yields the Verhulst model with averaged
    (mu, kappa, sigma^2), so per-capita parameters are preserved exactly.
    """
    if not model.time_homogeneous:
        raise InvalidParams("averaged_model requires a time-homogeneous model")
    nu = stationary_distribution(gen)
    if model.percap is not None:
        p = model.percap
        return catalog(
            "verhulst",
            mu=float(nu @ p.mu),
            kappa=float(nu @ p.kappa),
            sigma=float(np.sqrt(nu @ (p.sigma**2))),
            regimes=1,
            name=model.name + "_avg",
        )
    m0, b, s = gen.m0, model.drift, model.diffusion

    def bbar(t, x, alpha):
        return sum(nu[k] * b(t, x, k + 1) for k in range(m0))

    def sbar(t, x, alpha):
        return np.sqrt(sum(nu[k] * np.asarray(s(t, x, k + 1)) ** 2 for k in range(m0)))

    return ModelSpec(model.name + "_avg", bbar, sbar, regimes=1, period=model.period)


def _per_regime(value, regimes: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.array(value, dtype=float))
    if arr.size == 1:
        arr = np.full(regimes, arr[0])
    if arr.size != regimes:
        raise InvalidParams(f"'{name}' must be scalar or one value per regime")
    return arr


def catalog(kind: str, *, regimes: int | None = None, name: str | None = None,
            **params) -> ModelSpec:
    """Build a catalog population model.

    Supported kinds: ``verhulst``, ``gompertz``, ``nisbet_gurney``,
    ``seasonal_verhulst``, ``custom``.  Regime-wise parameters may be given as
    scalars (broadcast) or sequences of length ``regimes``.
    """
    if kind == "custom":
        drift = params.pop("drift")
        diffusion = params.pop("diffusion")
        period = params.pop("period", None)
        if regimes is None:
            raise InvalidParams("custom model needs an explicit regime count")
        return ModelSpec(name or "custom", drift, diffusion, regimes, period)

    if kind not in ("verhulst", "gompertz", "nisbet_gurney", "seasonal_verhulst"):
        raise UnknownModel(f"unknown model '{kind}'")

    if regimes is None:
        regimes = max(
            np.atleast_1d(np.asarray(v)).size
            for v in params.values()
            if not callable(v)
        )
    mu = _per_regime(params.pop("mu"), regimes, "mu")
    sigma = _per_regime(params.pop("sigma", 1.0), regimes, "sigma")
    if np.any(sigma < 0):
        raise InvalidParams("sigma must be >= 0")

    if kind == "verhulst":
        kappa = _per_regime(params.pop("kappa", 1.0), regimes, "kappa")
        _reject_extra(params, kind)

        def drift(t, x, alpha):
            return x * (mu[alpha - 1] - kappa[alpha - 1] * np.asarray(x))

        def diffusion(t, x, alpha):
            return sigma[alpha - 1] * np.asarray(x)

        return ModelSpec(name or "verhulst", drift, diffusion, regimes,
                         percap=PerCapitaParams(mu, kappa, sigma))

    if kind == "gompertz":
        cap = float(params.pop("cap", 2.0))
        if cap <= 0:
            raise InvalidParams("gompertz cap must be > 0")
        _reject_extra(params, kind)

        def drift(t, x, alpha):
            # analytic limit 0 at x = 0; the grid includes the origin
            x = np.asarray(x, dtype=float)
            safe = np.where(x > 0.0, x, 1.0)
            return np.where(x > 0.0, mu[alpha - 1] * x * np.log(cap / safe), 0.0)

        def diffusion(t, x, alpha):
            return sigma[alpha - 1] * np.asarray(x)

        return ModelSpec(name or "gompertz", drift, diffusion, regimes)

    if kind == "nisbet_gurney":
        _reject_extra(params, kind)

        def drift(t, x, alpha):
            x = np.asarray(x, dtype=float)
            return mu[alpha - 1] * x * np.exp(-x) - x

        def diffusion(t, x, alpha):
            return sigma[alpha - 1] * np.asarray(x)

        return ModelSpec(name or "nisbet_gurney", drift, diffusion, regimes)

    # seasonal_verhulst: logistic drift additively forced by a sine wave
    kappa = _per_regime(params.pop("kappa", 1.0), regimes, "kappa")
    amplitude = float(params.pop("amplitude", 1.0))
    sine_sign = float(params.pop("sine_sign", 1.0))
    period = float(params.pop("period", 1.0))
    if period <= 0:
        raise InvalidParams("period must be > 0")
    _reject_extra(params, kind)
    w = 2.0 * np.pi / period

    def drift(t, x, alpha):
        x = np.asarray(x, dtype=float)
        forcing = sine_sign * amplitude * np.sin(w * np.asarray(t, dtype=float))
        return x * (mu[alpha - 1] + forcing - kappa[alpha - 1] * x)

    def diffusion(t, x, alpha):
        return sigma[alpha - 1] * np.asarray(x)

    return ModelSpec(name or "seasonal_verhulst", drift, diffusion, regimes,
                     period=period)


def _reject_extra(params: dict, kind: str) -> None:
    if params:
        raise InvalidParams(f"unknown parameters for '{kind}': {sorted(params)}")


def catalog_price_dynamics(kind: str, **params) -> PriceDynamicsSpec:
    """Price-state SDE coefficients for the stochastic-price formulation.

    ``logistic``: b0 = phi (cap - phi), sigma0 = noise * phi (cap - phi).  Both
    vanish at 0 and at the cap, so the price state stays in [0, cap].
    """
    if kind == "custom":
        return PriceDynamicsSpec(params["drift0"], params["diffusion0"],
                                 float(params["phi_max"]))
    if kind != "logistic":
        raise UnknownModel(f"unknown price dynamics '{kind}'")
    cap = float(params.pop("cap", 0.4))
    noise = float(params.pop("noise", 0.5))
    if cap <= 0 or noise < 0:
        raise InvalidParams("logistic price dynamics needs cap > 0 and noise >= 0")
    _reject_extra(params, kind)

    def drift0(phi, alpha):
        phi = np.asarray(phi, dtype=float)
        return phi * (cap - phi)

    def diffusion0(phi, alpha):
        phi = np.asarray(phi, dtype=float)
        return noise * phi * (cap - phi)

    return PriceDynamicsSpec(drift0, diffusion0, cap)
