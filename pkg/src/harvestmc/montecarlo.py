"""Forward simulation of the controlled switching diffusion under a policy.

Paths follow Euler-Maruyama steps of the controlled SDE; the environmental
chain is layered on top with exact exponential holding times, a switch taking
effect at the first grid time after the jump.  The control is read from a
solved policy by nearest-grid lookup (bang-bang policies make interpolated
controls meaningless).  Population is clamped to [0, B] after each step:
Euler can overshoot the absorbing origin, and B reproduces the reflecting
truncation of the solver grid.  At x = 0 exactly, harvesting controls are
clamped to 0 before the reward accrues: an extinct population cannot be
harvested, matching the chain's admissibility restriction at the origin.

Paths are simulated in fixed-size blocks, each drawing from its own
counter-based Philox stream keyed by (seed, block index), so estimates are
bit-for-bit reproducible and independent of how blocks are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import economics
from .dynamics import ModelSpec, PriceDynamicsSpec, SwitchingGenerator
from .errors import InvalidParams
from .kernel import PERIODIC, STOCHASTIC_PRICE, VARIABLE_EFFORT
from .solver import Policy

BLOCK = 5000


@dataclass(frozen=True)
class SimConfig:
    """Euler step, truncation horizon, path count, and RNG seed.

    The infinite-horizon integral is truncated at ``horizon``; the neglected
    tail is bounded by ||p||_inf e^{-delta horizon} / delta and reported with
    every estimate rather than hidden.
    """

    dt: float = 1e-3
    horizon: float = 600.0
    paths: int = 10_000
    seed: int = 0
    delta: float = 0.02
    policy_rule: str = "nearest"
    trace_stride: int = 100
    track_occupancy: bool = False

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0 or self.paths < 1:
            raise InvalidParams("dt, horizon must be > 0 and paths >= 1")
        if self.policy_rule != "nearest":
            raise InvalidParams("only nearest-grid policy lookup is supported")


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    standard_error: float
    tail_bound: float
    paths: int
    occupancy: Optional[np.ndarray] = None
    occupancy_se: Optional[np.ndarray] = None


def _nearest(ax: np.ndarray, v: np.ndarray) -> np.ndarray:
    h = ax[1] - ax[0]
    return np.clip(np.rint(v / h).astype(np.int64), 0, ax.size - 1)


class _RegimeSampler:
    """Exponential holding times and jump targets of the switching chain."""

    def __init__(self, gen: SwitchingGenerator):
        self.m0 = gen.m0
        self.rate = -np.diag(gen.rates)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = gen.rates / self.rate[:, None]
        cond[np.diag_indices(self.m0)] = 0.0
        cond[self.rate == 0.0] = 0.0
        self.cum = np.cumsum(cond, axis=1)

    def first_jump(self, alpha, rng):
        r = self.rate[alpha - 1]
        out = np.full(alpha.shape, np.inf)
        live = r > 0
        if np.any(live):
            out[live] = rng.exponential(1.0, size=int(live.sum())) / r[live]
        return out

    def jump(self, alpha, idx, rng, t_jump):
        """Switch paths ``idx`` in place; returns their next jump times."""
        for i in idx:
            a = alpha[i] - 1
            alpha[i] = 1 + int(np.searchsorted(self.cum[a], rng.uniform()))
            r = self.rate[alpha[i] - 1]
            t_jump[i] += rng.exponential(1.0) / r if r > 0 else np.inf


def _block_rng(seed: int, block_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(int(seed) << 16)
                                                + int(block_index)))


def _policy_tables(policy: Policy):
    vals = policy.values
    if policy.formulation in (PERIODIC, STOCHASTIC_PRICE):
        return policy.axes[0], policy.axes[1], vals
    return None, policy.axes[0], vals


_NORMAL_CHUNK = 256


def _simulate_block(model, gen, pricecost, policy, x0, alpha0, cfg, rng, n,
                    price_dyn, trace=False):
    """Simulate n paths; returns (payoffs, occupancy or None, trace or None)."""
    form = policy.formulation
    ax1, axx, pvals = _policy_tables(policy)
    bmax = float(axx[-1])
    inv_h = 1.0 / (axx[1] - axx[0])
    nxg = axx.size
    m0 = gen.m0
    pflat = np.ascontiguousarray(pvals).reshape(-1)   # last axis = regime
    sampler = _RegimeSampler(gen)
    nsteps = int(round(cfg.horizon / cfg.dt))
    dt, sdt = cfg.dt, np.sqrt(cfg.dt)
    ddt = float(np.exp(-cfg.delta * cfg.dt))
    two_d = form in (PERIODIC, STOCHASTIC_PRICE)
    if two_d:
        n1 = ax1.size
        inv_h1 = 1.0 / (ax1[1] - ax1[0])

    if form == STOCHASTIC_PRICE:
        phi0, x0 = x0
        phi = np.full(n, float(phi0))
    x = np.full(n, float(x0))
    alpha = np.full(n, int(alpha0), dtype=np.int64)
    a_idx = alpha - 1
    t_jump = sampler.first_jump(alpha, rng)
    payoff = np.zeros(n)
    occupancy = np.zeros((n, m0)) if cfg.track_occupancy else None
    disc = 1.0
    period = model.period if model.period is not None else np.inf
    rec = [] if trace else None

    znorm = np.empty((0, n))
    zpos = 0
    t = 0.0
    for i in range(nsteps):
        tm = t % period if form == PERIODIC else t
        xi = np.rint(x * inv_h).astype(np.int64)
        np.clip(xi, 0, nxg - 1, out=xi)
        if form == PERIODIC:
            ig = int(np.rint(tm * inv_h1)) % n1
            u = pflat[(ig * nxg + xi) * m0 + a_idx]
            u = np.where(x > 0.0, u, np.minimum(u, 0.0))
            reward = economics.evaluate(pricecost, tm, x, alpha, u)
            ueff = u
        elif form == STOCHASTIC_PRICE:
            fi = np.rint(phi * inv_h1).astype(np.int64)
            np.clip(fi, 0, n1 - 1, out=fi)
            u = pflat[(fi * nxg + xi) * m0 + a_idx]
            u = np.where(x > 0.0, u, np.minimum(u, 0.0))
            reward = economics.evaluate(pricecost, 0.0, x, alpha, u) + phi * u
            ueff = u
        else:
            u = pflat[xi * m0 + a_idx]
            if form != VARIABLE_EFFORT:
                # extinction admissibility: one cannot harvest an extinct
                # population, matching the chain's restriction at x = 0
                u = np.where(x > 0.0, u, np.minimum(u, 0.0))
            reward = economics.evaluate(pricecost, 0.0, x, alpha, u)
            ueff = u * x if form == VARIABLE_EFFORT else u
        payoff += (disc * dt) * np.asarray(reward, dtype=float)
        if occupancy is not None:
            for k in range(m0):
                occupancy[:, k] += a_idx == k
        if trace and i % cfg.trace_stride == 0:
            rec.append((t, float(x[0]), int(alpha[0]),
                        float(np.atleast_1d(u)[0]), float(payoff[0])))

        if zpos >= znorm.shape[0]:
            draws = 2 if form == STOCHASTIC_PRICE else 1
            znorm = rng.standard_normal((_NORMAL_CHUNK * draws, n))
            zpos = 0
        z = znorm[zpos]
        zpos += 1
        drift = np.asarray(model.drift(tm, x, alpha), dtype=float) - ueff
        diff = np.asarray(model.diffusion(tm, x, alpha), dtype=float)
        x = x + drift * dt + diff * (sdt * z)
        np.clip(x, 0.0, bmax, out=x)
        if form == STOCHASTIC_PRICE:
            z0 = znorm[zpos]
            zpos += 1
            d0 = np.asarray(price_dyn.drift0(phi, alpha), dtype=float)
            s0 = np.asarray(price_dyn.diffusion0(phi, alpha), dtype=float)
            phi = phi + d0 * dt + s0 * (sdt * z0)
            np.clip(phi, 0.0, float(ax1[-1]), out=phi)
        t += dt
        disc *= ddt
        if np.any(t_jump <= t):
            jumping = np.nonzero(t_jump <= t)[0]
            while jumping.size:
                sampler.jump(alpha, jumping, rng, t_jump)
                jumping = jumping[t_jump[jumping] <= t]
            a_idx = alpha - 1
    occ = occupancy * (dt / cfg.horizon) if occupancy is not None else None
    return payoff, occ, rec


def _sup_reward(pricecost, policy, price_dyn) -> float:
    """Bound ||p||_inf over the solved grid box, for the tail report."""
    _, axx, _ = _policy_tables(policy)
    u = policy.control_set.values
    ts = np.linspace(0.0, 1.0, 5)
    best = 0.0
    for t in ts:
        for k in range(policy.values.shape[-1]):
            r = economics.evaluate(pricecost, float(t), axx[:, None], k + 1,
                                   u[None, :])
            best = max(best, float(np.max(np.abs(r))))
    if policy.formulation == STOCHASTIC_PRICE:
        best += float(policy.axes[0][-1]) * float(np.max(np.abs(u)))
    return best


def simulate_path(model: ModelSpec, gen: SwitchingGenerator, pricecost,
                  policy: Policy, x0, alpha0: int, cfg: SimConfig,
                  rng: Optional[np.random.Generator] = None,
                  price_dyn: Optional[PriceDynamicsSpec] = None):
    """One path; returns (discounted payoff, trace).

    The trace holds one record per ``trace_stride`` steps:
    (t, x, regime, u, running payoff).
    """
    rng = rng if rng is not None else _block_rng(cfg.seed, 0)
    payoff, _, rec = _simulate_block(model, gen, pricecost, policy, x0,
                                     alpha0, cfg, rng, 1, price_dyn,
                                     trace=True)
    return float(payoff[0]), rec


def estimate_value(model: ModelSpec, gen: SwitchingGenerator, pricecost,
                   policy: Policy, x0, alpha0: int, cfg: SimConfig,
                   price_dyn: Optional[PriceDynamicsSpec] = None) -> MCEstimate:
    """Monte Carlo estimate of the discounted performance of ``policy``.

    Aggregates independent paths; reports the mean, its standard error, and
    the discount-tail bound of the horizon truncation.
    """
    payoffs = np.empty(cfg.paths)
    occ = np.empty((cfg.paths, gen.m0)) if cfg.track_occupancy else None
    done = 0
    block_index = 0
    while done < cfg.paths:
        n = min(BLOCK, cfg.paths - done)
        rng = _block_rng(cfg.seed, block_index)
        p, o, _ = _simulate_block(model, gen, pricecost, policy, x0, alpha0,
                                  cfg, rng, n, price_dyn)
        payoffs[done:done + n] = p
        if occ is not None:
            occ[done:done + n] = o
        done += n
        block_index += 1
    se = float(payoffs.std(ddof=1) / np.sqrt(cfg.paths)) if cfg.paths > 1 else 0.0
    tail = _sup_reward(pricecost, policy, price_dyn) \
        * float(np.exp(-cfg.delta * cfg.horizon)) / cfg.delta
    occ_mean = occ_se = None
    if occ is not None:
        occ_mean = occ.mean(axis=0)
        occ_se = occ.std(axis=0, ddof=1) / np.sqrt(cfg.paths) if cfg.paths > 1 \
            else np.zeros(gen.m0)
    return MCEstimate(mean=float(payoffs.mean()), standard_error=se,
                      tail_bound=float(tail), paths=cfg.paths,
                      occupancy=occ_mean, occupancy_se=occ_se)
