"""Shared fixtures: catalog objects and cached CI-scale solves."""

from pathlib import Path

import numpy as np
import pytest

import harvestmc as hm
from harvestmc.cli import solve_experiment
from harvestmc.config import build_experiment, load_toml, set_by_path

CONFIG_DIR = Path(hm.__file__).parent / "configs"


def ci_config(name: str) -> dict:
    return load_toml(CONFIG_DIR / "ci" / f"{name}.cfg")


@pytest.fixture(scope="session")
def solved():
    """Memoized solver runs keyed by (config name, overrides)."""
    cache = {}

    def run(name, **overrides):
        key = (name, tuple(sorted(overrides.items())))
        if key not in cache:
            overrides = dict(overrides)
            averaged = overrides.pop("__averaged__", False)
            raw = ci_config(name)
            for path, value in overrides.items():
                set_by_path(raw, path, value)
            exp = build_experiment(raw)
            if averaged:
                from harvestmc.cli import averaged_experiment
                exp = averaged_experiment(exp)
            value, policy, report = solve_experiment(exp)
            cache[key] = (exp, value, policy, report)
        return cache[key]

    return run


@pytest.fixture(scope="session")
def verhulst2():
    return hm.catalog("verhulst", mu=(3, 2), kappa=2, sigma=1)


@pytest.fixture(scope="session")
def gen_sym():
    return hm.symmetric_two_state(0.1)


@pytest.fixture(scope="session")
def unit_pricecost():
    return hm.make_pricecost(hm.constant_price(1.0), hm.catalog_cost("zero"))


@pytest.fixture(scope="session")
def small_kernel(verhulst2, gen_sym):
    grid = hm.Grid1D(h=0.1, B=4.0)
    controls = hm.ControlSet.from_range(-2, 3, 0.25)
    return hm.build_baseline(verhulst2, gen_sym, grid, controls)


def make_ring_kernel(n=7, dt=0.05, m0=1):
    """Synthetic uniform-dt kernel: symmetric random walk on a ring."""
    controls = hm.ControlSet(np.array([0.0]))
    probs = np.zeros((n * m0, 1, 2))
    targets = np.zeros((n * m0, 1, 2), dtype=np.int32)
    probs[..., 0] = 0.5
    probs[..., 1] = 0.5
    for r in range(n * m0):
        s, k = divmod(r, m0)
        targets[r, 0, 0] = ((s + 1) % n) * m0 + k
        targets[r, 0, 1] = ((s - 1) % n) * m0 + k
    return hm.TransitionKernel("baseline", controls, m0,
                               (np.arange(n) * 1.0,), probs, targets,
                               np.full((n * m0, 1), dt),
                               np.ones((n * m0, 1), dtype=bool))
