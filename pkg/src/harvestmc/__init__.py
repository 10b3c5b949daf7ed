"""Markov chain approximation solver for optimal harvesting and stocking.

Near-optimal control of single-species populations under switching, priced,
and seasonal environments: locally consistent chain builders, discounted
value iteration, policy diagnostics, and Monte Carlo validation.
"""

from .dynamics import (ModelSpec, PerCapitaParams, PriceDynamicsSpec,
                       SwitchingGenerator, averaged_model, catalog,
                       catalog_price_dynamics, persistence_criterion,
                       stationary_distribution, stochastic_growth_rate,
                       symmetric_two_state)
from .economics import (DemandForm, PriceCostSpec, admissible_controls,
                        catalog_cost, constant_price, demand_price,
                        demand_price_fn, evaluate, make_pricecost)
from .errors import (CflViolation, ConfigError, DomainError,
                     EmptyAdmissibleSet, HarvestMCError, InvalidParams,
                     MaxIterations, NonContraction, NotPerCapitaModel,
                     ReducibleGenerator, UnknownCost, UnknownModel)
from .kernel import (ControlSet, Grid1D, Grid2D, PeriodicKernel,
                     TransitionKernel, build_baseline, build_periodic,
                     build_stochastic_price, build_variable_effort,
                     consistency_check, dump_rows)
from .montecarlo import MCEstimate, SimConfig, estimate_value, simulate_path
from .solver import (HJBResidual, Policy, PolicyShape, SolveReport,
                     ValueFunction, bellman_apply, classify_policy,
                     hjb_residual, solve_periodic, value_iteration)

__version__ = "0.1.0"
