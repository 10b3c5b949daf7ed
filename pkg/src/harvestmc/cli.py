"""Config-driven command line front end.

Subcommands::

    harvestmc solve      --config fig1.cfg --out results/
    harvestmc simulate   --config fig1.cfg --policy results/fig1_solution.csv --out results/
    harvestmc sweep      --config fig3.cfg --param dynamics.generator.rate \
                         --values 0,0.01,0.1,1,10,inf --out results/
    harvestmc check      --config fig1.cfg --out results/
    harvestmc dump-kernel --config fig1.cfg --out results/

Exit codes: 0 success, 1 configuration/validation error, 2 numerical failure
(no convergence, CFL violation, malformed chain).  A sweep value ``inf`` on a
generator rate is realized by solving the stationary-averaged single-regime
model rather than by a literal huge rate, which would destroy the
interpolation intervals.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as hio
from . import montecarlo as mc
from .config import (ExperimentConfig, build_experiment, load_toml,
                     set_by_path)
from .dynamics import SwitchingGenerator, averaged_model, symmetric_two_state
from .errors import (CflViolation, ConfigError, DomainError,
                     EmptyAdmissibleSet, HarvestMCError, InvalidParams,
                     MaxIterations, NonContraction, ReducibleGenerator,
                     UnknownCost, UnknownModel)
from .kernel import (PERIODIC, STOCHASTIC_PRICE, VARIABLE_EFFORT,
                     build_baseline, build_periodic, build_stochastic_price,
                     build_variable_effort, consistency_check, dump_rows)
from .solver import solve_periodic, value_iteration

_VALIDATION_ERRORS = (ConfigError, InvalidParams, UnknownModel, UnknownCost,
                      DomainError)


def build_kernel(exp: ExperimentConfig):
    if exp.formulation == VARIABLE_EFFORT:
        return build_variable_effort(exp.model, exp.generator, exp.grid,
                                     exp.controls)
    if exp.formulation == STOCHASTIC_PRICE:
        return build_stochastic_price(exp.model, exp.generator, exp.price_dyn,
                                      exp.grid, exp.controls)
    if exp.formulation == PERIODIC:
        return build_periodic(exp.model, exp.generator, exp.grid, exp.controls)
    return build_baseline(exp.model, exp.generator, exp.grid, exp.controls)


def solve_experiment(exp: ExperimentConfig):
    kernel = build_kernel(exp)
    if exp.formulation == PERIODIC:
        return solve_periodic(kernel, exp.pricecost, exp.delta,
                              tol=exp.tolerance,
                              max_iterations=exp.max_iterations)
    return value_iteration(kernel, exp.pricecost, exp.delta,
                           tol=exp.tolerance,
                           max_iterations=exp.max_iterations,
                           policy_refresh=exp.policy_refresh)


def _load(args) -> dict:
    raw = load_toml(args.config)
    if getattr(args, "grid_h", None) is not None:
        key = "kernel.grid.h2" if raw.get("formulation") == PERIODIC \
            else "kernel.grid.h"
        set_by_path(raw, key, args.grid_h)
    if getattr(args, "seed", None) is not None:
        set_by_path(raw, "montecarlo.seed", args.seed)
    return raw


def _stem(args) -> str:
    return Path(args.config).stem


def cmd_solve(args) -> int:
    exp = build_experiment(_load(args))
    value, policy, report = solve_experiment(exp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{_stem(args)}_solution.csv"
    hio.write_solution_csv(path, value, policy, exp.config_hash)
    print(f"solution written to {path}")
    print(f"iterations={report.iterations} "
          f"final_sup_change={report.final_sup_change:.3e} "
          f"tolerance={report.tolerance:g} wall_time={report.wall_time:.2f}s")
    return 0


def cmd_check(args) -> int:
    exp = build_experiment(_load(args))
    kernel = build_kernel(exp)
    report = consistency_check(kernel, exp.model, exp.generator,
                               price_dyn=exp.price_dyn)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{_stem(args)}_check.csv"
    hio.write_check_report(path, report, exp.config_hash)
    print(f"rows_checked={report.rows_checked} "
          f"max_row_sum_error={report.max_row_sum_error:.3e} "
          f"max_first_moment_error={report.max_first_moment_error:.3e} "
          f"max_variance_bound_ratio={report.max_variance_bound_ratio:.3f} "
          f"max_switch_error={report.max_switch_error:.3e}")
    print(f"consistency={'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 2


def cmd_dump_kernel(args) -> int:
    exp = build_experiment(_load(args))
    kernel = build_kernel(exp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{_stem(args)}_kernel.txt"
    dump_rows(kernel, path)
    print(f"kernel dump written to {path}")
    return 0


def cmd_simulate(args) -> int:
    exp = build_experiment(_load(args))
    if exp.mc is None or exp.mc_start is None:
        raise ConfigError("simulate needs a [montecarlo] table in the config")
    policy = hio.policy_from_csv(args.policy, exp.formulation, exp.controls)
    x0, alpha0 = exp.mc_start
    est = mc.estimate_value(exp.model, exp.generator, exp.pricecost, policy,
                            x0, alpha0, exp.mc, price_dyn=exp.price_dyn)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{_stem(args)}_mc.csv"
    hio.write_mc_csv(path, [(x0, alpha0, est)], exp.config_hash)
    print(f"mc estimate written to {path}")
    print(f"J_hat={est.mean:.6f} se={est.standard_error:.6f} "
          f"tail_bound={est.tail_bound:.3e} paths={est.paths}")
    if args.trace:
        rng = mc._block_rng(exp.mc.seed, 0)
        _, trace = mc.simulate_path(exp.model, exp.generator, exp.pricecost,
                                    policy, x0, alpha0, exp.mc, rng,
                                    price_dyn=exp.price_dyn)
        tpath = out / f"{_stem(args)}_trace.csv"
        hio.write_trace_csv(tpath, trace)
        print(f"trace written to {tpath}")
    return 0


def averaged_experiment(exp: ExperimentConfig) -> ExperimentConfig:
    """Fast-switching limit of a config: averaged model, single regime."""
    gen = exp.generator
    if np.all(np.diag(gen.rates) == 0.0):
        gen = symmetric_two_state(1.0) if gen.m0 == 2 else gen
    avg = averaged_model(exp.model, gen)
    return dataclasses.replace(
        exp, model=avg,
        generator=SwitchingGenerator(np.zeros((1, 1))))


def _sweep_token(value) -> str:
    return "inf" if value == "inf" else repr(float(value))


def _sweep_solve(raw, param, token):
    raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    if token == "inf":
        exp = averaged_experiment(build_experiment(raw))
    else:
        set_by_path(raw, param, float(token))
        exp = build_experiment(raw)
    value, policy, report = solve_experiment(exp)
    return exp, value, policy, report


def _sweep_worker(packed):
    raw, param, token = packed
    exp, value, policy, report = _sweep_solve(raw, param, token)
    return token, exp.config_hash, value, policy, report.iterations


def cmd_sweep(args) -> int:
    raw = _load(args)
    tokens = [t.strip() for t in args.values.split(",") if t.strip()]
    if not tokens:
        raise ConfigError("sweep needs at least one value")
    for t in tokens:
        if t != "inf":
            float(t)
        elif not args.param.startswith("dynamics.generator"):
            raise ConfigError("'inf' sweep values are only meaningful for "
                              "generator rates")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = _stem(args)

    jobs = [(raw, args.param, t) for t in tokens]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]

    prev = None
    rows = []
    for token, chash, value, policy, iters in results:
        path = out / f"{stem}_{args.param.split('.')[-1]}_{token}_solution.csv"
        hio.write_solution_csv(path, value, policy, chash)
        gap = ""
        if prev is not None:
            gap = repr(value_gap(prev, value.values))
        rows.append((token, chash, gap, str(iters)))
        prev = value.values
        print(f"{path} written (iterations={iters})")
    spath = out / f"{stem}_sweep_summary.csv"
    with open(spath, "w", newline="") as f:
        f.write("value,config_hash,sup_gap_from_previous,iterations\n")
        for r in rows:
            f.write(",".join(r) + "\n")
    print(f"summary written to {spath}")
    return 0


def value_gap(a: np.ndarray, b: np.ndarray) -> float:
    """Sup-norm gap between value arrays, broadcasting a single regime."""
    if a.shape == b.shape:
        return float(np.max(np.abs(a - b)))
    if a.shape[:-1] == b.shape[:-1]:
        return float(np.max(np.abs(a - b)))  # numpy broadcast over regimes
    raise InvalidParams("value functions live on different grids")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="harvestmc",
        description="Markov chain approximation solver for optimal "
                    "harvesting and stocking")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, policy=False, sweep=False):
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None,
                       help="override montecarlo.seed")
        p.add_argument("--grid-h", type=float, default=None,
                       help="override the population mesh width")
        if policy:
            p.add_argument("--policy", required=True,
                           help="solution CSV holding the policy")
            p.add_argument("--trace", action="store_true",
                           help="also write a single-path trace")
        if sweep:
            p.add_argument("--param", required=True,
                           help="dotted config path, e.g. "
                                "dynamics.generator.rate")
            p.add_argument("--values", required=True,
                           help="comma-separated values; 'inf' solves the "
                                "averaged model")

    common(sub.add_parser("solve", help="run one value-iteration solve"))
    common(sub.add_parser("simulate", help="Monte Carlo policy evaluation"),
           policy=True)
    common(sub.add_parser("sweep", help="solve over a parameter range"),
           sweep=True)
    common(sub.add_parser("check", help="kernel local-consistency audit"))
    common(sub.add_parser("dump-kernel", help="write all transition rows"))

    args = parser.parse_args(argv)
    handlers = {"solve": cmd_solve, "simulate": cmd_simulate,
                "sweep": cmd_sweep, "check": cmd_check,
                "dump-kernel": cmd_dump_kernel}
    try:
        return handlers[args.command](args)
    except _VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (MaxIterations, CflViolation, NonContraction, EmptyAdmissibleSet,
            ReducibleGenerator) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    except HarvestMCError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
