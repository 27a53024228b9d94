"""Shared test oracles and small fixtures.

The oracles here are deliberately independent of the package's own code
paths: the tail-average CVaR works from the sorted distribution, the LP
oracle enumerates basic solutions, and sensitivity checks re-solve perturbed
programs with central finite differences.
"""

from __future__ import annotations

import itertools

import numpy as np

from ammarket import (
    FuturesContract,
    FuturesMode,
    MarketParams,
    ProducerKind,
    ProducerSpec,
    ScenarioSet,
)


def sorted_tail_cvar(losses, probs, alpha: float) -> float:
    """Probability-weighted mean of the worst (1 - alpha) loss mass, splitting
    the boundary atom proportionally."""
    losses = np.asarray(losses, dtype=float)
    probs = np.asarray(probs, dtype=float)
    order = np.argsort(-losses, kind="stable")  # worst first
    l_sorted = losses[order]
    p_sorted = probs[order]
    tail = 1.0 - alpha
    acc = 0.0
    total = 0.0
    for loss, p in zip(l_sorted, p_sorted):
        take = min(p, tail - acc)
        if take <= 0:
            break
        total += take * loss
        acc += take
    return total / tail


def enumerate_lp_vertices(c, a_ub, b_ub, lb, ub, tol: float = 1e-9):
    """Brute-force optimum of min c'x s.t. A_ub x <= b_ub, lb <= x <= ub with
    all-finite boxes: enumerate candidate active sets, solve, filter feasible.

    Returns (status, optimum) where status is 'optimal' or 'infeasible'.
    A bounded feasible polytope always has an optimal vertex.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    a_ub = np.asarray(a_ub, dtype=float).reshape(-1, n)
    b_ub = np.asarray(b_ub, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    rows = [(a_ub[i], b_ub[i]) for i in range(a_ub.shape[0])]
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        rows.append((e, ub[j]))
        rows.append((-e, -lb[j]))

    best = None
    scale = max(1.0, np.abs(b_ub).max(initial=0.0), np.abs(ub).max(), np.abs(lb).max())
    combos = list(itertools.combinations(range(len(rows)), n))
    mats = np.array([[rows[i][0] for i in combo] for combo in combos])
    rhss = np.array([[rows[i][1] for i in combo] for combo in combos])
    dets = np.abs(np.linalg.det(mats))
    good = dets > 1e-10
    if good.any():
        solutions = np.linalg.solve(mats[good], rhss[good][..., None])[..., 0]
        for x in solutions:
            if np.any(a_ub @ x > b_ub + tol * scale):
                continue
            if np.any(x < lb - tol * scale) or np.any(x > ub + tol * scale):
                continue
            val = float(c @ x)
            if best is None or val < best:
                best = val
    if best is None:
        return "infeasible", None
    return "optimal", best


def tiny_scenarios(energy, probs=None, seed: int = 0) -> ScenarioSet:
    """Wrap an explicit energy matrix as a scenario set."""
    energy = np.asarray(energy, dtype=float)
    n = energy.shape[0]
    probs = np.full(n, 1.0 / n) if probs is None else np.asarray(probs, dtype=float)
    return ScenarioSet(energy=energy, probs=probs, seed=seed, disturbance_bound=0.0)


def small_params(periods: int = 1, **overrides) -> MarketParams:
    defaults = dict(rho_max=4850.0, k_am=16.44, periods_per_horizon=periods, hours_per_period=730.0)
    defaults.update(overrides)
    return MarketParams(**defaults)


def ra_spec(alpha: float = 0.5, prod_upper: float = 22.83, **overrides) -> ProducerSpec:
    defaults = dict(
        kind=ProducerKind.REP2A,
        prod_upper=prod_upper,
        prod_lower=0.0,
        eta_p2a=0.1030,
        fixed_cost=42_000.0,
        alpha=alpha,
    )
    defaults.update(overrides)
    return ProducerSpec(**defaults)


def ga_spec(alpha: float = 0.5, prod_upper: float = 22.83, **overrides) -> ProducerSpec:
    defaults = dict(
        kind=ProducerKind.GA,
        prod_upper=prod_upper,
        prod_lower=0.0,
        fixed_cost=41_000.0,
        variable_cost=1_320.0,
        alpha=alpha,
    )
    defaults.update(overrides)
    return ProducerSpec(**defaults)


def mode1_contract(positions, prices) -> FuturesContract:
    return FuturesContract(FuturesMode.MODE1_SHARE, np.asarray(positions, float), np.asarray(prices, float))


def mode2_contract(positions, prices) -> FuturesContract:
    return FuturesContract(
        FuturesMode.MODE2_FIXED_QUANTITY, np.asarray(positions, float), np.asarray(prices, float)
    )
