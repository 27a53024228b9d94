"""Spot-only Nash-Cournot equilibrium via damped Gauss-Seidel iteration.

Each sweep solves both producers' CVaR programs against the current price
field (the two solves are independent), recomputes per-scenario prices from
the inverse-demand relation, and damps the update. Convergence is tested on
the undamped price residual plus sales changes, so a converged outcome
satisfies per-entry price consistency for any damping factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lp import solve_lp
from .market import FuturesContract, MarketParams, ProducerSpec, spot_price
from .programs import (
    Anticipation,
    PriceField,
    ProducerProgram,
    build_ga_program,
    build_rep2a_program,
)
from .scenarios import ScenarioSet

MAX_GAMMA_HALVINGS = 6


class NonConvergenceError(RuntimeError):
    """Fixed-point iteration exhausted its budget; carries the residual trace."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class IterationConfig:
    """Damping, tolerance, and budget of the Gauss-Seidel loop.

    initial_price None means rho_max / 2 uniformly; a scalar or a full
    scenario-by-period array may be given instead.
    """

    gamma: float = 0.5
    epsilon: float = 1e-3
    max_iters: int = 100
    initial_price: float | np.ndarray | None = None

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must lie in (0,1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(eq=False)
class EquilibriumOutcome:
    """Converged spot equilibrium: the bargaining disagreement point."""

    prices: PriceField
    ra_sales: np.ndarray
    ga_sales: np.ndarray
    ra_production: np.ndarray
    ga_production: np.ndarray
    f_ra_d: float  # CVaR of negative profit at the fixed point
    f_ga_d: float
    iterations: int
    residual: float
    trace: list = field(default_factory=list)  # (iteration, max_price_change, f_ra, f_ga)


def _initial_prices(config: IterationConfig, params: MarketParams, n: int, t: int) -> np.ndarray:
    if config.initial_price is None:
        return np.full((n, t), params.rho_max / 2.0)
    init = np.asarray(config.initial_price, dtype=float)
    if init.ndim == 0:
        return np.full((n, t), float(init))
    if init.shape != (n, t):
        raise ValueError("initial_price must be scalar or scenario-by-period")
    return init.copy()


def _solve_pair(
    ra_spec,
    ga_spec,
    scenarios,
    params,
    prices,
    anticipation,
    contract,
    ra_sales_prev,
    ga_sales_prev,
):
    """One sweep: both producers best-respond to the same price field."""
    ra_prog = build_rep2a_program(
        ra_spec, scenarios, prices, contract, params, anticipation, competitor_sales=ga_sales_prev
    )
    ra_sol = solve_lp(ra_prog.lp)
    ga_prog = build_ga_program(
        ga_spec,
        scenarios,
        prices,
        contract,
        np.zeros_like(prices),
        params,
        anticipation,
        competitor_sales=ra_sales_prev,
    )
    ga_sol = solve_lp(ga_prog.lp)
    return ra_prog, ra_sol, ga_prog, ga_sol


def solve_spot_equilibrium(
    ra_spec: ProducerSpec,
    ga_spec: ProducerSpec,
    scenarios: ScenarioSet,
    params: MarketParams,
    config: IterationConfig = IterationConfig(),
    anticipation: Anticipation = Anticipation.price_taker(),
) -> EquilibriumOutcome:
    """Iterate producer best responses and damped price updates to a fixed point.

    Raises NonConvergenceError when the budget is exhausted; a detected
    2-cycle halves the damping factor (up to six times) before giving up.
    """
    n, t = scenarios.n_scenarios, params.periods_per_horizon
    contract = FuturesContract.none(t)
    prices = _initial_prices(config, params, n, t)
    gamma = config.gamma
    eps = config.epsilon

    ra_sales = np.zeros((n, t))
    ga_sales = np.zeros((n, t))
    history: list[np.ndarray] = []  # stacked (ra_sales, ga_sales, prices) per iterate
    trace = []
    halvings = 0

    for k in range(1, config.max_iters + 1):
        ra_prog, ra_sol, ga_prog, ga_sol = _solve_pair(
            ra_spec, ga_spec, scenarios, params, prices, anticipation, contract, ra_sales, ga_sales
        )
        new_ra_sales = ra_prog.sales(ra_sol)
        new_ga_sales = ga_prog.sales(ga_sol)
        demanded = spot_price(new_ga_sales, new_ra_sales, params)

        price_resid = float(np.abs(demanded - prices).max())
        sales_resid = float(
            max(np.abs(new_ra_sales - ra_sales).max(), np.abs(new_ga_sales - ga_sales).max())
        )
        residual = max(price_resid, sales_resid)
        trace.append((k, price_resid, ra_sol.obj_value, ga_sol.obj_value))

        converged = residual < eps
        state = np.concatenate([new_ra_sales.ravel(), new_ga_sales.ravel(), demanded.ravel()])
        if not converged and len(history) >= 2:
            if np.abs(state - history[-2]).max() < eps and halvings < MAX_GAMMA_HALVINGS:
                gamma *= 0.5  # break the 2-cycle of undamped best responses
                halvings += 1
        history.append(state)
        if len(history) > 2:
            history.pop(0)

        ra_sales, ga_sales = new_ra_sales, new_ga_sales
        prices = (1.0 - gamma) * prices + gamma * demanded

        if converged:
            # one consistent re-solve at the final prices for reporting
            ra_prog, ra_sol, ga_prog, ga_sol = _solve_pair(
                ra_spec,
                ga_spec,
                scenarios,
                params,
                prices,
                anticipation,
                contract,
                ra_sales,
                ga_sales,
            )
            return EquilibriumOutcome(
                prices=PriceField(prices),
                ra_sales=ra_prog.sales(ra_sol),
                ga_sales=ga_prog.sales(ga_sol),
                ra_production=ra_prog.production(ra_sol),
                ga_production=ga_prog.production(ga_sol),
                f_ra_d=ra_sol.obj_value,
                f_ga_d=ga_sol.obj_value,
                iterations=k,
                residual=residual,
                trace=trace,
            )

    raise NonConvergenceError(
        f"spot equilibrium did not converge within {config.max_iters} iterations "
        f"(last residual {residual:.6g})",
        trace,
    )


def best_response_residual(
    outcome: EquilibriumOutcome,
    ra_spec: ProducerSpec,
    ga_spec: ProducerSpec,
    scenarios: ScenarioSet,
    params: MarketParams,
    anticipation: Anticipation = Anticipation.price_taker(),
) -> float:
    """Largest utility improvement either producer could gain by re-optimizing
    at the converged prices; approximately zero at a valid fixed point."""
    _, ra_sol, _, ga_sol = _solve_pair(
        ra_spec,
        ga_spec,
        scenarios,
        params,
        outcome.prices.prices,
        anticipation,
        FuturesContract.none(params.periods_per_horizon),
        outcome.ra_sales,
        outcome.ga_sales,
    )
    return float(max(outcome.f_ra_d - ra_sol.obj_value, outcome.f_ga_d - ga_sol.obj_value))
