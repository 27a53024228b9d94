"""Nash bargaining over the futures contract in the coupled spot-futures market.

The hybrid loop alternates damped spot-price updates (as in the spot-only
equilibrium) with projected gradient ascent on the Nash objective

    F = (f_ra_d - f_ra_a) * (f_ga_d - f_ga_a),

the product of both producers' utility improvements over the disagreement
point. Utilities are CVaR-of-loss values throughout, so an improvement is a
decrease and surpluses are written disagreement-minus-agreement; every report
uses this positive-gain convention.

Gradient blocks for the futures positions and prices differ by seven orders
of magnitude, so each block's step is normalized by its running maximum
gradient and scaled to its natural units. Any decrease of the Nash objective
rejects the step and halves the step sizes (up to six times), which makes the
accepted trace monotone by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .equilibrium import EquilibriumOutcome, IterationConfig, solve_spot_equilibrium
from .lp import LpSolution, solve_lp
from .market import (
    FuturesContract,
    FuturesMode,
    MarketParams,
    ProducerSpec,
    settlement_matrix,
    spot_price,
)
from .programs import (
    Anticipation,
    PriceField,
    ProducerProgram,
    build_ga_program,
    build_rep2a_program,
    contract_sensitivities,
)
from .scenarios import ScenarioSet

MAX_STEP_HALVINGS = 6


class BargainStatus(Enum):
    AGREED = "agreed"
    AGREED_NEUTRAL = "agreed_neutral"  # risk-neutral degeneracy: gains within noise
    FAILED = "failed"
    NOT_CONVERGED = "not_converged"


@dataclass(frozen=True)
class BargainConfig:
    """Step sizes, tolerance, and budget of the hybrid bargaining loop.

    epsilon_utility_rel sets the neutral band for the Step-7 verification as a
    fraction of the disagreement-utility magnitude.
    """

    gamma: float = 0.5
    beta_rho: float = 0.1
    beta_q: float = 0.1
    epsilon: float = 1e-3
    max_iters: int = 500
    epsilon_utility_rel: float = 1e-4
    initial_contract: FuturesContract | None = None

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must lie in (0,1]")
        if self.beta_rho <= 0 or self.beta_q <= 0:
            raise ValueError("step sizes must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    def iteration_config(self) -> IterationConfig:
        """Settings of the embedded disagreement-point equilibrium solve."""
        return IterationConfig(gamma=self.gamma, epsilon=self.epsilon, max_iters=self.max_iters)


@dataclass(eq=False)
class BargainOutcome:
    status: BargainStatus
    contract: FuturesContract
    f_ra_a: float
    f_ga_a: float
    f_ra_d: float
    f_ga_d: float
    nash_objective: float
    prices: PriceField
    disagreement: EquilibriumOutcome
    iterations: int
    residual: float
    epsilon_utility: float
    ra_sales: np.ndarray | None = None
    ga_sales: np.ndarray | None = None
    ra_production: np.ndarray | None = None
    ga_production: np.ndarray | None = None
    trace: list = field(default_factory=list)
    # references needed to re-evaluate the agreement with fresh solves
    ra_spec: ProducerSpec | None = None
    ga_spec: ProducerSpec | None = None
    scenarios: ScenarioSet | None = None
    params: MarketParams | None = None
    anticipation: Anticipation | None = None

    @property
    def gain_ra(self) -> float:
        return self.f_ra_d - self.f_ra_a

    @property
    def gain_ga(self) -> float:
        return self.f_ga_d - self.f_ga_a


def nash_objective(f_ra_a: float, f_ra_d: float, f_ga_a: float, f_ga_d: float) -> float:
    """Product of surplus utilities, improvements counted positive.

    Negative surpluses are multiplied as-is; interpreting a negative or
    both-negative product is the caller's job (Step-7 verification)."""
    return (f_ra_d - f_ra_a) * (f_ga_d - f_ga_a)


def nash_gradients(
    programs: tuple[ProducerProgram, ProducerProgram],
    solutions: tuple[LpSolution, LpSolution],
    surpluses: tuple[float, float],
):
    """Gradient of the Nash objective for every period's position and price.

    By the product rule each producer's envelope sensitivity is weighted by
    the opposite party's surplus; surpluses are improvements (f_d - f_a), so
    dF/dp = -(s_ga * df_ra/dp + s_ra * df_ga/dp). Returns (dF_dq, dF_drho,
    degenerate) with the degenerate-dual flag propagated from either program.
    """
    ra_prog, ga_prog = programs
    ra_sol, ga_sol = solutions
    s_ra, s_ga = surpluses
    ra_dq, ra_drho, ra_deg = contract_sensitivities(ra_prog, ra_sol)
    ga_dq, ga_drho, ga_deg = contract_sensitivities(ga_prog, ga_sol)
    df_dq = -(s_ga * ra_dq + s_ra * ga_dq)
    df_drho = -(s_ga * ra_drho + s_ra * ga_drho)
    return df_dq, df_drho, (ra_deg or ga_deg)


def _default_initial_contract(
    mode: FuturesMode, disagreement: EquilibriumOutcome
) -> FuturesContract:
    prices = disagreement.prices.prices
    pro = disagreement.ra_production
    mean_price = prices.mean(axis=0)
    if mode is FuturesMode.MODE1_SHARE:
        q0 = np.full(pro.shape[1], 0.5)
        rho0 = 0.5 * pro.mean(axis=0) * mean_price
    elif mode is FuturesMode.MODE2_FIXED_QUANTITY:
        q0 = 0.5 * pro.min(axis=0)
        rho0 = mean_price.copy()
    else:
        raise ValueError("bargaining requires a futures mode")
    return FuturesContract(mode, q0, np.maximum(rho0, 0.0))


def _solve_both(ra_spec, ga_spec, scenarios, params, prices, contract, anticipation, ra_sales, ga_sales):
    ra_prog = build_rep2a_program(
        ra_spec, scenarios, prices, contract, params, anticipation, competitor_sales=ga_sales
    )
    ra_sol = solve_lp(ra_prog.lp)
    pro = ra_prog.production(ra_sol)
    ga_prog = build_ga_program(
        ga_spec,
        scenarios,
        prices,
        contract,
        settlement_matrix(contract, pro),
        params,
        anticipation,
        competitor_sales=ra_sales,
        ra_production=pro,
    )
    ga_sol = solve_lp(ga_prog.lp)
    return ra_prog, ra_sol, ga_prog, ga_sol


def _classify(s_ra: float, s_ga: float, eps_u: float, converged: bool) -> BargainStatus:
    if abs(s_ra) <= eps_u and abs(s_ga) <= eps_u:
        return BargainStatus.AGREED_NEUTRAL
    if s_ra > eps_u and s_ga > eps_u:
        return BargainStatus.AGREED if converged else BargainStatus.NOT_CONVERGED
    return BargainStatus.FAILED if converged else BargainStatus.NOT_CONVERGED


def bargain(
    ra_spec: ProducerSpec,
    ga_spec: ProducerSpec,
    scenarios: ScenarioSet,
    params: MarketParams,
    mode: FuturesMode,
    config: BargainConfig = BargainConfig(),
    anticipation: Anticipation = Anticipation.price_taker(),
) -> BargainOutcome:
    """Run the full bargaining procedure and verify the outcome.

    The disagreement point comes from an embedded spot-only equilibrium run
    with this config's damping, tolerance, and budget. Non-convergence is a
    status, not an exception; the per-iteration trace is always attached.
    """
    disagreement = solve_spot_equilibrium(
        ra_spec, ga_spec, scenarios, params, config.iteration_config(), anticipation
    )
    f_ra_d, f_ga_d = disagreement.f_ra_d, disagreement.f_ga_d
    eps_u = config.epsilon_utility_rel * max(1.0, abs(f_ra_d), abs(f_ga_d))

    contract = config.initial_contract or _default_initial_contract(mode, disagreement)
    if contract.mode is not mode:
        raise ValueError("initial contract mode does not match the requested mode")
    prices = disagreement.prices.prices.copy()
    ra_sales = disagreement.ra_sales.copy()
    ga_sales = disagreement.ga_sales.copy()

    t = params.periods_per_horizon
    scale_q = 1.0 if mode is FuturesMode.MODE1_SHARE else max(1.0, float(contract.positions.max()) * 2.0)
    scale_rho = max(1.0, float(np.abs(contract.prices).mean()))
    beta_q, beta_rho = config.beta_q, config.beta_rho
    run_gq, run_grho = 0.0, 0.0

    best_f = -np.inf
    best_contract = contract
    halvings = 0
    eps = config.epsilon
    trace = []
    converged = False
    residual = np.inf
    iterations = 0

    for k in range(1, config.max_iters + 1):
        iterations = k
        ra_prog, ra_sol, ga_prog, ga_sol = _solve_both(
            ra_spec, ga_spec, scenarios, params, prices, contract, anticipation, ra_sales, ga_sales
        )
        s_ra = f_ra_d - ra_sol.obj_value
        s_ga = f_ga_d - ga_sol.obj_value
        f_obj = s_ra * s_ga

        new_ra_sales = ra_prog.sales(ra_sol)
        new_ga_sales = ga_prog.sales(ga_sol)
        demanded = spot_price(new_ga_sales, new_ra_sales, params)
        price_resid = float(np.abs(demanded - prices).max())
        sales_resid = float(
            max(np.abs(new_ra_sales - ra_sales).max(), np.abs(new_ga_sales - ga_sales).max())
        )

        accept = f_obj >= best_f - 1e-9 * max(1.0, abs(best_f))
        trace.append(
            (k, f_obj, contract.positions.copy(), contract.prices.copy(), ra_sol.obj_value, ga_sol.obj_value)
        )

        if accept:
            if f_obj > best_f:
                best_f = f_obj
                best_contract = contract
            dq, drho, _ = nash_gradients(
                (ra_prog, ga_prog), (ra_sol, ga_sol), (s_ra, s_ga)
            )
            run_gq = max(run_gq, float(np.abs(dq).max()))
            run_grho = max(run_grho, float(np.abs(drho).max()))
            step_q = beta_q * scale_q * dq / max(run_gq, 1e-30)
            step_rho = beta_rho * scale_rho * drho / max(run_grho, 1e-30)
            new_q = contract.positions + step_q
            if mode is FuturesMode.MODE1_SHARE:
                new_q = np.clip(new_q, 0.0, 1.0)
            else:
                box = ra_prog.production(ra_sol).min(axis=0)
                new_q = np.clip(new_q, 0.0, box)
            new_rho = np.maximum(contract.prices + step_rho, 0.0)
            contract_resid = float(
                max(np.abs(new_q - contract.positions).max() / scale_q,
                    np.abs(new_rho - contract.prices).max() / scale_rho)
            )
            next_contract = contract.with_terms(new_q, new_rho)
        else:
            # reject: return to the best contract and shorten the steps
            if halvings < MAX_STEP_HALVINGS:
                beta_q *= 0.5
                beta_rho *= 0.5
                halvings += 1
            contract_resid = float(
                max(np.abs(best_contract.positions - contract.positions).max() / scale_q,
                    np.abs(best_contract.prices - contract.prices).max() / scale_rho)
            )
            next_contract = best_contract

        residual = max(price_resid, sales_resid, contract_resid)
        ra_sales, ga_sales = new_ra_sales, new_ga_sales
        prices = (1.0 - config.gamma) * prices + config.gamma * demanded
        contract = next_contract

        if residual < eps:
            converged = True
            break

    # Step-7 verification with fresh solves at the final contract and prices
    ra_fin_prog, ra_fin, ga_fin_prog, ga_fin = _solve_both(
        ra_spec, ga_spec, scenarios, params, prices, contract, anticipation, ra_sales, ga_sales
    )
    s_ra_fin = f_ra_d - ra_fin.obj_value
    s_ga_fin = f_ga_d - ga_fin.obj_value
    status = _classify(s_ra_fin, s_ga_fin, eps_u, converged)

    return BargainOutcome(
        status=status,
        contract=contract,
        f_ra_a=ra_fin.obj_value,
        f_ga_a=ga_fin.obj_value,
        f_ra_d=f_ra_d,
        f_ga_d=f_ga_d,
        nash_objective=s_ra_fin * s_ga_fin,
        prices=PriceField(prices),
        disagreement=disagreement,
        iterations=iterations,
        residual=float(residual),
        epsilon_utility=eps_u,
        ra_sales=ra_fin_prog.sales(ra_fin),
        ga_sales=ga_fin_prog.sales(ga_fin),
        ra_production=ra_fin_prog.production(ra_fin),
        ga_production=ga_fin_prog.production(ga_fin),
        trace=trace,
        ra_spec=ra_spec,
        ga_spec=ga_spec,
        scenarios=scenarios,
        params=params,
        anticipation=anticipation,
    )


def verify_agreement(outcome: BargainOutcome, epsilon_utility: float | None = None) -> bool:
    """True iff both producers strictly improve on the disagreement point by
    more than epsilon_utility, re-evaluated with fresh solves at the final
    contract and prices."""
    eps_u = outcome.epsilon_utility if epsilon_utility is None else epsilon_utility
    _, ra_sol, _, ga_sol = _solve_both(
        outcome.ra_spec,
        outcome.ga_spec,
        outcome.scenarios,
        outcome.params,
        outcome.prices.prices,
        outcome.contract,
        outcome.anticipation,
        outcome.disagreement.ra_sales,
        outcome.disagreement.ga_sales,
    )
    return (
        outcome.f_ra_d - ra_sol.obj_value > eps_u
        and outcome.f_ga_d - ga_sol.obj_value > eps_u
    )
