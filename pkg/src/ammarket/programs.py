"""Scenario-based CVaR decision programs for both producers.

Each builder assembles one linear program over the variables

    pro[w,t], sell[w,t]  (production / spot sales, tons per period)
    theta                (CVaR auxiliary)
    xi[w]                (per-scenario excess loss)
    rev[w,t]             (anticipated spot-revenue epigraph, Cournot mode only)

with per-scenario loss rows  L_w(u) - theta - xi_w <= 0  and the risk
objective  theta + sum_w p_w xi_w / (1 - alpha).  Futures terms enter as fixed
parameters, so optimal-value sensitivities with respect to the contract follow
from the loss-row multipliers via the envelope theorem.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .lp import LinearProgram, LpSolution, LpStatus
from .market import (
    FuturesContract,
    FuturesMode,
    InfeasibleDeliveryError,
    MarketParams,
    ProducerKind,
    ProducerSpec,
)
from .scenarios import ScenarioSet


class AnticipationKind(Enum):
    PRICE_TAKER = "price_taker"
    COURNOT_PWL = "cournot_pwl"


@dataclass(frozen=True)
class Anticipation:
    """Whether a producer treats the spot price as fixed or internalizes its
    own quantity's price impact through a piecewise-linear revenue envelope."""

    kind: AnticipationKind = AnticipationKind.PRICE_TAKER
    segments: int = 32

    def __post_init__(self):
        if self.kind is AnticipationKind.COURNOT_PWL and self.segments < 1:
            raise ValueError("need at least one linearization segment")

    @classmethod
    def price_taker(cls) -> "Anticipation":
        return cls(AnticipationKind.PRICE_TAKER)

    @classmethod
    def cournot(cls, segments: int = 32) -> "Anticipation":
        return cls(AnticipationKind.COURNOT_PWL, segments)


@dataclass(frozen=True, eq=False)
class PriceField:
    """Per-scenario, per-period spot prices iterated by the equilibrium solvers."""

    prices: np.ndarray  # (n_scenarios, n_periods)

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "prices", p)
        if p.ndim != 2:
            raise ValueError("prices must be a scenario-by-period matrix")
        if not np.all(np.isfinite(p)):
            raise ValueError("prices must be finite")


def _price_matrix(prices, n_scenarios, n_periods) -> np.ndarray:
    mat = prices.prices if isinstance(prices, PriceField) else np.asarray(prices, dtype=float)
    if mat.shape != (n_scenarios, n_periods):
        raise ValueError(f"price field shape {mat.shape} does not match ({n_scenarios}, {n_periods})")
    return mat


class ContractParam(Enum):
    POSITION = "position"  # Q_t^f
    PRICE = "price"  # rho_t^f


class SensitivityValue(NamedTuple):
    value: float
    degenerate: bool


@dataclass(eq=False)
class ProducerProgram:
    """One producer's assembled LP plus the index maps and inputs behind it."""

    lp: LinearProgram
    kind: ProducerKind
    spec: ProducerSpec
    scenarios: ScenarioSet
    prices: np.ndarray
    contract: FuturesContract
    params: MarketParams
    anticipation: Anticipation
    delivered: np.ndarray | None  # (N,T), conventional producer only
    ra_production: np.ndarray | None  # (N,T) production behind `delivered`
    competitor_sales: np.ndarray | None
    pro_idx: np.ndarray  # (N,T) variable positions
    sell_idx: np.ndarray
    theta_idx: int
    xi_idx: np.ndarray  # (N,)
    rev_idx: np.ndarray | None
    sell_cap_rows: np.ndarray  # (N,T) rows sell - pro <= 0
    loss_rows: np.ndarray  # (N,)
    cut_rows: np.ndarray | None  # (N,T,S+1)
    cut_knots: np.ndarray | None  # (T,S+1)

    @property
    def n_scenarios(self) -> int:
        return self.scenarios.n_scenarios

    @property
    def n_periods(self) -> int:
        return self.params.periods_per_horizon

    def production(self, solution: LpSolution) -> np.ndarray:
        return solution.primal[self.pro_idx]

    def sales(self, solution: LpSolution) -> np.ndarray:
        return solution.primal[self.sell_idx]


def _labels(kind_tag: str, n: int, t: int, cournot: bool) -> list[str]:
    labels = [f"M_{kind_tag}_pro[{w}][{j}]" for w in range(n) for j in range(t)]
    labels += [f"M_{kind_tag}_sell[{w}][{j}]" for w in range(n) for j in range(t)]
    labels.append("theta")
    labels += [f"xi[{w}]" for w in range(n)]
    if cournot:
        labels += [f"rev[{w}][{j}]" for w in range(n) for j in range(t)]
    return labels


def _cut_geometry(knots, other, delivered, params):
    """Tangent-line coefficients of the anticipated concave revenue
    f(q) = (q + d) * (rho_max - (q + other)/k) at each knot."""
    p = params.rho_max - (knots + other) / params.k_am
    a = p - (knots + delivered) / params.k_am
    f = (knots + delivered) * p
    b = f - a * knots
    return a, b


def _assemble(
    kind_tag: str,
    spec: ProducerSpec,
    scenarios: ScenarioSet,
    price_mat: np.ndarray,
    contract: FuturesContract,
    params: MarketParams,
    anticipation: Anticipation,
    *,
    pro_loss_coeff: np.ndarray,  # (N,T) loss-row coefficient on pro
    loss_rhs: np.ndarray,  # (N,)
    pro_lb: np.ndarray,  # (T,)
    pro_ub: np.ndarray,  # (N,T)
    delivered: np.ndarray | None,
    ra_production: np.ndarray | None,
    competitor_sales: np.ndarray | None,
    producer_kind: ProducerKind,
) -> ProducerProgram:
    n, t = scenarios.n_scenarios, params.periods_per_horizon
    cournot = anticipation.kind is AnticipationKind.COURNOT_PWL
    if cournot and competitor_sales is None:
        raise ValueError("Cournot anticipation requires the frozen competitor sales")

    nt = n * t
    n_vars = 2 * nt + 1 + n + (nt if cournot else 0)
    pro_idx = np.arange(nt).reshape(n, t)
    sell_idx = nt + pro_idx
    theta_idx = 2 * nt
    xi_idx = 2 * nt + 1 + np.arange(n)
    rev_idx = (2 * nt + 1 + n + pro_idx) if cournot else None

    c = np.zeros(n_vars)
    c[theta_idx] = 1.0
    c[xi_idx] = scenarios.probs / (1.0 - spec.alpha)

    lb = np.zeros(n_vars)
    ub = np.full(n_vars, np.inf)
    lb[pro_idx.ravel()] = np.repeat(pro_lb[None, :], n, axis=0).ravel()
    ub[pro_idx.ravel()] = pro_ub.ravel()
    lb[theta_idx], ub[theta_idx] = -np.inf, np.inf
    if cournot:
        lb[rev_idx.ravel()] = -np.inf

    rows, cols, vals = [], [], []
    rhs = []

    def add_block(r, cidx, coeff):
        rows.append(r)
        cols.append(cidx)
        vals.append(coeff)

    # sell - pro <= 0
    sell_cap_rows = np.arange(nt).reshape(n, t)
    r = sell_cap_rows.ravel()
    add_block(r, sell_idx.ravel(), np.ones(nt))
    add_block(r, pro_idx.ravel(), -np.ones(nt))
    rhs.extend(np.zeros(nt))

    # loss rows: L_w - theta - xi_w <= rhs_w
    loss_rows = nt + np.arange(n)
    lr = np.repeat(loss_rows, t)
    if cournot:
        add_block(lr, rev_idx.ravel(), -np.ones(nt))
    else:
        add_block(lr, sell_idx.ravel(), -price_mat.ravel())
    nz = pro_loss_coeff.ravel()
    add_block(lr, pro_idx.ravel(), nz)
    add_block(loss_rows, np.full(n, theta_idx), -np.ones(n))
    add_block(loss_rows, xi_idx, -np.ones(n))
    rhs.extend(loss_rhs)

    cut_rows = None
    cut_knots = None
    if cournot:
        s1 = anticipation.segments + 1
        cap = pro_ub.max(axis=0)  # widest sell range over scenarios, per period
        cut_knots = np.linspace(np.zeros(t), np.maximum(cap, 1e-9), s1, axis=1)  # (T,S+1)
        d = np.zeros((n, t)) if delivered is None else delivered
        base = nt + n
        cut_rows = base + (np.arange(nt).reshape(n, t)[:, :, None] * s1 + np.arange(s1)[None, None, :])
        knots = np.broadcast_to(cut_knots[None, :, :], (n, t, s1))
        other = competitor_sales[:, :, None]
        dd = d[:, :, None]
        a, b = _cut_geometry(knots, other, dd, params)
        r = cut_rows.ravel()
        add_block(r, np.broadcast_to(rev_idx[:, :, None], (n, t, s1)).ravel(), np.ones(n * t * s1))
        add_block(r, np.broadcast_to(sell_idx[:, :, None], (n, t, s1)).ravel(), -a.ravel())
        rhs.extend(b.ravel())

    a_ub = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(rhs), n_vars),
    )
    lp = LinearProgram(
        c=c,
        a_ub=a_ub,
        b_ub=np.asarray(rhs),
        lb=lb,
        ub=ub,
        var_labels=_labels(kind_tag, n, t, cournot),
    )
    return ProducerProgram(
        lp=lp,
        kind=producer_kind,
        spec=spec,
        scenarios=scenarios,
        prices=price_mat,
        contract=contract,
        params=params,
        anticipation=anticipation,
        delivered=delivered,
        ra_production=ra_production,
        competitor_sales=competitor_sales,
        pro_idx=pro_idx,
        sell_idx=sell_idx,
        theta_idx=theta_idx,
        xi_idx=xi_idx,
        rev_idx=rev_idx,
        sell_cap_rows=sell_cap_rows,
        loss_rows=loss_rows,
        cut_rows=cut_rows,
        cut_knots=cut_knots,
    )


def build_rep2a_program(
    spec: ProducerSpec,
    scenarios: ScenarioSet,
    prices,
    contract: FuturesContract,
    params: MarketParams,
    anticipation: Anticipation = Anticipation.price_taker(),
    competitor_sales: np.ndarray | None = None,
) -> ProducerProgram:
    """Renewable producer's CVaR program at the given scenario prices and contract.

    Production is bounded by available energy times the conversion factor and
    by the per-period capacity; Mode-1 settlement enters the loss linearly
    through the production variable, Mode-2 settlement as a fixed delivery
    that also raises the production lower bound (committed delivery).
    """
    if spec.kind is not ProducerKind.REP2A:
        raise ValueError("spec must describe the renewable producer")
    n, t = scenarios.n_scenarios, params.periods_per_horizon
    if scenarios.n_periods != t or contract.n_periods != t:
        raise ValueError("scenario set and contract must match the market horizon")
    price_mat = _price_matrix(prices, n, t)
    h = params.hours_per_period
    cap_lo = np.full(t, spec.prod_lower * h)
    cap_hi = np.minimum(spec.eta_p2a * scenarios.energy, spec.prod_upper * h)

    q = contract.positions
    rho_f = contract.prices
    if contract.mode is FuturesMode.MODE2_FIXED_QUANTITY:
        worst = cap_hi.min(axis=0)
        for j in range(t):
            if q[j] > worst[j] + 1e-9 * max(1.0, worst[j]):
                raise InfeasibleDeliveryError(j, float(q[j]), float(worst[j]))
        cap_lo = np.maximum(cap_lo, q)

    fixed_cost_total = t * spec.fixed_cost * h
    if contract.mode is FuturesMode.MODE1_SHARE:
        pro_coeff = q[None, :] * price_mat
        loss_rhs = np.full(n, float(np.sum(q * rho_f)) - fixed_cost_total)
    elif contract.mode is FuturesMode.MODE2_FIXED_QUANTITY:
        pro_coeff = np.zeros((n, t))
        loss_rhs = float(np.sum(q * rho_f)) - price_mat @ q - fixed_cost_total
    else:
        pro_coeff = np.zeros((n, t))
        loss_rhs = np.full(n, -fixed_cost_total)

    return _assemble(
        "ra",
        spec,
        scenarios,
        price_mat,
        contract,
        params,
        anticipation,
        pro_loss_coeff=pro_coeff,
        loss_rhs=loss_rhs,
        pro_lb=cap_lo,
        pro_ub=cap_hi,
        delivered=None,
        ra_production=None,
        competitor_sales=competitor_sales,
        producer_kind=ProducerKind.REP2A,
    )


def build_ga_program(
    spec: ProducerSpec,
    scenarios: ScenarioSet,
    prices,
    contract: FuturesContract,
    delivered,
    params: MarketParams,
    anticipation: Anticipation = Anticipation.price_taker(),
    competitor_sales: np.ndarray | None = None,
    ra_production: np.ndarray | None = None,
) -> ProducerProgram:
    """Conventional producer's (or NPTP's) CVaR program.

    `delivered` is the per-scenario, per-period settled quantity received from
    the renewable side, a parameter here. For Mode-1 position sensitivities
    pass `ra_production`, the production matrix behind the settlement.
    """
    if spec.kind not in (ProducerKind.GA, ProducerKind.NPTP):
        raise ValueError("spec must describe the conventional producer or an NPTP")
    n, t = scenarios.n_scenarios, params.periods_per_horizon
    if scenarios.n_periods != t or contract.n_periods != t:
        raise ValueError("scenario set and contract must match the market horizon")
    price_mat = _price_matrix(prices, n, t)
    delivered = np.zeros((n, t)) if delivered is None else np.asarray(delivered, dtype=float)
    if delivered.shape != (n, t):
        raise ValueError("delivered must be a scenario-by-period matrix")
    h = params.hours_per_period
    cap_lo = np.full(t, spec.prod_lower * h)
    cap_hi = np.full((n, t), spec.prod_upper * h)

    q = contract.positions
    rho_f = contract.prices
    cournot = anticipation.kind is AnticipationKind.COURNOT_PWL
    fixed_cost_total = t * spec.fixed_cost * h
    pro_coeff = np.full((n, t), spec.variable_cost)
    futures_payment = float(np.sum(q * rho_f))
    if cournot:
        # delivered-quantity revenue is inside the anticipated term
        loss_rhs = np.full(n, -futures_payment - fixed_cost_total)
    else:
        loss_rhs = np.sum(delivered * price_mat, axis=1) - futures_payment - fixed_cost_total

    return _assemble(
        "ga",
        spec,
        scenarios,
        price_mat,
        contract,
        params,
        anticipation,
        pro_loss_coeff=pro_coeff,
        loss_rhs=loss_rhs,
        pro_lb=cap_lo,
        pro_ub=cap_hi,
        delivered=delivered,
        ra_production=ra_production,
        competitor_sales=competitor_sales,
        producer_kind=spec.kind,
    )


def _degenerate(program: ProducerProgram, solution: LpSolution) -> bool:
    """Heuristic non-unique-dual flag: a zero-slack/zero-dual inequality pair
    or a variable sitting on a bound with zero reduced cost."""
    lp = program.lp
    x = solution.primal
    slack = lp.b_ub - lp.a_ub @ x
    mu = solution.ineq_duals
    s_tol = 1e-6 * np.maximum(1.0, np.abs(lp.b_ub))
    d_tol = 1e-9 * max(1.0, np.abs(mu).max(initial=0.0))
    if np.any((np.abs(slack) <= s_tol) & (mu <= d_tol)):
        return True
    x_tol = 1e-6 * np.maximum(1.0, np.abs(x))
    r_tol = 1e-9 * max(1.0, np.abs(lp.c).max(initial=0.0))
    at_lb = np.isfinite(lp.lb) & (np.abs(x - lp.lb) <= x_tol) & (solution.lb_duals <= r_tol)
    at_ub = np.isfinite(lp.ub) & (np.abs(lp.ub - x) <= x_tol) & (solution.ub_duals <= r_tol)
    # a variable pinned by equal bounds is fixed, not degenerate
    free_span = lp.ub - lp.lb > x_tol
    return bool(np.any((at_lb | at_ub) & free_span))


def contract_sensitivities(program: ProducerProgram, solution: LpSolution):
    """Envelope derivatives of the optimal utility with respect to every
    period's futures position and price. Returns (d_position, d_price, degenerate)."""
    if solution.status is not LpStatus.OPTIMAL:
        raise ValueError("sensitivities require an optimal solution")
    n, t = program.n_scenarios, program.n_periods
    mode = program.contract.mode
    degenerate = _degenerate(program, solution)
    if mode is FuturesMode.NONE:
        return np.zeros(t), np.zeros(t), degenerate

    mu = solution.ineq_duals[program.loss_rows]  # (N,)
    q = program.contract.positions
    rho_f = program.contract.prices
    mu_sum = mu.sum()
    is_ra = program.kind is ProducerKind.REP2A
    cournot = program.anticipation.kind is AnticipationKind.COURNOT_PWL

    if is_ra:
        d_price = -q * mu_sum
        if mode is FuturesMode.MODE1_SHARE:
            pro = program.production(solution)
            d_pos = (mu[:, None] * (program.prices * pro)).sum(axis=0) - rho_f * mu_sum
        else:
            d_pos = mu @ program.prices - rho_f * mu_sum
            # committed delivery raises the production lower bound
            h = program.params.hours_per_period
            lo = program.spec.prod_lower * h
            sig = solution.lb_duals[program.pro_idx]  # (N,T)
            d_pos = d_pos + np.where(q > lo, sig.sum(axis=0), 0.0)
        return d_pos, d_price, degenerate

    d_price = q * mu_sum
    if cournot:
        mu_cut = solution.ineq_duals[program.cut_rows]  # (N,T,S+1)
        knots = np.broadcast_to(program.cut_knots[None, :, :], mu_cut.shape)
        other = program.competitor_sales[:, :, None]
        p_i = program.params.rho_max - (knots + other) / program.params.k_am
        sell = program.sales(solution)[:, :, None]
        dg_dd = sell / program.params.k_am - p_i - knots / program.params.k_am
        per_wt = (mu_cut * dg_dd).sum(axis=2)  # (N,T)
        if mode is FuturesMode.MODE1_SHARE:
            if program.ra_production is None:
                raise ValueError("Mode-1 position sensitivity needs ra_production")
            d_pos = rho_f * mu_sum + (per_wt * program.ra_production).sum(axis=0)
        else:
            d_pos = rho_f * mu_sum + per_wt.sum(axis=0)
        return d_pos, d_price, degenerate

    if mode is FuturesMode.MODE1_SHARE:
        if program.ra_production is None:
            raise ValueError("Mode-1 position sensitivity needs ra_production")
        d_pos = rho_f * mu_sum - (mu[:, None] * (program.prices * program.ra_production)).sum(axis=0)
    else:
        d_pos = rho_f * mu_sum - mu @ program.prices
    return d_pos, d_price, degenerate


def optimal_value_sensitivity(
    program: ProducerProgram,
    solution: LpSolution,
    wrt: ContractParam,
    t: int,
) -> SensitivityValue:
    """d(optimal utility)/d(contract parameter) for one period, from the duals."""
    if not (0 <= t < program.n_periods):
        raise IndexError("period outside horizon")
    d_pos, d_price, degenerate = contract_sensitivities(program, solution)
    value = d_pos[t] if wrt is ContractParam.POSITION else d_price[t]
    return SensitivityValue(value=float(value), degenerate=degenerate)
