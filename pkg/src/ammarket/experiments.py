"""Study orchestration: base case, sensitivity sweeps, capacity grid, and NPTP.

Every study is a deterministic function of its StudySpec (seed included), and
each produces a JSON-ready report dict next to the raw outcomes. Exact
paper-level magnitudes are not reproducible because the measured wind data
behind the original case are unpublished; reports therefore carry the full
numbers while tests assert signs, orderings, and trends.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import risk
from .bargaining import BargainConfig, BargainOutcome, BargainStatus, bargain
from .equilibrium import EquilibriumOutcome, IterationConfig, solve_spot_equilibrium
from .market import (
    FuturesContract,
    FuturesMode,
    MarketParams,
    ProducerKind,
    ProducerSpec,
    nptp_spec,
    profit_ga,
    profit_rep2a,
    settlement_matrix,
)
from .programs import Anticipation
from .scenarios import ScenarioConfig, ScenarioSet, WindProfile, generate_scenarios

BASE_ANNUAL_CAPACITY_T = 200_000.0
HOURS_PER_YEAR = 8760.0


class StudyKind(Enum):
    BASE = "base"
    UNCERTAINTY_SWEEP = "uncertainty"
    ALPHA_SWEEP = "alpha"
    CAPACITY_GRID = "capacity"
    NPTP = "nptp"


@dataclass(frozen=True)
class StudySpec:
    """One study's full input bundle: base configs plus the grids it sweeps."""

    study: StudyKind
    market: MarketParams
    ra_spec: ProducerSpec
    ga_spec: ProducerSpec
    wind: WindProfile
    scenario: ScenarioConfig
    equilibrium: IterationConfig
    bargain: BargainConfig
    anticipation: Anticipation = Anticipation.price_taker()
    mode: FuturesMode = FuturesMode.MODE1_SHARE
    disturbance_bounds: tuple = (0.0, 22.5, 45.0, 67.5, 90.0)
    alphas: tuple = (0.4, 0.6, 0.8, 0.9, 0.95)
    ra_capacities: tuple = (50_000.0, 100_000.0, 150_000.0, 200_000.0, 250_000.0, 300_000.0)
    ga_capacities: tuple = (50_000.0, 100_000.0, 150_000.0, 200_000.0, 250_000.0, 300_000.0)
    nptp_alphas: tuple = (0.2, 0.7)
    workers: int = 1

    def __post_init__(self):
        for name in ("disturbance_bounds", "alphas", "ra_capacities", "ga_capacities", "nptp_alphas"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be a nonempty grid")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(eq=False)
class UtilityDistribution:
    """Empirical distribution of one producer's per-scenario realized profit."""

    profits: np.ndarray
    probs: np.ndarray
    mean: float
    var_alpha: float  # profit convention: the alpha-quantile mapped back from losses
    cvar_alpha: float  # worst-tail mean profit; cvar_alpha <= var_alpha
    std: float
    bin_edges: np.ndarray
    densities: np.ndarray

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "var_alpha": self.var_alpha,
            "cvar_alpha": self.cvar_alpha,
            "profits": self.profits.tolist(),
            "bin_edges": self.bin_edges.tolist(),
            "densities": self.densities.tolist(),
        }


def utility_distribution(profits, probs, alpha: float, bins: int = 30) -> UtilityDistribution:
    """Profit-side risk statistics and a normalized histogram of the profits."""
    profits = np.asarray(profits, dtype=float)
    probs = np.asarray(probs, dtype=float)
    losses = -profits
    v = -risk.var(losses, probs, alpha)
    c = -risk.cvar(losses, probs, alpha).cvar
    mean = float(probs @ profits)
    std = float(math.sqrt(max(probs @ (profits - mean) ** 2, 0.0)))
    densities, edges = np.histogram(profits, bins=bins, weights=probs, density=True)
    return UtilityDistribution(
        profits=profits,
        probs=probs,
        mean=mean,
        var_alpha=v,
        cvar_alpha=c,
        std=std,
        bin_edges=edges,
        densities=densities,
    )


def realized_profits(
    prices: np.ndarray,
    contract: FuturesContract,
    ra_sales: np.ndarray,
    ra_production: np.ndarray,
    ga_sales: np.ndarray,
    ga_production: np.ndarray,
    ra_spec: ProducerSpec,
    ga_spec: ProducerSpec,
    params: MarketParams,
):
    """Per-scenario horizon profits of both producers at the given outcome."""
    delivered = settlement_matrix(contract, ra_production)
    n = prices.shape[0]
    ra = np.empty(n)
    ga = np.empty(n)
    for w in range(n):
        ra[w] = profit_rep2a(
            ra_sales[w], ra_production[w], contract, prices[w], ra_spec, params
        ).total
        ga[w] = profit_ga(
            ga_sales[w], ga_production[w], contract, delivered[w], prices[w], ga_spec, params
        ).total
    return ra, ga


def _scenarios_for(spec: StudySpec, disturbance_bound: float | None = None) -> ScenarioSet:
    sc = spec.scenario
    bound = sc.disturbance_bound if disturbance_bound is None else disturbance_bound
    return generate_scenarios(
        spec.wind,
        bound,
        sc.n_scenarios,
        window=sc.window,
        hours_per_period=spec.market.hours_per_period,
        seed=sc.seed,
    )


def _gain_pct(f_d: float, f_a: float) -> float:
    return 100.0 * (f_d - f_a) / max(abs(f_d), 1e-12)


def _bargain_row(outcome: BargainOutcome, keys: dict) -> dict:
    row = dict(keys)
    row.update(
        f_ra_d=outcome.f_ra_d,
        f_ga_d=outcome.f_ga_d,
        f_ra_a=outcome.f_ra_a,
        f_ga_a=outcome.f_ga_a,
        gain_ra=outcome.gain_ra,
        gain_ga=outcome.gain_ga,
        gain_ra_pct=_gain_pct(outcome.f_ra_d, outcome.f_ra_a),
        gain_ga_pct=_gain_pct(outcome.f_ga_d, outcome.f_ga_a),
        status=outcome.status.value,
        mean_q=float(outcome.contract.positions.mean()),
        mean_rho_f=float(outcome.contract.prices.mean()),
        iterations=outcome.iterations,
    )
    return row


@dataclass(eq=False)
class BaseStudyResult:
    spec: StudySpec
    scenarios: ScenarioSet
    equilibrium: EquilibriumOutcome
    mode1: BargainOutcome
    mode2: BargainOutcome
    distributions: dict  # {"ra_pre", "ra_post", "ga_pre", "ga_post"} -> UtilityDistribution

    def to_dict(self) -> dict:
        eq = self.equilibrium
        return {
            "study": self.spec.study.value,
            "seed": self.spec.scenario.seed,
            "equilibrium": {
                "f_ra_d": eq.f_ra_d,
                "f_ga_d": eq.f_ga_d,
                "utility_ra": -eq.f_ra_d,
                "utility_ga": -eq.f_ga_d,
                "iterations": eq.iterations,
                "residual": eq.residual,
                "price_min": float(eq.prices.prices.min()),
                "price_max": float(eq.prices.prices.max()),
            },
            "mode1": _bargain_row(self.mode1, {}),
            "mode2": _bargain_row(self.mode2, {}),
            "distributions": {k: d.to_dict() for k, d in self.distributions.items()},
        }


def run_base(spec: StudySpec) -> BaseStudyResult:
    """Disagreement equilibrium, the Mode-1 bargain, the Mode-2 failure check,
    and pre/post utility distributions for both producers."""
    if spec.study is not StudyKind.BASE:
        raise ValueError("run_base requires a base StudySpec")
    scenarios = _scenarios_for(spec)
    eq = solve_spot_equilibrium(
        spec.ra_spec, spec.ga_spec, scenarios, spec.market, spec.equilibrium, spec.anticipation
    )
    mode1 = bargain(
        spec.ra_spec,
        spec.ga_spec,
        scenarios,
        spec.market,
        FuturesMode.MODE1_SHARE,
        spec.bargain,
        spec.anticipation,
    )
    mode2 = bargain(
        spec.ra_spec,
        spec.ga_spec,
        scenarios,
        spec.market,
        FuturesMode.MODE2_FIXED_QUANTITY,
        spec.bargain,
        spec.anticipation,
    )

    none = FuturesContract.none(spec.market.periods_per_horizon)
    ra_pre, ga_pre = realized_profits(
        eq.prices.prices, none, eq.ra_sales, eq.ra_production, eq.ga_sales, eq.ga_production,
        spec.ra_spec, spec.ga_spec, spec.market,
    )
    ra_post, ga_post = realized_profits(
        mode1.prices.prices, mode1.contract, mode1.ra_sales, mode1.ra_production,
        mode1.ga_sales, mode1.ga_production, spec.ra_spec, spec.ga_spec, spec.market,
    )
    probs = scenarios.probs
    dists = {
        "ra_pre": utility_distribution(ra_pre, probs, spec.ra_spec.alpha),
        "ra_post": utility_distribution(ra_post, probs, spec.ra_spec.alpha),
        "ga_pre": utility_distribution(ga_pre, probs, spec.ga_spec.alpha),
        "ga_post": utility_distribution(ga_post, probs, spec.ga_spec.alpha),
    }
    return BaseStudyResult(
        spec=spec, scenarios=scenarios, equilibrium=eq, mode1=mode1, mode2=mode2, distributions=dists
    )


def _scaled_producer(spec: ProducerSpec, annual_capacity: float) -> ProducerSpec:
    """Capacity-grid point: production bounds and fixed cost scale with capacity."""
    factor = annual_capacity / BASE_ANNUAL_CAPACITY_T
    return replace(
        spec,
        prod_upper=spec.prod_upper * factor,
        prod_lower=spec.prod_lower * factor,
        fixed_cost=spec.fixed_cost * factor,
    )


def _sweep_point(args) -> dict:
    spec, keys = args
    try:
        scenarios = _scenarios_for(spec)
        outcome = bargain(
            spec.ra_spec, spec.ga_spec, scenarios, spec.market, spec.mode, spec.bargain, spec.anticipation
        )
        return _bargain_row(outcome, keys)
    except Exception as exc:  # record the failure, never abort the sweep
        row = dict(keys)
        row.update(status="error", error=str(exc))
        return row


def _grid(spec: StudySpec) -> list[tuple[StudySpec, dict]]:
    if spec.study is StudyKind.UNCERTAINTY_SWEEP:
        return [
            (replace(spec, scenario=replace(spec.scenario, disturbance_bound=b)), {"disturbance_bound": b})
            for b in spec.disturbance_bounds
        ]
    if spec.study is StudyKind.ALPHA_SWEEP:
        return [
            (
                replace(
                    spec,
                    ra_spec=replace(spec.ra_spec, alpha=a),
                    ga_spec=replace(spec.ga_spec, alpha=a),
                ),
                {"alpha": a},
            )
            for a in spec.alphas
        ]
    if spec.study is StudyKind.CAPACITY_GRID:
        points = []
        for cra in spec.ra_capacities:
            for cga in spec.ga_capacities:
                points.append(
                    (
                        replace(
                            spec,
                            ra_spec=_scaled_producer(spec.ra_spec, cra),
                            ga_spec=_scaled_producer(spec.ga_spec, cga),
                        ),
                        {"ra_capacity_t_per_year": cra, "ga_capacity_t_per_year": cga},
                    )
                )
        return points
    raise ValueError(f"run_sweep cannot handle study {spec.study}")


@dataclass(eq=False)
class SweepResult:
    spec: StudySpec
    rows: list

    def to_dict(self) -> dict:
        return {"study": self.spec.study.value, "seed": self.spec.scenario.seed, "rows": self.rows}


def run_sweep(spec: StudySpec) -> SweepResult:
    """One bargain per grid point; failures are recorded per row.

    Grid points are independent; with workers > 1 they run in separate
    processes and the rows are merged back in grid order.
    """
    points = _grid(spec)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_sweep_point, points))
    else:
        rows = [_sweep_point(p) for p in points]
    return SweepResult(spec=spec, rows=rows)


@dataclass(eq=False)
class NptpResult:
    spec: StudySpec
    rows: list
    outcomes: list

    def to_dict(self) -> dict:
        return {"study": self.spec.study.value, "seed": self.spec.scenario.seed, "rows": self.rows}


def run_nptp(spec: StudySpec) -> NptpResult:
    """Bargains between the renewable producer and a non-producing trader.

    The trader reuses the conventional producer's model with zero capacity and
    costs, leaving only the futures-trading function; each grid entry sets its
    CVaR confidence level.
    """
    if spec.study is not StudyKind.NPTP:
        raise ValueError("run_nptp requires an NPTP StudySpec")
    scenarios = _scenarios_for(spec)
    rows, outcomes = [], []
    for a in spec.nptp_alphas:
        trader = nptp_spec(alpha=a)
        outcome = bargain(
            spec.ra_spec,
            trader,
            scenarios,
            spec.market,
            FuturesMode.MODE1_SHARE,
            spec.bargain,
            spec.anticipation,
        )
        row = _bargain_row(outcome, {"alpha_nptp": a, "alpha_rep2a": spec.ra_spec.alpha})
        row["nptp_utility"] = -outcome.f_ga_a
        rows.append(row)
        outcomes.append(outcome)
    return NptpResult(spec=spec, rows=rows, outcomes=outcomes)
