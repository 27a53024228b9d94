"""Market-economics primitives: spot pricing, futures settlement, profit accounting.

All operations are pure functions of explicit inputs; nothing here carries
mutable state, so everything is safe to call from concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class InfeasibleDeliveryError(ValueError):
    """Raised when a Mode-2 contract requires delivering more than was produced."""

    def __init__(self, period: int, position: float, available: float):
        self.period = period
        self.position = position
        self.available = available
        super().__init__(
            f"period {period}: fixed-quantity delivery {position:.6g} t exceeds "
            f"realized production {available:.6g} t"
        )


@dataclass(frozen=True)
class MarketParams:
    """Inverse-demand and horizon constants of the ammonia spot market.

    rho_max is the price intercept at zero supply (CNY/t); k_am the demand
    slope in tons of per-period supply per CNY/t of price drop. Trading is
    monthly over a one-year horizon by default, with uniform 730-hour months
    so hourly capacities and costs convert consistently to per-period tons.
    """

    rho_max: float = 4850.0
    k_am: float = 16.44
    periods_per_horizon: int = 12
    hours_per_period: float = 730.0

    def __post_init__(self):
        if self.rho_max <= 0:
            raise ValueError("rho_max must be positive")
        if self.k_am <= 0:
            raise ValueError("k_am must be positive")
        if self.periods_per_horizon < 1:
            raise ValueError("periods_per_horizon must be at least 1")
        if self.hours_per_period <= 0:
            raise ValueError("hours_per_period must be positive")


class ProducerKind(Enum):
    REP2A = "rep2a"
    GA = "ga"
    NPTP = "nptp"


@dataclass(frozen=True)
class ProducerSpec:
    """Capacities, costs, conversion factor, and risk preference of one participant.

    Production bounds are hourly rates (t/h). eta_p2a (t/MWh) applies to the
    renewable producer only; variable_cost (CNY/t) to the conventional one.
    An NPTP is a conventional spec with all capacity and cost fields zeroed,
    leaving only the futures-trading function.
    """

    kind: ProducerKind
    prod_upper: float
    prod_lower: float = 0.0
    eta_p2a: float = 0.0
    fixed_cost: float = 0.0
    variable_cost: float = 0.0
    alpha: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.prod_lower <= self.prod_upper):
            raise ValueError("need 0 <= prod_lower <= prod_upper")
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError("alpha must lie in [0,1)")
        if self.kind is ProducerKind.REP2A and self.eta_p2a <= 0:
            raise ValueError("eta_p2a must be positive for a renewable producer")
        if self.kind is ProducerKind.NPTP:
            if any(
                v != 0.0
                for v in (self.prod_upper, self.prod_lower, self.fixed_cost, self.variable_cost)
            ):
                raise ValueError("an NPTP has zero capacity and zero costs")


def default_rep2a_spec(alpha: float = 0.5) -> ProducerSpec:
    """Base-case renewable power-to-ammonia producer (200,000 t/yr plant)."""
    return ProducerSpec(
        kind=ProducerKind.REP2A,
        prod_upper=22.83,
        prod_lower=0.0,
        eta_p2a=0.1030,
        fixed_cost=42_000.0,
        alpha=alpha,
    )


def default_ga_spec(alpha: float = 0.5) -> ProducerSpec:
    """Base-case conventional gray-ammonia producer (200,000 t/yr plant)."""
    return ProducerSpec(
        kind=ProducerKind.GA,
        prod_upper=22.83,
        prod_lower=0.0,
        fixed_cost=41_000.0,
        variable_cost=1_320.0,
        alpha=alpha,
    )


def nptp_spec(alpha: float = 0.2) -> ProducerSpec:
    """Non-producing trading participant: zero capacity, zero costs."""
    return ProducerSpec(kind=ProducerKind.NPTP, prod_upper=0.0, alpha=alpha)


class FuturesMode(Enum):
    MODE1_SHARE = "mode1_share"
    MODE2_FIXED_QUANTITY = "mode2_fixed_quantity"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class FuturesContract:
    """Per-period futures terms.

    In Mode 1 a position is the dimensionless share of realized renewable
    production transferred at settlement (in [0,1]) and the price is the
    payment for the full-production share, so the cash leg is Q_t * rho_t^f.
    In Mode 2 the position is a fixed tonnage and the price is CNY/t.
    """

    mode: FuturesMode
    positions: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        pri = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "prices", pri)
        if pos.shape != pri.shape or pos.ndim != 1:
            raise ValueError("positions and prices must be 1-d arrays of equal length")
        if np.any(pri < 0):
            raise ValueError("futures prices must be nonnegative")
        if self.mode is FuturesMode.MODE1_SHARE:
            if np.any(pos < 0) or np.any(pos > 1):
                raise ValueError("Mode-1 positions must lie in [0,1]")
        elif self.mode is FuturesMode.MODE2_FIXED_QUANTITY:
            if np.any(pos < 0):
                raise ValueError("Mode-2 positions must be nonnegative")
        else:
            if np.any(pos != 0) or np.any(pri != 0):
                raise ValueError("a no-trade contract must have zero positions and prices")

    @property
    def n_periods(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def none(cls, periods: int) -> "FuturesContract":
        return cls(FuturesMode.NONE, np.zeros(periods), np.zeros(periods))

    def with_terms(self, positions: np.ndarray, prices: np.ndarray) -> "FuturesContract":
        return FuturesContract(self.mode, np.array(positions, dtype=float), np.array(prices, dtype=float))


@dataclass(frozen=True)
class CashflowBreakdown:
    """Horizon cashflows of one producer, in CNY."""

    spot_revenue: float
    futures_cashflow: float
    production_cost: float
    total: float

    def __post_init__(self):
        ident = self.spot_revenue + self.futures_cashflow - self.production_cost
        scale = max(1.0, abs(self.spot_revenue), abs(self.futures_cashflow), abs(self.production_cost))
        if abs(ident - self.total) > 1e-6 * scale:
            raise ValueError("total must equal spot_revenue + futures_cashflow - production_cost")

    @classmethod
    def build(cls, spot_revenue: float, futures_cashflow: float, production_cost: float) -> "CashflowBreakdown":
        return cls(
            spot_revenue=spot_revenue,
            futures_cashflow=futures_cashflow,
            production_cost=production_cost,
            total=spot_revenue + futures_cashflow - production_cost,
        )


def spot_price(m_ga_sell, m_ra_sell, params: MarketParams):
    """Inverse-demand spot price for the given per-period supplies.

    Accepts scalars or arrays (broadcast elementwise). The price is returned
    unclamped and may be negative for extreme supply; equilibrium solvers run
    in the positive-price regime and the CLI warns if a scenario goes below 0.
    """
    ga = np.asarray(m_ga_sell, dtype=float)
    ra = np.asarray(m_ra_sell, dtype=float)
    if np.any(ga < 0) or np.any(ra < 0):
        raise ValueError("sales must be nonnegative")
    out = params.rho_max - (ga + ra) / params.k_am
    if out.ndim == 0:
        return float(out)
    return out


# Relative slack applied before declaring a Mode-2 delivery shortfall, so LP
# round-off on the production bound does not trip the error.
_DELIVERY_RTOL = 1e-6


def settle_futures(contract: FuturesContract, t: int, ra_production: float) -> float:
    """Tons delivered at the end of period t for the given realized production."""
    if ra_production < 0:
        raise ValueError("ra_production must be nonnegative")
    if not (0 <= t < contract.n_periods):
        raise IndexError(f"period {t} outside contract horizon of {contract.n_periods}")
    if contract.mode is FuturesMode.NONE:
        return 0.0
    if contract.mode is FuturesMode.MODE1_SHARE:
        return float(contract.positions[t] * ra_production)
    q = float(contract.positions[t])
    if q > ra_production + _DELIVERY_RTOL * max(1.0, ra_production):
        raise InfeasibleDeliveryError(t, q, ra_production)
    return q


def settlement_matrix(contract: FuturesContract, ra_production: np.ndarray) -> np.ndarray:
    """Per-scenario, per-period delivered quantities for a production matrix."""
    ra_production = np.asarray(ra_production, dtype=float)
    if contract.mode is FuturesMode.NONE:
        return np.zeros_like(ra_production)
    if contract.mode is FuturesMode.MODE1_SHARE:
        return contract.positions[None, :] * ra_production
    short = ra_production + _DELIVERY_RTOL * np.maximum(1.0, ra_production) < contract.positions[None, :]
    if np.any(short):
        w, t = np.argwhere(short)[0]
        raise InfeasibleDeliveryError(int(t), float(contract.positions[t]), float(ra_production[w, t]))
    return np.broadcast_to(contract.positions, ra_production.shape).copy()


def _check_horizon(params: MarketParams, contract: FuturesContract, *arrays):
    t = params.periods_per_horizon
    if contract.n_periods != t:
        raise ValueError("contract horizon does not match market horizon")
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if a.shape != (t,):
            raise ValueError(f"expected a length-{t} per-period array, got shape {a.shape}")
        out.append(a)
    return out


def profit_rep2a(
    sales,
    production,
    contract: FuturesContract,
    prices,
    spec: ProducerSpec,
    params: MarketParams,
) -> CashflowBreakdown:
    """Renewable producer's horizon profit: spot revenue + futures income - fixed cost.

    Spot revenue counts only the retained share (sales minus the settled
    delivery); the futures leg is the fixed payment for each period's position.
    """
    sales, production, prices = _check_horizon(params, contract, sales, production, prices)
    if np.any(sales > production * (1 + _DELIVERY_RTOL) + 1e-9):
        raise ValueError("per-period sales cannot exceed production")
    delivered = np.array(
        [settle_futures(contract, t, float(production[t])) for t in range(params.periods_per_horizon)]
    )
    spot = float(np.sum((sales - delivered) * prices))
    futures = float(np.sum(contract.positions * contract.prices))
    cost = float(params.periods_per_horizon * spec.fixed_cost * params.hours_per_period)
    return CashflowBreakdown.build(spot, futures, cost)


def profit_ga(
    sales,
    production,
    contract: FuturesContract,
    delivered,
    prices,
    spec: ProducerSpec,
    params: MarketParams,
) -> CashflowBreakdown:
    """Conventional producer's horizon profit: own plus delivered sales, net of the futures payment and costs."""
    sales, production, delivered, prices = _check_horizon(params, contract, sales, production, delivered, prices)
    if np.any(sales > production * (1 + _DELIVERY_RTOL) + 1e-9):
        raise ValueError("per-period sales cannot exceed production")
    if np.any(delivered < 0):
        raise ValueError("delivered quantities must be nonnegative")
    spot = float(np.sum((sales + delivered) * prices))
    futures = -float(np.sum(contract.positions * contract.prices))
    cost = float(
        params.periods_per_horizon * spec.fixed_cost * params.hours_per_period
        + spec.variable_cost * np.sum(production)
    )
    return CashflowBreakdown.build(spot, futures, cost)
