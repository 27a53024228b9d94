"""Spot pricing, settlement, and profit accounting against hand-computed values."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ammarket import (
    CashflowBreakdown,
    FuturesContract,
    FuturesMode,
    InfeasibleDeliveryError,
    MarketParams,
    nptp_spec,
    profit_ga,
    profit_rep2a,
    settle_futures,
    settlement_matrix,
    spot_price,
)
from support import ga_spec, mode1_contract, mode2_contract, ra_spec, small_params

TABLE1 = MarketParams()


class TestSpotPrice:
    def test_zero_supply_hits_intercept(self):
        assert spot_price(0.0, 0.0, TABLE1) == pytest.approx(4850.0)

    def test_symmetric_supply(self):
        # 4850 - 33334/16.44
        assert spot_price(16667.0, 16667.0, TABLE1) == pytest.approx(2822.38, abs=0.01)

    def test_monthly_tonnage_drop(self):
        # supplying 8333.33 t in one month shaves ~506.9 CNY/t off the price
        assert spot_price(0.0, 8333.33, TABLE1) == pytest.approx(4343.11, abs=0.01)

    def test_slope_is_minus_inverse_k(self):
        base = spot_price(100.0, 200.0, TABLE1)
        bumped = spot_price(100.0, 201.0, TABLE1)
        assert bumped - base == pytest.approx(-1.0 / TABLE1.k_am, rel=1e-9)

    def test_arrays_broadcast(self):
        out = spot_price(np.array([0.0, 16667.0]), np.array([0.0, 16667.0]), TABLE1)
        assert out.shape == (2,)
        assert out[0] == pytest.approx(4850.0)

    def test_rejects_negative_sales(self):
        with pytest.raises(ValueError):
            spot_price(-1.0, 0.0, TABLE1)

    @given(
        extra=st.floats(min_value=0.01, max_value=1e5),
        base=st.floats(min_value=0.0, max_value=1e5),
    )
    @settings(max_examples=50, deadline=None)
    def test_strictly_decreasing_in_supply(self, extra, base):
        assert spot_price(base + extra, 0.0, TABLE1) < spot_price(base, 0.0, TABLE1)


class TestSettlement:
    def test_mode1_proportional(self):
        c = mode1_contract([0.5], [1e7])
        assert settle_futures(c, 0, 10_000.0) == pytest.approx(5_000.0)

    def test_mode1_zero_position(self):
        c = mode1_contract([0.0], [0.0])
        assert settle_futures(c, 0, 12_345.0) == 0.0

    def test_mode2_fixed_quantity(self):
        c = mode2_contract([5_000.0], [3_000.0])
        assert settle_futures(c, 0, 9_000.0) == pytest.approx(5_000.0)

    def test_mode2_shortfall_raises(self):
        c = mode2_contract([5_000.0], [3_000.0])
        with pytest.raises(InfeasibleDeliveryError) as err:
            settle_futures(c, 0, 4_000.0)
        assert err.value.period == 0

    def test_none_mode(self):
        c = FuturesContract.none(3)
        assert settle_futures(c, 1, 500.0) == 0.0

    def test_settlement_matrix_matches_scalar(self):
        c = mode1_contract([0.25, 0.75], [1.0, 1.0])
        pro = np.array([[100.0, 200.0], [40.0, 0.0]])
        mat = settlement_matrix(c, pro)
        for w in range(2):
            for t in range(2):
                assert mat[w, t] == settle_futures(c, t, pro[w, t])


class TestContractValidation:
    def test_mode1_positions_bounded(self):
        with pytest.raises(ValueError):
            mode1_contract([1.5], [0.0])

    def test_negative_prices_rejected(self):
        with pytest.raises(ValueError):
            mode1_contract([0.5], [-1.0])

    def test_none_requires_zeros(self):
        with pytest.raises(ValueError):
            FuturesContract(FuturesMode.NONE, np.array([0.1]), np.array([0.0]))


class TestProfits:
    def test_rep2a_single_period_hand_value(self):
        params = small_params(periods=1)
        c = mode1_contract([0.5], [3.34e7])
        out = profit_rep2a([10_000.0], [10_000.0], c, [3_000.0], ra_spec(), params)
        # (10000-5000)*3000 + 0.5*3.34e7 - 42000*730
        assert out.total == pytest.approx(1.04e6, rel=1e-6)
        assert out.spot_revenue == pytest.approx(1.5e7)
        assert out.futures_cashflow == pytest.approx(1.67e7)
        assert out.production_cost == pytest.approx(3.066e7)

    def test_rep2a_idle_pays_fixed_cost(self):
        params = small_params(periods=1)
        out = profit_rep2a([0.0], [0.0], FuturesContract.none(1), [3_000.0], ra_spec(), params)
        assert out.total == pytest.approx(-3.066e7)

    def test_rep2a_full_transfer_leaves_futures_minus_cost(self):
        params = small_params(periods=1)
        c = mode1_contract([1.0], [2.5e7])
        out = profit_rep2a([8_000.0], [8_000.0], c, [3_000.0], ra_spec(), params)
        assert out.spot_revenue == pytest.approx(0.0)
        assert out.total == pytest.approx(2.5e7 - 42_000.0 * 730.0)

    def test_ga_single_period_hand_value(self):
        params = small_params(periods=1)
        c = mode1_contract([0.5], [3.34e7])
        out = profit_ga(
            [16_667.0], [16_667.0], c, [5_000.0], [3_000.0], ga_spec(), params
        )
        # 21667*3000 - 1.67e7 - (41000*730 + 1320*16667)
        assert out.total == pytest.approx(-3.62944e6, rel=1e-5)

    def test_ga_idle_pays_fixed_cost(self):
        params = small_params(periods=1)
        out = profit_ga([0.0], [0.0], FuturesContract.none(1), [0.0], [3_000.0], ga_spec(), params)
        assert out.total == pytest.approx(-2.993e7)

    def test_nptp_without_trading_is_zero(self):
        params = small_params(periods=1)
        out = profit_ga([0.0], [0.0], FuturesContract.none(1), [0.0], [3_000.0], nptp_spec(), params)
        assert out.total == 0.0

    def test_sales_cannot_exceed_production(self):
        params = small_params(periods=1)
        with pytest.raises(ValueError):
            profit_rep2a([10.0], [5.0], FuturesContract.none(1), [100.0], ra_spec(), params)

    def test_breakdown_identity_enforced(self):
        with pytest.raises(ValueError):
            CashflowBreakdown(1.0, 1.0, 1.0, 99.0)


class TestConservationProperties:
    @given(
        q=st.floats(min_value=0.0, max_value=1.0),
        rho_f=st.floats(min_value=0.0, max_value=5e7),
        ra_prod=st.floats(min_value=0.0, max_value=20_000.0),
        ga_sell=st.floats(min_value=0.0, max_value=20_000.0),
        price=st.floats(min_value=100.0, max_value=5_000.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_futures_cashflows_cancel_pairwise(self, q, rho_f, ra_prod, ga_sell, price):
        """Joint profit is invariant to the futures price for fixed quantities."""
        params = small_params(periods=1)
        delivered = q * ra_prod
        for fee in (rho_f, rho_f / 3 + 1.0):
            c = mode1_contract([q], [fee])
            ra = profit_rep2a([ra_prod], [ra_prod], c, [price], ra_spec(), params)
            ga = profit_ga([ga_sell], [ga_sell], c, [delivered], [price], ga_spec(), params)
            if fee == rho_f:
                joint = ra.total + ga.total
            else:
                assert ra.total + ga.total == pytest.approx(joint, rel=1e-12, abs=1e-6)

    @given(
        q=st.floats(min_value=0.0, max_value=1.0),
        ra_sell=st.floats(min_value=0.0, max_value=20_000.0),
        ga_sell=st.floats(min_value=0.0, max_value=20_000.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_ownership_conservation(self, q, ra_sell, ga_sell):
        """The settled share moves ownership, not physical supply: the retained
        plus delivered quantities always rebuild total sales."""
        params = small_params(periods=1)
        c = mode1_contract([q], [1e6])
        delivered = settle_futures(c, 0, ra_sell)
        retained = ra_sell - delivered
        assert retained + (ga_sell + delivered) == pytest.approx(ra_sell + ga_sell, rel=1e-12, abs=1e-9)
        # and the spot price both producers face is the one set by physical supply
        assert spot_price(ga_sell + delivered, max(retained, 0.0), TABLE1) == pytest.approx(
            spot_price(ga_sell, ra_sell, TABLE1), rel=1e-12
        )
