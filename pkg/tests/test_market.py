import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tcmvo.market import (CostSpec, TradeSplit, Universe, build_covariance, cost_linear,
                          cost_quadratic, executed_cost, net_expected_return, portfolio_stats,
                          split_trades, transaction_cost)

unit = st.floats(0.0, 1.0, allow_nan=False)


def vec(n):
    return arrays(float, n, elements=unit)


class TestCovariance:
    def test_diagonal(self):
        np.testing.assert_allclose(build_covariance([0.01, 0.02], 0.0), np.diag([1e-4, 4e-4]))

    def test_constant_correlation_offdiag(self, seven):
        assert seven.cov[0, 1] == pytest.approx(0.25 * 0.01 * 0.02, abs=1e-18)
        np.testing.assert_allclose(np.diag(seven.cov), seven.sigma_vols ** 2, atol=1e-12)

    def test_single_asset(self):
        np.testing.assert_allclose(build_covariance([0.3], 0.9), [[0.09]])

    def test_full_matrix(self):
        corr = np.array([[1.0, -0.2], [-0.2, 1.0]])
        np.testing.assert_allclose(build_covariance([0.1, 0.2], corr)[0, 1], -0.004)

    @pytest.mark.parametrize("corr", [1.5, -0.6])
    def test_bad_scalar_correlation(self, corr):
        with pytest.raises(ValueError):
            build_covariance([0.1, 0.1, 0.1], corr)

    def test_not_psd(self):
        corr = np.array([[1, 0.9, -0.9], [0.9, 1, 0.9], [-0.9, 0.9, 1]])
        with pytest.raises(ValueError):
            build_covariance([0.1, 0.1, 0.1], corr)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            Universe(np.zeros(2), np.array([[1.0, 0.1], [0.2, 1.0]]))

    def test_negative_vol_rejected(self):
        with pytest.raises(ValueError):
            build_covariance([0.1, -0.1], 0.0)


class TestStats:
    def test_unit_vector(self, seven):
        m, s = portfolio_stats(seven, np.eye(7)[3])
        assert m == pytest.approx(0.04) and s == pytest.approx(0.04)

    def test_reported_current_portfolio(self, seven):
        # starting portfolio as printed (percent, 2 decimals)
        w = np.array([26.16, 21.41, 16.13, 12.79, 10.56, 7.34, 5.62]) / 100
        m, s = portfolio_stats(seven, w)
        assert round(100 * m, 2) == 3.33
        assert round(100 * s, 2) == 2.00

    def test_null(self, seven):
        assert portfolio_stats(seven, np.zeros(7)) == (0.0, 0.0)

    def test_length_mismatch(self, seven):
        with pytest.raises(ValueError):
            portfolio_stats(seven, np.ones(3))

    @given(vec(7))
    def test_vol_matches_double_loop(self, w):
        u = Universe.from_vols(np.zeros(7), np.linspace(0.01, 0.1, 7), 0.25)
        brute = sum(w[i] * u.cov[i, j] * w[j] for i in range(7) for j in range(7))
        assert portfolio_stats(u, w)[1] ** 2 == pytest.approx(brute, rel=1e-12, abs=1e-15)


class TestTrades:
    def test_split_definition(self):
        t = split_trades([0.3, 0.7], [0.5, 0.5])
        np.testing.assert_allclose(t.dw_minus, [0.2, 0.0])
        np.testing.assert_allclose(t.dw_plus, [0.0, 0.2])

    def test_no_trade(self):
        t = split_trades([0.4, 0.6], [0.4, 0.6])
        assert t.turnover == 0.0

    def test_swap(self):
        t = split_trades([1.0, 0.0], [0.0, 1.0])
        np.testing.assert_array_equal(t.dw_minus, [0.0, 1.0])
        np.testing.assert_array_equal(t.dw_plus, [1.0, 0.0])

    @given(vec(5), vec(5))
    def test_complementary_and_exact(self, w, wt):
        t = split_trades(w, wt)
        assert np.all(t.dw_minus * t.dw_plus == 0)
        np.testing.assert_allclose(wt + t.dw_plus - t.dw_minus, w, atol=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            split_trades([0.5], [0.5, 0.5])


class TestCosts:
    def test_linear_one_asset(self):
        cs = CostSpec.broadcast(1, 0.01, 0.02)
        assert cost_linear(cs, [0.5], [0.0]) == pytest.approx(0.01)

    def test_quadratic_one_asset(self):
        cs = CostSpec.broadcast(1, 0.01, 0.02, 0.03, 0.03)
        assert cost_quadratic(cs, [0.5], [0.0]) == pytest.approx(0.0175)

    def test_zero_trade(self):
        cs = CostSpec.broadcast(3, 0.01, 0.02, 0.05, 0.05)
        w = np.array([0.2, 0.3, 0.5])
        assert cost_linear(cs, w, w) == 0.0 and cost_quadratic(cs, w, w) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            CostSpec.broadcast(2, -0.01)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            CostSpec(np.zeros(2), np.zeros(3), np.zeros(2), np.zeros(2))

    def test_flags(self):
        assert CostSpec.broadcast(3, 0.01, 0.01).is_linear
        assert CostSpec.broadcast(3, 0.0, 0.0, 0.05, 0.05).is_homogeneous
        cs = CostSpec(np.zeros(2), np.zeros(2), np.array([0.02, 0.08]), np.array([0.03, 0.05]))
        assert not cs.is_homogeneous and not cs.is_linear
        assert cs.linear_part().is_linear

    @given(vec(6), vec(6), vec(6), vec(6))
    def test_quadratic_without_slope_is_linear(self, w, wt, cm, cp):
        cs = CostSpec(cm / 10, cp / 10, np.zeros(6), np.zeros(6))
        assert cost_quadratic(cs, w, wt) == cost_linear(cs, w, wt)

    @given(vec(6), vec(6), st.floats(0.001, 0.1), st.floats(0.0, 0.1))
    def test_nonnegative_and_zero_iff_no_trade(self, w, wt, c, d):
        cs = CostSpec.broadcast(6, c, c, d, d)
        for f in (cost_linear, cost_quadratic):
            val = f(cs, w, wt)
            assert val >= 0
            assert (val == 0) == bool(np.all(w == wt))

    @given(vec(4), vec(4))
    def test_executed_cost_of_net_trade(self, w, wt):
        cs = CostSpec.broadcast(4, 0.02, 0.01, 0.05, 0.05)
        t = split_trades(w, wt)
        assert executed_cost(cs, t, "quadratic") == pytest.approx(cost_quadratic(cs, w, wt))
        assert executed_cost(cs, t, "linear") == pytest.approx(cost_linear(cs, w, wt))

    def test_executed_cost_counts_overlap(self):
        cs = CostSpec.broadcast(1, 0.02, 0.01)
        t = TradeSplit(np.array([0.1]), np.array([0.1]))
        assert executed_cost(cs, t, "linear") == pytest.approx(0.003)

    def test_kind_dispatch(self):
        cs = CostSpec.broadcast(1, 0.01, 0.02, 0.03, 0.03)
        assert transaction_cost(cs, [0.5], [0.0], "none") == 0.0
        with pytest.raises(ValueError):
            transaction_cost(cs, [0.5], [0.0], "cubic")


class TestNetReturn:
    # the three optimised portfolios as printed, percent
    W_LC = np.array([0.00, 14.52, 16.13, 12.79, 10.56, 18.27, 26.74]) / 100
    W_QC = np.array([6.70, 10.84, 14.32, 12.78, 10.56, 14.17, 29.13]) / 100
    W_TILDE = np.array([26.16, 21.41, 16.13, 12.79, 10.56, 7.34, 5.62]) / 100

    def test_quadratic_cost_row(self, seven, bidask_costs):
        c = cost_quadratic(bidask_costs, self.W_QC, self.W_TILDE)
        assert 100 * c == pytest.approx(1.49, abs=0.01)

    def test_linear_cost_row(self, seven, bidask_costs):
        c = cost_linear(bidask_costs, self.W_LC, self.W_TILDE)
        assert 100 * c == pytest.approx(0.98, abs=0.01)

    def test_net_quadratic(self, seven, bidask_costs):
        r = net_expected_return(seven, self.W_QC, self.W_TILDE, bidask_costs, "quadratic")
        assert 100 * r == pytest.approx(4.24, abs=0.01)

    def test_net_linear(self, seven, bidask_costs):
        r = net_expected_return(seven, self.W_LC, self.W_TILDE, bidask_costs.linear_part(),
                                "linear")
        assert 100 * r == pytest.approx(4.88, abs=0.01)

    def test_zero_costs_normalized(self, seven):
        w = np.full(7, 0.1)
        cs = CostSpec.broadcast(7)
        r = net_expected_return(seven, w, np.full(7, 1 / 7), cs, normalize=True)
        assert r == pytest.approx(portfolio_stats(seven, w / w.sum())[0])

    def test_rebalance_multiplier(self, seven, bidask_costs):
        r1 = net_expected_return(seven, self.W_QC, self.W_TILDE, bidask_costs)
        r5 = net_expected_return(seven, self.W_QC, self.W_TILDE, bidask_costs,
                                 rebalances_per_year=5)
        c = cost_quadratic(bidask_costs, self.W_QC, self.W_TILDE)
        assert r1 - r5 == pytest.approx(4 * c)

    @pytest.mark.parametrize("k", [0, 2.5])
    def test_bad_multiplier(self, seven, bidask_costs, k):
        with pytest.raises(ValueError):
            net_expected_return(seven, self.W_QC, self.W_TILDE, bidask_costs,
                                rebalances_per_year=k)
