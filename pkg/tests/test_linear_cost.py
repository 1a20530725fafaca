import numpy as np
import pytest

from tcmvo.frontier import solve_for_target_vol, solve_mode
from tcmvo.linear_cost import assemble_lc, solve_lc, stacked_bounds
from tcmvo.market import CostSpec, Universe, cost_linear, portfolio_stats
from tcmvo.qp import QpProblem, solve_qp

# optima from an interior-point solver on the same problem with an inequality budget
# (which binds), starting from the rounded starting portfolio
LC_ORACLE = {
    0.1: [0.0, 0.0, 0.1613, 0.1279, 0.1057, 0.2018468994, 0.3891293382],
    0.5: [0.0, 0.0, 0.0, 0.0, 0.0, 0.0734, 0.9007465347],
}


def test_one_asset_layout():
    u = Universe.from_vols([0.05], [0.1], 0.0)
    cs = CostSpec.broadcast(1, 0.02, 0.01)
    asm = assemble_lc(u, cs, [0.4], 2.0)
    np.testing.assert_allclose(asm.qp.A, [[1, 0.02, 0.01], [1, 1, -1]])
    np.testing.assert_allclose(asm.qp.B, [1, 0.4])
    np.testing.assert_allclose(asm.qp.R, 2.0 * np.array([0.05, -0.02, -0.01]))
    np.testing.assert_allclose(asm.qp.Q, np.diag([0.01, 0, 0]))


def test_upper_bound_block():
    lo, hi = stacked_bounds([0.5, 0.5])
    np.testing.assert_allclose(hi, [1, 1, 0.5, 0.5, 0.5, 0.5])
    np.testing.assert_array_equal(lo, np.zeros(6))


def test_zero_gamma_zero_linear_term(seven, bidask_costs, w_tilde):
    asm = assemble_lc(seven, bidask_costs.linear_part(), w_tilde, 0.0)
    assert not np.any(asm.qp.R)


def test_rejects_quadratic_slope(seven, bidask_costs, w_tilde):
    with pytest.raises(ValueError):
        assemble_lc(seven, bidask_costs, w_tilde, 1.0)


@pytest.mark.parametrize("gamma", sorted(LC_ORACLE))
def test_matches_reference(seven, bidask_costs, w_tilde_fixed, gamma):
    w, trade, cost = solve_lc(seven, bidask_costs.linear_part(), w_tilde_fixed, gamma)
    np.testing.assert_allclose(w, LC_ORACLE[gamma], atol=1e-8)
    assert w.sum() + cost == pytest.approx(1.0, abs=1e-9)


def test_four_percent_portfolio(seven, bidask_costs, w_tilde):
    res = solve_for_target_vol("linear", seven, bidask_costs, w_tilde, 0.04, tol=1e-6)
    expected = np.array([0.00, 14.52, 16.13, 12.79, 10.56, 18.27, 26.74])
    np.testing.assert_allclose(100 * res.w_star, expected, atol=0.10)
    assert 100 * res.cost_paid == pytest.approx(0.98, abs=0.03)


def test_zero_costs_is_markowitz(seven, w_tilde):
    free = CostSpec.broadcast(7)
    for gamma in (0.01, 0.05, 0.2):
        w = solve_lc(seven, free, w_tilde, gamma)[0]
        ref = solve_mode("mvo", seven, free, w_tilde, gamma).w_star
        np.testing.assert_allclose(w, ref, atol=1e-8)


def test_zero_gamma_from_min_variance(seven, bidask_costs):
    # With no weight on return, offsetting sale/purchase legs shrink invested
    # wealth and with it the variance, so the min-variance portfolio is not a
    # fixed point. Reference optimum from an interior-point solver.
    n = seven.n
    mv = solve_qp(QpProblem(seven.cov, np.zeros(n), np.ones((1, n)), [1.0], np.zeros(n),
                            np.ones(n))).x
    np.testing.assert_allclose(mv[:3], [0.8670520231, 0.1213872832, 0.0115606936], atol=1e-9)
    w, trade, cost = solve_lc(seven, bidask_costs.linear_part(), mv, 0.0)
    np.testing.assert_allclose(w, [0.8510646644, 0.1266985394, 0.0138640244, 0, 0, 0, 0],
                               atol=1e-8)
    assert 0.5 * w @ seven.cov @ w < 0.5 * mv @ seven.cov @ mv
    # the budget charges both legs
    assert w.sum() + cost == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.minimum(trade.dw_minus, trade.dw_plus)) > 0.1


def test_small_gamma_stays_put_without_overlap(seven, bidask_costs):
    n = seven.n
    mv = solve_qp(QpProblem(seven.cov, np.zeros(n), np.ones((1, n)), [1.0], np.zeros(n),
                            np.ones(n))).x
    w, trade, cost = solve_lc(seven, bidask_costs.linear_part(), mv, 1e-3)
    assert np.max(np.minimum(trade.dw_minus, trade.dw_plus)) <= 1e-9
    assert w.sum() + cost_linear(bidask_costs, w, mv) == pytest.approx(1.0, abs=1e-9)


def test_budget_and_split(seven, bidask_costs, w_tilde):
    lin = bidask_costs.linear_part()
    for gamma in np.logspace(-3, 2, 12):
        w, trade, cost = solve_lc(seven, lin, w_tilde, gamma)
        assert w.sum() + cost_linear(lin, w, w_tilde) == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(w_tilde + trade.dw_plus - trade.dw_minus, w, atol=1e-10)
        assert np.max(np.minimum(trade.dw_minus, trade.dw_plus)) <= 1e-6


def test_volatility_monotone_in_gamma(seven, bidask_costs, w_tilde):
    lin = bidask_costs.linear_part()
    vols = [portfolio_stats(seven, solve_lc(seven, lin, w_tilde, g)[0])[1]
            for g in np.logspace(-3, 2, 50)]
    assert np.all(np.diff(vols) >= -1e-8)


def test_never_pays_more_than_cost_blind(seven, bidask_costs, w_tilde):
    lin = bidask_costs.linear_part()
    for target in (0.03, 0.04, 0.05):
        lc = solve_for_target_vol("linear", seven, bidask_costs, w_tilde, target, tol=1e-6)
        mvo = solve_for_target_vol("mvo", seven, bidask_costs, w_tilde, target, tol=1e-6)
        assert cost_linear(lin, lc.w_star, w_tilde) <= cost_linear(lin, mvo.w_star, w_tilde)


def test_unconstrained_variant(seven, bidask_costs, w_tilde):
    lin = bidask_costs.linear_part()
    w, trade, cost = solve_lc(seven, lin, w_tilde, 0.5, long_only=False, turnover_cap=2.0)
    assert w.sum() + cost == pytest.approx(1.0, abs=1e-8)
    w_lo = solve_lc(seven, lin, w_tilde, 0.5)[0]
    # dropping the box can only improve the objective
    obj = lambda x: 0.5 * x @ seven.cov @ x - 0.5 * (seven.mu @ x - cost_linear(lin, x, w_tilde))
    assert obj(w) <= obj(w_lo) + 1e-10
