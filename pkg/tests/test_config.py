import json
import warnings

import numpy as np
import pytest

from tcmvo.config import ConfigError, load_config, parse_config


def doc(**over):
    d = {
        "assets": [{"name": "a", "mu": 0.03, "vol": 0.1}, {"name": "b", "mu": 0.06, "vol": 0.2}],
        "correlation": 0.25,
        "costs": {"c_minus": 0.02, "c_plus": 0.01},
        "current_weights": [0.5, 0.5],
        "mode": "linear",
        "gamma": 0.5,
    }
    d.update(over)
    return {k: v for k, v in d.items() if v is not None}


def test_decimal_document():
    cfg = parse_config(doc())
    assert cfg.universe.names == ("a", "b")
    np.testing.assert_allclose(cfg.universe.cov, [[0.01, 0.005], [0.005, 0.04]])
    np.testing.assert_allclose(cfg.costs.c_minus, [0.02, 0.02])
    np.testing.assert_array_equal(cfg.costs.delta_plus, 0.0)
    assert cfg.mode == "linear" and cfg.gamma == 0.5 and cfg.rebalances_per_year == 1


def test_percent_units_match_decimal():
    pct = parse_config(doc(units="percent",
                           assets=[{"name": "a", "mu": 3, "vol": 10}, {"name": "b", "mu": 6, "vol": 20}],
                           costs={"c_minus": 2, "c_plus": 1, "delta_minus": 5},
                           current_weights=[50, 50], gamma=None, sigma_star=4))
    dec = parse_config(doc(costs={"c_minus": 0.02, "c_plus": 0.01, "delta_minus": 0.05},
                           gamma=None, sigma_star=0.04))
    np.testing.assert_allclose(pct.universe.cov, dec.universe.cov)
    np.testing.assert_allclose(pct.universe.mu, dec.universe.mu)
    np.testing.assert_allclose(pct.costs.delta_minus, dec.costs.delta_minus)
    np.testing.assert_allclose(pct.current_weights, dec.current_weights)
    assert pct.sigma_star == pytest.approx(dec.sigma_star)


def test_covariance_override():
    cfg = parse_config(doc(covariance=[[0.04, 0.0], [0.0, 0.09]]))
    np.testing.assert_allclose(cfg.universe.cov, np.diag([0.04, 0.09]))


def test_correlation_matrix():
    cfg = parse_config(doc(correlation=[[1, -0.5], [-0.5, 1]]))
    assert cfg.universe.cov[0, 1] == pytest.approx(-0.01)


def test_per_asset_costs():
    cfg = parse_config(doc(costs={"c_minus": [0.01, 0.03]}))
    np.testing.assert_allclose(cfg.costs.c_minus, [0.01, 0.03])


def test_unfunded_start_warns():
    with pytest.warns(UserWarning, match="sum to"):
        cfg = parse_config(doc(current_weights=[0.49, 0.5]))
    assert cfg.current_weights.sum() == pytest.approx(0.99)


def test_default_current_is_equal_weight():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cfg = parse_config(doc(current_weights=None))
    np.testing.assert_allclose(cfg.resolve_current(), [0.5, 0.5])


def test_current_from_vol_target(tmp_path):
    from tcmvo.market import portfolio_stats

    cfg = parse_config(doc(current_weights={"mvo_target_vol": 0.12}))
    assert cfg.current_weights is None
    w = cfg.resolve_current()
    assert portfolio_stats(cfg.universe, w)[1] == pytest.approx(0.12, abs=1e-8)


@pytest.mark.parametrize("over", [
    {"units": "basis_points"},
    {"assets": []},
    {"assets": [{"name": "a", "vol": 0.1}]},
    {"assets": [{"name": "a", "mu": 0.1}]},
    {"assets": [{"name": "a", "mu": "high", "vol": 0.1}]},
    {"correlation": 1.5},
    {"correlation": [[1, 0.5], [0.4, 1]]},
    {"costs": {"c_minus": 0.02, "fee": 0.1}},
    {"costs": {"c_minus": [0.01, 0.02, 0.03]}},
    {"costs": {"c_minus": -0.01}},
    {"costs": [0.01]},
    {"current_weights": [-0.1, 1.1]},
    {"current_weights": {"target": 0.1}},
    {"mode": "cubic"},
    {"sigma_star": 0.04},
    {"gamma": -1.0},
    {"gamma": None, "sigma_star": 0.0},
    {"grid": {"kind": "beta"}},
    {"rebalances_per_year": 0},
    {"rebalances_per_year": 2.5},
    {"solver": {"speed": "fast"}},
    {"covariance": [[0.04, 0.0], [0.0, float("nan")]]},
])
def test_rejected(over):
    with pytest.raises(ConfigError):
        parse_config(doc(**over))


def test_not_an_object():
    with pytest.raises(ConfigError):
        parse_config([1, 2])


def test_load_roundtrip(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(doc(solver={"max_iter": 50})))
    cfg = load_config(p)
    assert cfg.solver == {"max_iter": 50}


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_sigma_grid_scaled_in_percent():
    cfg = parse_config(doc(units="percent", assets=[{"mu": 3, "vol": 10}, {"mu": 6, "vol": 20}],
                           current_weights=[50, 50], costs={},
                           grid={"kind": "sigma", "min": 11, "max": 19, "count": 5}))
    assert cfg.grid == {"kind": "sigma", "min": 0.11, "max": 0.19, "count": 5}
    assert cfg.universe.names == ("asset1", "asset2")
