"""Run configuration loaded from a JSON document.

Example::

    {
      "units": "percent",
      "assets": [{"name": "A1", "mu": 1, "vol": 1}, ...],
      "correlation": 0.25,
      "costs": {"c_minus": 2, "c_plus": 1, "delta_minus": 5, "delta_plus": 5},
      "current_weights": {"mvo_target_vol": 2},
      "mode": "quadratic",
      "sigma_star": 4
    }

Rates are decimals unless ``units`` is ``"percent"``. In percent mode,
``mu``, ``vol``, ``c_minus``, ``c_plus``, weights and volatility targets are
divided by 100. ``delta_minus``/``delta_plus`` are also divided by 100 so
that a 5% cost slope is written ``5``. Covariance entries are divided by
100**2. Correlations and gamma are unitless and never rescaled.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .market import CostSpec, Universe, build_covariance

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]

COST_KEYS = ("c_minus", "c_plus", "delta_minus", "delta_plus")
SOLVER_KEYS = {"qp_tol", "phi", "eps_abs", "eps_rel", "max_iter", "adaptive", "budget_tol",
               "projection", "vol_tol", "tol", "starts", "seed", "keep_history",
               "adapt_every", "adapt_until"}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass
class RunConfig:
    universe: Universe
    costs: CostSpec
    current_weights: np.ndarray | None
    current_target_vol: float | None = None
    mode: str = "quadratic"
    gamma: float | None = None
    sigma_star: float | None = None
    grid: dict = field(default_factory=dict)
    rebalances_per_year: int = 1
    solver: dict = field(default_factory=dict)

    def resolve_current(self) -> np.ndarray:
        """Current portfolio, solving for it when given as a volatility target."""
        if self.current_weights is not None:
            return self.current_weights
        from .frontier import solve_for_target_vol

        res = solve_for_target_vol("mvo", self.universe, self.costs,
                                   np.full(self.universe.n, 1.0 / self.universe.n),
                                   self.current_target_vol, tol=1e-8, solver=self.solver)
        self.current_weights = res.w_star
        return self.current_weights


def _num(v, what):
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: expected numbers, got {v!r}") from exc
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what}: values must be finite")
    return arr


def _vec(v, n, what, scale=1.0):
    arr = _num(v, what) * scale
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(f"{what}: expected a scalar or {n} values, got shape {arr.shape}")
    return arr


def parse_config(doc: dict) -> RunConfig:
    """Build a :class:`RunConfig` from an already-parsed document."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    units = doc.get("units", "decimal")
    if units not in ("decimal", "percent"):
        raise ConfigError(f"units must be 'decimal' or 'percent', got {units!r}")
    pct = 0.01 if units == "percent" else 1.0

    assets = doc.get("assets")
    if not assets or not isinstance(assets, list):
        raise ConfigError("'assets' must be a non-empty list of {name, mu, vol}")
    try:
        names = tuple(str(a.get("name", f"asset{i + 1}")) for i, a in enumerate(assets))
        mu = _num([a["mu"] for a in assets], "assets.mu") * pct
        vols = [a.get("vol") for a in assets]
    except (KeyError, AttributeError) as exc:
        raise ConfigError(f"each asset needs at least 'mu': {exc}") from exc
    n = len(assets)

    try:
        if doc.get("covariance") is not None:
            cov = _num(doc["covariance"], "covariance") * pct**2
            universe = Universe(mu, cov, names)
        else:
            if any(v is None for v in vols):
                raise ConfigError("every asset needs 'vol' unless 'covariance' is given")
            corr = doc.get("correlation", 0.0)
            corr = float(corr) if np.isscalar(corr) else _num(corr, "correlation")
            cov = build_covariance(_num(vols, "assets.vol") * pct, corr)
            universe = Universe(mu, cov, names)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid risk model: {exc}") from exc

    raw_costs = doc.get("costs", {})
    if not isinstance(raw_costs, dict):
        raise ConfigError("'costs' must be an object")
    unknown = set(raw_costs) - set(COST_KEYS)
    if unknown:
        raise ConfigError(f"unknown cost keys: {sorted(unknown)}")
    try:
        costs = CostSpec(*(_vec(raw_costs.get(k, 0.0), n, f"costs.{k}", pct) for k in COST_KEYS))
    except ValueError as exc:
        raise ConfigError(f"invalid costs: {exc}") from exc

    cur = doc.get("current_weights")
    current, current_vol = None, None
    if cur is None:
        current = np.full(n, 1.0 / n)
    elif isinstance(cur, dict):
        if "mvo_target_vol" not in cur:
            raise ConfigError("current_weights object must hold 'mvo_target_vol'")
        current_vol = float(cur["mvo_target_vol"]) * pct
    else:
        current = _vec(cur, n, "current_weights", pct)
        if np.any(current < 0):
            raise ConfigError("current_weights must be non-negative")
        if abs(current.sum() - 1.0) > 1e-9:
            warnings.warn(f"current weights sum to {current.sum():.10g}, not 1", stacklevel=2)

    mode = doc.get("mode", "quadratic")
    if mode not in ("mvo", "linear", "quadratic", "strict"):
        raise ConfigError(f"unknown mode {mode!r}")
    gamma = doc.get("gamma")
    sigma_star = doc.get("sigma_star")
    if gamma is not None and sigma_star is not None:
        raise ConfigError("give either 'gamma' or 'sigma_star', not both")
    if gamma is not None:
        gamma = float(gamma)
        if gamma < 0:
            raise ConfigError("gamma must be non-negative")
    if sigma_star is not None:
        sigma_star = float(sigma_star) * pct
        if sigma_star <= 0:
            raise ConfigError("sigma_star must be positive")

    grid = dict(doc.get("grid", {}))
    if grid.get("kind", "gamma") not in ("gamma", "sigma"):
        raise ConfigError("grid.kind must be 'gamma' or 'sigma'")
    if grid.get("kind") == "sigma":
        for k in ("min", "max"):
            if k in grid:
                grid[k] = float(grid[k]) * pct

    reb = doc.get("rebalances_per_year", 1)
    if not isinstance(reb, int) or reb < 1:
        raise ConfigError("rebalances_per_year must be an integer >= 1")

    solver = dict(doc.get("solver", {}))
    unknown = set(solver) - SOLVER_KEYS
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)}")

    return RunConfig(universe, costs, current, current_vol, mode, gamma, sigma_star,
                     grid, reb, solver)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(doc)
