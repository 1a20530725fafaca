"""Asset universe, portfolio statistics and transaction-cost functions.

All rates are decimals (0.02 means 2%). Portfolios are plain 1-D numpy
arrays; the helpers below accept anything ``np.asarray`` understands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Universe",
    "CostSpec",
    "TradeSplit",
    "build_covariance",
    "portfolio_stats",
    "split_trades",
    "cost_linear",
    "cost_quadratic",
    "transaction_cost",
    "net_expected_return",
]

PSD_FLOOR = 1e-10
SYMMETRY_TOL = 1e-12


def _check_psd(cov: np.ndarray) -> np.ndarray:
    asym = np.max(np.abs(cov - cov.T)) if cov.size else 0.0
    scale = max(np.max(np.abs(cov)), 1.0) if cov.size else 1.0
    if asym > SYMMETRY_TOL * scale:
        raise ValueError(f"covariance is not symmetric (max asymmetry {asym:.3e})")
    cov = 0.5 * (cov + cov.T)
    eig = np.linalg.eigvalsh(cov)
    lam_max = max(eig[-1], 0.0)
    if eig[0] < -PSD_FLOOR * lam_max or (lam_max == 0.0 and eig[0] < 0.0):
        raise ValueError(
            f"covariance is not positive semi-definite "
            f"(min eigenvalue {eig[0]:.3e}, max eigenvalue {eig[-1]:.3e})"
        )
    return cov


def build_covariance(vols, corr) -> np.ndarray:
    """Covariance matrix from volatilities and a correlation.

    ``corr`` is either a scalar (constant correlation) or a full ``n x n``
    correlation matrix with unit diagonal.
    """
    vols = np.atleast_1d(np.asarray(vols, dtype=float))
    n = vols.size
    if n == 0:
        raise ValueError("need at least one asset")
    if np.any(vols <= 0):
        raise ValueError("volatilities must be positive")
    if np.ndim(corr) == 0:
        rho = float(corr)
        if n > 1 and not (-1.0 / (n - 1) < rho <= 1.0):
            raise ValueError(
                f"constant correlation {rho} outside (-1/(n-1), 1] for n={n}"
            )
        cmat = np.full((n, n), rho)
        np.fill_diagonal(cmat, 1.0)
    else:
        cmat = np.asarray(corr, dtype=float)
        if cmat.shape != (n, n):
            raise ValueError(f"correlation matrix has shape {cmat.shape}, expected {(n, n)}")
        if np.max(np.abs(cmat - cmat.T)) > SYMMETRY_TOL:
            raise ValueError("correlation matrix is not symmetric")
        if np.max(np.abs(np.diag(cmat) - 1.0)) > SYMMETRY_TOL:
            raise ValueError("correlation matrix must have a unit diagonal")
    cov = cmat * np.outer(vols, vols)
    np.fill_diagonal(cov, vols**2)
    return _check_psd(cov)


@dataclass(frozen=True)
class Universe:
    """Expected returns and covariance of ``n`` assets."""

    mu: np.ndarray
    cov: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mu.ndim != 1 or mu.size < 1:
            raise ValueError("mu must be a non-empty vector")
        if cov.shape != (mu.size, mu.size):
            raise ValueError(f"cov has shape {cov.shape}, expected {(mu.size, mu.size)}")
        cov = _check_psd(cov)
        names = tuple(self.names) or tuple(f"asset_{i + 1}" for i in range(mu.size))
        if len(names) != mu.size:
            raise ValueError("names length does not match mu")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_vols(cls, mu, vols, corr, names=()) -> "Universe":
        return cls(mu=mu, cov=build_covariance(vols, corr), names=names)

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def sigma_vols(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))


@dataclass(frozen=True)
class CostSpec:
    """Bid/ask unit costs ``c_minus``/``c_plus`` and quadratic slopes ``delta_*``."""

    c_minus: np.ndarray
    c_plus: np.ndarray
    delta_minus: np.ndarray
    delta_plus: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(getattr(self, f), dtype=float))
                for f in ("c_minus", "c_plus", "delta_minus", "delta_plus")]
        n = max(a.size for a in arrs)
        out = []
        for name, a in zip(("c_minus", "c_plus", "delta_minus", "delta_plus"), arrs):
            if a.size == 1 and n > 1:
                a = np.full(n, a[0])
            if a.size != n:
                raise ValueError(f"{name} has length {a.size}, expected {n}")
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be finite and non-negative")
            out.append(a)
        for name, a in zip(("c_minus", "c_plus", "delta_minus", "delta_plus"), out):
            object.__setattr__(self, name, a)

    @classmethod
    def broadcast(cls, n: int, c_minus=0.0, c_plus=0.0, delta_minus=0.0, delta_plus=0.0):
        """Build a spec for ``n`` assets, broadcasting scalar inputs."""
        def vec(v):
            v = np.atleast_1d(np.asarray(v, dtype=float))
            return np.full(n, v[0]) if v.size == 1 else v
        return cls(vec(c_minus), vec(c_plus), vec(delta_minus), vec(delta_plus))

    @property
    def n(self) -> int:
        return self.c_minus.size

    @property
    def is_linear(self) -> bool:
        return not (np.any(self.delta_minus) or np.any(self.delta_plus))

    @property
    def is_homogeneous(self) -> bool:
        """True when every asset shares the same two quadratic slopes."""
        return bool(np.all(self.delta_minus == self.delta_minus[0])
                    and np.all(self.delta_plus == self.delta_plus[0]))

    def linear_part(self) -> "CostSpec":
        zero = np.zeros(self.n)
        return CostSpec(self.c_minus, self.c_plus, zero, zero)


@dataclass(frozen=True)
class TradeSplit:
    """Sales ``dw_minus`` and purchases ``dw_plus`` taking ``w_tilde`` to ``w``."""

    dw_minus: np.ndarray
    dw_plus: np.ndarray

    @property
    def turnover(self) -> float:
        return float(np.sum(self.dw_minus) + np.sum(self.dw_plus))


def _pair(a, b):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def portfolio_stats(u: Universe, w) -> tuple[float, float]:
    """Return ``(w'mu, sqrt(w'Sigma w))``."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.shape != u.mu.shape:
        raise ValueError(f"portfolio has length {w.size}, universe has {u.n} assets")
    var = float(w @ u.cov @ w)
    return float(w @ u.mu), float(np.sqrt(max(var, 0.0)))


def split_trades(w, w_tilde) -> TradeSplit:
    w, w_tilde = _pair(w, w_tilde)
    return TradeSplit(np.maximum(w_tilde - w, 0.0), np.maximum(w - w_tilde, 0.0))


def cost_linear(cs: CostSpec, w, w_tilde) -> float:
    w, w_tilde = _pair(w, w_tilde)
    if w.size != cs.n:
        raise ValueError(f"cost spec covers {cs.n} assets, portfolio has {w.size}")
    t = split_trades(w, w_tilde)
    return float(cs.c_minus @ t.dw_minus + cs.c_plus @ t.dw_plus)


def cost_quadratic(cs: CostSpec, w, w_tilde) -> float:
    w, w_tilde = _pair(w, w_tilde)
    if w.size != cs.n:
        raise ValueError(f"cost spec covers {cs.n} assets, portfolio has {w.size}")
    t = split_trades(w, w_tilde)
    sells = t.dw_minus @ (cs.c_minus + cs.delta_minus * t.dw_minus)
    buys = t.dw_plus @ (cs.c_plus + cs.delta_plus * t.dw_plus)
    return float(sells + buys)


def executed_cost(cs: CostSpec, trade: TradeSplit, kind: str = "quadratic") -> float:
    """Cost of the legs as traded.

    Equals the cost of the net trade when no asset is both sold and bought.
    When the legs overlap, the budget is charged for both and this is the
    wealth actually consumed.
    """
    dm, dp = _pair(trade.dw_minus, trade.dw_plus)
    if kind == "none":
        return 0.0
    if kind not in ("linear", "quadratic"):
        raise ValueError(f"unknown cost kind {kind!r}")
    cost = cs.c_minus @ dm + cs.c_plus @ dp
    if kind == "quadratic":
        cost += cs.delta_minus @ dm**2 + cs.delta_plus @ dp**2
    return float(cost)


def transaction_cost(cs: CostSpec, w, w_tilde, kind: str = "quadratic") -> float:
    if kind == "linear":
        return cost_linear(cs, w, w_tilde)
    if kind == "quadratic":
        return cost_quadratic(cs, w, w_tilde)
    if kind == "none":
        return 0.0
    raise ValueError(f"unknown cost kind {kind!r}")


def net_expected_return(u: Universe, w_star, w_tilde, cs: CostSpec,
                        cost_kind: str = "quadratic", rebalances_per_year: int = 1,
                        normalize: bool = False) -> float:
    """Expected return net of the rebalancing cost.

    The cost is always that of the raw trade ``w_tilde -> w_star`` and is
    paid ``rebalances_per_year`` times. With ``normalize=False`` the gross
    return is ``mu(w_star)``; with ``normalize=True`` it is the return of
    ``w_star`` rescaled to sum to one.
    """
    w_star = np.atleast_1d(np.asarray(w_star, dtype=float))
    if int(rebalances_per_year) != rebalances_per_year or rebalances_per_year < 1:
        raise ValueError("rebalances_per_year must be an integer >= 1")
    total = w_star.sum()
    if total <= 0:
        raise ValueError("portfolio weights must sum to a positive value")
    gross_w = w_star / total if normalize else w_star
    gross, _ = portfolio_stats(u, gross_w)
    return gross - rebalances_per_year * transaction_cost(cs, w_star, w_tilde, cost_kind)
