"""Mean-variance rebalancing under linear (bid/ask) transaction costs.

The trade is split into sales and purchases so the problem becomes a QP in
the stacked variable ``x = (w, dw_minus, dw_plus)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .market import CostSpec, TradeSplit, Universe, executed_cost
from .qp import QpProblem, QpSolution, solve_qp

log = logging.getLogger(__name__)

__all__ = ["AugmentedAssembly", "SolverError", "assemble_lc", "solve_lc", "stacked_bounds",
           "trade_identity"]


class SolverError(RuntimeError):
    """Raised when an inner solve fails; carries whatever diagnostics exist."""

    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info


@dataclass
class AugmentedAssembly:
    qp: QpProblem
    n: int

    def select(self, x) -> np.ndarray:
        """Extract ``w`` from the stacked variable."""
        return np.asarray(x)[: self.n]


def _check_w_tilde(w_tilde, n):
    w_tilde = np.atleast_1d(np.asarray(w_tilde, dtype=float))
    if w_tilde.shape != (n,):
        raise ValueError(f"current portfolio has length {w_tilde.size}, expected {n}")
    return w_tilde


def trade_identity(n: int, w_tilde):
    """Rows ``w + dw_minus - dw_plus = w_tilde``."""
    eye = np.eye(n)
    return np.hstack([eye, eye, -eye]), np.asarray(w_tilde, dtype=float)


def stacked_bounds(w_tilde, long_only: bool = True, turnover_cap: float = 1.0):
    """Bounds on ``(w, dw_minus, dw_plus)``.

    Long-only gives ``0 <= x <= (1, w_tilde, 1 - w_tilde)``. Otherwise ``w``
    is free and each trade leg is capped at ``turnover_cap``.
    """
    w_tilde = np.asarray(w_tilde, dtype=float)
    n = w_tilde.size
    lower = np.zeros(3 * n)
    if long_only:
        if np.any(w_tilde < 0) or np.any(w_tilde > 1):
            raise ValueError("long-only rebalancing needs 0 <= w_tilde <= 1")
        upper = np.concatenate([np.ones(n), w_tilde, 1.0 - w_tilde])
    else:
        lower[:n] = -np.inf
        upper = np.concatenate([np.full(n, np.inf), np.full(2 * n, float(turnover_cap))])
    return lower, upper


def assemble_lc(u: Universe, cs: CostSpec, w_tilde, gamma: float,
                long_only: bool = True, turnover_cap: float = 1.0) -> AugmentedAssembly:
    n = u.n
    if cs.n != n:
        raise ValueError(f"cost spec covers {cs.n} assets, universe has {n}")
    if not cs.is_linear:
        raise ValueError("linear-cost assembly requires delta_minus = delta_plus = 0")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    w_tilde = _check_w_tilde(w_tilde, n)
    Q = np.zeros((3 * n, 3 * n))
    Q[:n, :n] = u.cov
    R = gamma * np.concatenate([u.mu, -cs.c_minus, -cs.c_plus])
    A2, B2 = trade_identity(n, w_tilde)
    A = np.vstack([np.concatenate([np.ones(n), cs.c_minus, cs.c_plus]), A2])
    B = np.concatenate([[1.0], B2])
    lower, upper = stacked_bounds(w_tilde, long_only, turnover_cap)
    return AugmentedAssembly(QpProblem(Q, R, A, B, lower, upper), n)


def solve_lc(u: Universe, cs: CostSpec, w_tilde, gamma: float, *, long_only: bool = True,
             turnover_cap: float = 1.0, tol: float = 1e-9, x0=None,
             return_qp: bool = False):
    """Optimal portfolio under linear costs.

    Returns ``(w_star, trade, cost_paid)`` where ``trade`` holds the sale and
    purchase legs read off the optimal stacked vector. With ``return_qp`` the
    raw :class:`QpSolution` is appended.
    """
    asm = assemble_lc(u, cs, w_tilde, gamma, long_only, turnover_cap)
    sol: QpSolution = solve_qp(asm.qp, tol=tol, x0=x0)
    if not sol.ok:
        raise SolverError(f"linear-cost QP failed: {sol.status.value}",
                          status=sol.status, kkt_residual=sol.kkt_residual)
    n = u.n
    w_star = sol.x[:n]
    trade = TradeSplit(sol.x[n:2 * n], sol.x[2 * n:])
    if np.max(np.minimum(trade.dw_minus, trade.dw_plus)) > 1e-6:
        log.info("sale and purchase legs overlap; the budget pays for both")
    cost = executed_cost(cs, trade, "linear")
    if return_qp:
        return w_star, trade, cost, sol
    return w_star, trade, cost
