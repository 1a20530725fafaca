"""Quadratic transaction costs solved by ADMM.

With quadratic costs the budget ``1'w + C(w|w_tilde) = 1`` becomes a quadric
in ``x = (w, dw_minus, dw_plus)``. The objective and the linear constraints
go into the x-update (a QP); the budget surface is handled in the y-update
by an exact Euclidean projection; ``u`` is the scaled dual.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .linear_cost import SolverError, stacked_bounds, trade_identity
from .market import CostSpec, TradeSplit, Universe, executed_cost
from .projection import ProjectionError, budget_residual, project_budget
from .qp import QpProblem, solve_qp

__all__ = ["QcAssembly", "AdmmState", "AdmmDiagnostics", "assemble_qc", "x_update",
           "admm_solve", "solve_qc"]


@dataclass
class QcAssembly:
    Q: np.ndarray
    R: np.ndarray
    A1: np.ndarray
    B1: float
    A2: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cs: CostSpec
    w_tilde: np.ndarray

    @property
    def n(self) -> int:
        return self.w_tilde.size

    def budget_residual(self, x) -> float:
        """``A1 x + x'C1 x - B1``."""
        x = np.asarray(x, dtype=float)
        return float(self.A1 @ x + x @ self.C1 @ x - self.B1)

    def objective(self, x) -> float:
        return float(0.5 * x @ self.Q @ x - x @ self.R)


@dataclass
class AdmmState:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    phi: float
    k: int = 0
    primal_residual: float = math.inf
    dual_residual: float = math.inf


@dataclass
class AdmmDiagnostics:
    converged: bool
    iterations: int
    phi: float
    primal_residual: float
    dual_residual: float
    budget_residual: float
    history: list = field(default_factory=list)
    state: AdmmState | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("state")
        return d


def assemble_qc(u: Universe, cs: CostSpec, w_tilde, gamma: float,
                long_only: bool = True, turnover_cap: float = 1.0) -> QcAssembly:
    n = u.n
    if cs.n != n:
        raise ValueError(f"cost spec covers {cs.n} assets, universe has {n}")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    w_tilde = np.atleast_1d(np.asarray(w_tilde, dtype=float))
    if w_tilde.shape != (n,):
        raise ValueError(f"current portfolio has length {w_tilde.size}, expected {n}")
    Q = np.zeros((3 * n, 3 * n))
    Q[:n, :n] = u.cov
    Q[n:, n:] = np.diag(2.0 * gamma * np.concatenate([cs.delta_minus, cs.delta_plus]))
    R = gamma * np.concatenate([u.mu, -cs.c_minus, -cs.c_plus])
    A1 = np.concatenate([np.ones(n), cs.c_minus, cs.c_plus])
    A2, B2 = trade_identity(n, w_tilde)
    C1 = np.diag(np.concatenate([np.zeros(n), cs.delta_minus, cs.delta_plus]))
    lower, upper = stacked_bounds(w_tilde, long_only, turnover_cap)
    return QcAssembly(Q, R, A1, 1.0, A2, B2, C1, lower, upper, cs, w_tilde)


def x_update(asm: QcAssembly, y, u, phi: float, x0=None, tol: float = 1e-9) -> np.ndarray:
    """Proximal QP step: objective plus ``phi/2 |x - y + u|^2`` over the linear set."""
    if phi <= 0:
        raise ValueError("penalty phi must be positive")
    m = asm.Q.shape[0]
    qp = QpProblem(asm.Q + phi * np.eye(m), asm.R + phi * (np.asarray(y) - np.asarray(u)),
                   asm.A2, asm.B2, asm.lower, asm.upper)
    sol = solve_qp(qp, tol=tol, x0=x0)
    if not sol.ok:
        raise SolverError(f"x-update QP failed: {sol.status.value}", status=sol.status)
    return sol.x


def admm_solve(asm: QcAssembly, phi: float = 1.0, eps_abs: float = 1e-8,
               eps_rel: float = 1e-6, max_iter: int = 5000, *, state: AdmmState | None = None,
               adaptive: bool = True, budget_tol: float = 1e-7, projection: str = "auto",
               keep_history: bool = False, adapt_every: int = 10,
               adapt_until: int = 1000):
    """Run ADMM on an assembled quadratic-cost problem.

    Returns ``(w_star, trade, cost_paid, diagnostics)``. ``w_star`` is taken
    from the last x-iterate, which satisfies the trade identity and bounds
    exactly; the budget holds up to the final primal residual.

    Parameters
    ----------
    state : AdmmState, optional
        Starting iterates. Defaults to ``x = y = (w_tilde, 0, 0)``, ``u = 0``.
    adaptive : bool
        Rescale ``phi`` by 2 when the primal and dual residuals differ by
        more than a factor 10. Checked every ``adapt_every`` iterations and
        only during the first ``adapt_until``; after that ``phi`` is frozen,
        since rebalancing forever can keep the iteration from settling.
    budget_tol : float
        Convergence also requires the x-iterate to satisfy the budget to
        this accuracy.
    """
    if phi <= 0:
        raise ValueError("penalty phi must be positive")
    n = asm.n
    m = 3 * n
    if state is None:
        x0 = np.concatenate([asm.w_tilde, np.zeros(2 * n)])
        state = AdmmState(x0.copy(), x0.copy(), np.zeros(m), phi)
    st = AdmmState(state.x.copy(), state.y.copy(), state.u.copy(), state.phi, state.k)
    history = []
    converged = False
    sqrt_m = math.sqrt(m)
    for it in range(1, max_iter + 1):
        x = x_update(asm, st.y, st.u, st.phi, x0=st.x)
        v = x + st.u
        try:
            y = project_budget(v, asm.cs, projection).y
        except ProjectionError as exc:
            raise SolverError("y-update projection failed", x=x, u=st.u, k=st.k,
                              cause=str(exc)) from exc
        st.u = st.u + x - y
        r = float(np.linalg.norm(x - y))
        s = float(st.phi * np.linalg.norm(y - st.y))
        st.x, st.y, st.k = x, y, st.k + 1
        st.primal_residual, st.dual_residual = r, s
        if keep_history:
            history.append((st.k, r, s, st.phi))
        eps_pri = eps_abs * sqrt_m + eps_rel * max(np.linalg.norm(x), np.linalg.norm(y))
        eps_dual = eps_abs * sqrt_m + eps_rel * st.phi * np.linalg.norm(st.u)
        if (r <= eps_pri and s <= eps_dual
                and abs(budget_residual(x, asm.cs)) <= budget_tol):
            converged = True
            break
        if adaptive and it % adapt_every == 0 and it <= adapt_until:
            if r > 10.0 * s:
                st.phi *= 2.0
                st.u /= 2.0
            elif s > 10.0 * r:
                st.phi /= 2.0
                st.u *= 2.0

    w_star = st.x[:n].copy()
    trade = TradeSplit(st.x[n:2 * n].copy(), st.x[2 * n:].copy())
    cost = executed_cost(asm.cs, trade, "quadratic")
    diag = AdmmDiagnostics(converged, st.k, st.phi, st.primal_residual, st.dual_residual,
                           budget_residual(st.x, asm.cs), history, st)
    return w_star, trade, cost, diag


def solve_qc(u: Universe, cs: CostSpec, w_tilde, gamma: float, **kwargs):
    """Assemble and solve in one call; raises if ADMM does not converge."""
    long_only = kwargs.pop("long_only", True)
    turnover_cap = kwargs.pop("turnover_cap", 1.0)
    asm = assemble_qc(u, cs, w_tilde, gamma, long_only, turnover_cap)
    w, trade, cost, diag = admm_solve(asm, **kwargs)
    if not diag.converged:
        raise SolverError(f"ADMM did not converge in {diag.iterations} iterations",
                          diagnostics=diag)
    return w, trade, cost, diag
