"""Dense convex QP solver for small problems.

Solves::

    min  1/2 x'Qx - x'R
    s.t. Ax = B,  lower <= x <= upper

with a primal active-set method over the bound constraints. Equality
constraints are always kept in the working set and handled through a
null-space basis, which lets ``Q`` be merely positive semi-definite.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

__all__ = ["QpProblem", "QpSolution", "QpStatus", "solve_qp"]

RANK_TOL = 1e-12


class QpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class QpProblem:
    Q: np.ndarray
    R: np.ndarray
    A: np.ndarray | None = None
    B: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_1d(np.asarray(self.R, dtype=float))
        m = self.R.size
        if self.Q.shape != (m, m):
            raise ValueError(f"Q has shape {self.Q.shape}, expected {(m, m)}")
        if self.A is None or np.size(self.A) == 0:
            self.A = np.zeros((0, m))
            self.B = np.zeros(0)
        else:
            self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
            self.B = np.atleast_1d(np.asarray(self.B, dtype=float))
        if self.A.shape[1] != m or self.A.shape[0] != self.B.size:
            raise ValueError("equality constraint dimensions are inconsistent")
        self.lower = (np.full(m, -np.inf) if self.lower is None
                      else np.asarray(self.lower, dtype=float).copy())
        self.upper = (np.full(m, np.inf) if self.upper is None
                      else np.asarray(self.upper, dtype=float).copy())
        if self.lower.shape != (m,) or self.upper.shape != (m,):
            raise ValueError("bounds must be vectors of the problem dimension")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def dim(self) -> int:
        return self.R.size

    def objective(self, x) -> float:
        return float(0.5 * x @ self.Q @ x - x @ self.R)


@dataclass
class QpSolution:
    x: np.ndarray
    objective: float
    status: QpStatus
    kkt_residual: float
    iterations: int = 0
    eq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def ok(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def _reduce_equalities(A, B, tol):
    """Drop redundant rows of ``A``. Returns ``None`` if the rows are inconsistent."""
    p = A.shape[0]
    if p == 0:
        return A, B
    _, r, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = max(np.linalg.norm(A), 1.0)
    rank = int(np.sum(diag > RANK_TOL * scale))
    keep = np.sort(piv[:rank])
    A_k, B_k = A[keep], B[keep]
    if rank < p:
        x_ls = np.linalg.lstsq(A_k, B_k, rcond=None)[0]
        if np.max(np.abs(A @ x_ls - B)) > max(tol, 1e-9) * (1.0 + np.max(np.abs(B))):
            return None
    return A_k, B_k


def _is_feasible(prob, x, tol):
    if x is None or x.shape != (prob.dim,):
        return False
    if np.any(x < prob.lower - tol) or np.any(x > prob.upper + tol):
        return False
    return prob.A.shape[0] == 0 or np.max(np.abs(prob.A @ x - prob.B)) <= tol


def _initial_point(prob, A, B, tol):
    m = prob.dim
    finite = np.isfinite(prob.lower) | np.isfinite(prob.upper)
    if not np.any(finite):
        if A.shape[0] == 0:
            return np.zeros(m)
        return np.linalg.lstsq(A, B, rcond=None)[0]
    bounds = [(lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None)
              for lo, hi in zip(prob.lower, prob.upper)]
    res = linprog(np.zeros(m), A_eq=A if A.shape[0] else None,
                  b_eq=B if A.shape[0] else None, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return np.clip(res.x, prob.lower, prob.upper)


def _working_set(A, at_bound):
    """Pick bound constraints whose normals are independent of ``A``'s rows.

    Candidates are taken greedily in order; a candidate is kept when its unit
    normal has a non-negligible component outside the span of ``A``'s rows and
    of the normals already kept.
    """
    m = A.shape[1]
    at_bound = list(at_bound)
    if A.shape[0] == 0 or not at_bound:
        return at_bound
    rest = np.setdiff1d(np.arange(m), at_bound)
    if rest.size >= A.shape[0] and np.linalg.matrix_rank(A[:, rest]) == A.shape[0]:
        return at_bound
    q, _ = np.linalg.qr(A.T)
    # unit normals with the row space of A projected out
    M = -q @ q[at_bound].T
    M[at_bound, np.arange(len(at_bound))] += 1.0
    if len(at_bound) <= m:
        r = np.linalg.qr(M, mode="r")
        keep = np.abs(np.diag(r)) > 1e-9
        return [i for i, k in zip(at_bound, keep) if k]
    basis, chosen = [], []
    for j, i in enumerate(at_bound):
        e = M[:, j].copy()
        for b in basis:
            e -= (b @ e) * b
        nrm = np.linalg.norm(e)
        if nrm > 1e-9:
            basis.append(e / nrm)
            chosen.append(i)
    return chosen


def _null_space(M, m_free):
    if M.shape[0] == 0:
        return np.eye(m_free)
    return scipy.linalg.null_space(M, rcond=RANK_TOL * max(1.0, np.abs(M).max()))


def solve_qp(prob: QpProblem, tol: float = 1e-9, max_iter: int | None = None,
             x0=None) -> QpSolution:
    """Solve a convex QP with equality constraints and box bounds.

    Parameters
    ----------
    prob : QpProblem
    tol : float
        Tolerance on primal feasibility and on the sign of bound multipliers.
    max_iter : int, optional
        Active-set iterations; defaults to ``10 * m + 100``.
    x0 : array, optional
        Feasible starting point. Ignored if it violates the constraints.
    """
    m = prob.dim
    if max_iter is None:
        max_iter = 10 * m + 100
    reduced = _reduce_equalities(prob.A, prob.B, tol)
    if reduced is None:
        return QpSolution(np.full(m, np.nan), np.nan, QpStatus.INFEASIBLE, np.inf)
    A, B = reduced

    x = np.asarray(x0, dtype=float).copy() if x0 is not None else None
    if not _is_feasible(prob, x, tol):
        x = _initial_point(prob, A, B, tol)
        if x is None:
            return QpSolution(np.full(m, np.nan), np.nan, QpStatus.INFEASIBLE, np.inf)
    x = np.clip(x, prob.lower, prob.upper)

    Q, R, lo, hi = prob.Q, prob.R, prob.lower, prob.upper
    qscale = max(np.abs(Q).max(initial=0.0), 1e-300)
    span = np.where(np.isfinite(hi - lo), hi - lo, np.inf)
    at_lo = np.isfinite(lo) & (x - lo <= 1e-12 * (1 + np.abs(lo)))
    at_hi = np.isfinite(hi) & (hi - x <= 1e-12 * (1 + np.abs(hi))) & ~at_lo
    # fixed variables (lo == hi) are always active
    cand = [i for i in range(m) if span[i] == 0] + \
           [i for i in range(m) if (at_lo[i] or at_hi[i]) and span[i] != 0]
    W = {i: ("l" if at_lo[i] else "u") for i in _working_set(A, cand)}
    for i, side in W.items():
        x[i] = lo[i] if side == "l" else hi[i]

    nu = np.zeros(A.shape[0])
    status = QpStatus.ITERATION_LIMIT
    it = 0
    subspace_min = False
    for it in range(1, max_iter + 1):
        free = np.array([i for i in range(m) if i not in W], dtype=int)
        g = Q @ x - R
        p = np.zeros(m)
        unbounded_dir = False
        if free.size and not subspace_min:
            Z = _null_space(A[:, free], free.size)
            if Z.shape[1]:
                H = Z.T @ Q[np.ix_(free, free)] @ Z
                r = Z.T @ g[free]
                evals, evecs = np.linalg.eigh(0.5 * (H + H.T))
                pos = evals > 1e-11 * qscale
                coef = evecs.T @ r
                flat = ~pos & (np.abs(coef) > 1e-14 * (1 + np.abs(r).max()))
                if np.any(flat):
                    # zero-curvature descent direction: move until a bound blocks
                    z = -evecs[:, flat] @ coef[flat]
                    unbounded_dir = True
                else:
                    z = -evecs[:, pos] @ (coef[pos] / evals[pos])
                p[free] = Z @ z

        if subspace_min or (not unbounded_dir
                            and np.max(np.abs(p)) <= 1e-13 * (1 + np.max(np.abs(x)))):
            subspace_min = False
            # stationary on the working set: check bound multipliers
            if free.size and A.shape[0]:
                nu = np.linalg.lstsq(A[:, free].T, -g[free], rcond=None)[0]
            elif A.shape[0]:
                nu = np.linalg.lstsq(A.T, -g, rcond=None)[0]
            z_all = g + A.T @ nu
            gscale = 1.0 + np.max(np.abs(g))
            worst, worst_i = 0.0, -1
            for i, side in W.items():
                if span[i] == 0:
                    continue
                viol = -z_all[i] if side == "l" else z_all[i]
                if viol > worst:
                    worst, worst_i = viol, i
            if worst <= tol * gscale:
                status = QpStatus.OPTIMAL
                break
            del W[worst_i]
            continue

        # ratio test against the bounds of free variables
        alpha = np.inf if unbounded_dir else 1.0
        block = None
        for i in free:
            if p[i] < 0 and np.isfinite(lo[i]):
                a = (lo[i] - x[i]) / p[i]
                if a < alpha:
                    alpha, block = max(a, 0.0), (i, "l")
            elif p[i] > 0 and np.isfinite(hi[i]):
                a = (hi[i] - x[i]) / p[i]
                if a < alpha:
                    alpha, block = max(a, 0.0), (i, "u")
        if not np.isfinite(alpha):
            raise ValueError("QP is unbounded below along a feasible direction")
        x = x + alpha * p
        if block is not None:
            i, side = block
            x[i] = lo[i] if side == "l" else hi[i]
            W[i] = side
        else:
            subspace_min = True

    x = np.clip(x, lo, hi)
    return QpSolution(x, prob.objective(x), status, _kkt_residual(prob, x, nu, W),
                      it, nu)


def _kkt_residual(prob, x, nu, W):
    """Max of primal infeasibility, stationarity and multiplier sign violation."""
    m = prob.dim
    g = prob.Q @ x - prob.R
    A = prob.A
    if A.shape[0]:
        nu_full = np.linalg.lstsq(A.T, -g, rcond=None)[0] if nu.size != A.shape[0] else nu
        z = g + A.T @ nu_full
        primal = np.max(np.abs(A @ x - prob.B))
    else:
        z = g
        primal = 0.0
    primal = max(primal, np.max(np.maximum(prob.lower - x, 0.0)),
                 np.max(np.maximum(x - prob.upper, 0.0)))
    stat = 0.0
    sign = 0.0
    for i in range(m):
        side = W.get(i)
        if side is None:
            stat = max(stat, abs(z[i]))
        elif prob.lower[i] == prob.upper[i]:
            continue
        elif side == "l":
            sign = max(sign, -z[i])
        else:
            sign = max(sign, z[i])
    return float(max(primal, stat, sign))
