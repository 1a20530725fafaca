"""Maximum net return at an exact volatility under quadratic costs.

Two quadratic equalities (the budget and ``w'Sigma w = sigma*^2``) make this
a non-convex QCQP. It is split three ways: a QP over the linear constraints,
a projection onto the budget surface and a projection onto the variance
ellipsoid, tied together by consensus duals. Solutions are local; the
returned status certifies feasibility, not global optimality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linear_cost import SolverError, stacked_bounds, trade_identity
from .market import CostSpec, TradeSplit, Universe, cost_quadratic, portfolio_stats
from .projection import ProjectionError, budget_residual, project_budget
from .qp import QpProblem, solve_qp

__all__ = ["StrictAssembly", "StrictStatus", "SphereProjection", "assemble_strict",
           "attainable_vol_range", "project_variance_sphere", "solve_strict"]


@dataclass
class StrictAssembly:
    Q: np.ndarray
    R: np.ndarray
    A1: np.ndarray
    B1: float
    A2: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C3: np.ndarray
    B3: float
    lower: np.ndarray
    upper: np.ndarray
    cs: CostSpec
    universe: Universe
    w_tilde: np.ndarray

    @property
    def n(self) -> int:
        return self.w_tilde.size

    def objective(self, x) -> float:
        """``-x'R + x'Qx``, i.e. minus the net return for a split-consistent x."""
        return float(-x @ self.R + x @ self.Q @ x)


@dataclass
class StrictStatus:
    success: bool
    objective: float
    budget_residual: float
    variance_residual: float
    trade_residual: float
    bound_violation: float
    iterations: int
    start: int


class SphereProjection(NamedTuple):
    y: np.ndarray
    lam: float
    degenerate: bool


def attainable_vol_range(u: Universe) -> tuple[float, float]:
    """Long-only fully-invested volatility range: (min-variance vol, max asset vol)."""
    n = u.n
    sol = solve_qp(QpProblem(u.cov, np.zeros(n), np.ones((1, n)), [1.0],
                             np.zeros(n), np.ones(n)))
    return portfolio_stats(u, sol.x)[1], float(np.max(u.sigma_vols))


def assemble_strict(u: Universe, cs: CostSpec, w_tilde, sigma_star: float,
                    check_range: bool = True) -> StrictAssembly:
    n = u.n
    if sigma_star <= 0:
        raise ValueError("target volatility must be positive")
    if cs.n != n:
        raise ValueError(f"cost spec covers {cs.n} assets, universe has {n}")
    w_tilde = np.atleast_1d(np.asarray(w_tilde, dtype=float))
    if w_tilde.shape != (n,):
        raise ValueError(f"current portfolio has length {w_tilde.size}, expected {n}")
    if check_range:
        lo, hi = attainable_vol_range(u)
        if not (lo - 1e-12 <= sigma_star <= hi + 1e-12):
            raise ValueError(f"target volatility {sigma_star:.6g} outside attainable "
                             f"range [{lo:.6g}, {hi:.6g}]")
    deltas = np.concatenate([np.zeros(n), cs.delta_minus, cs.delta_plus])
    Q = np.diag(deltas)
    R = np.concatenate([u.mu, -cs.c_minus, -cs.c_plus])
    A1 = np.concatenate([np.ones(n), cs.c_minus, cs.c_plus])
    A2, B2 = trade_identity(n, w_tilde)
    C3 = np.zeros((3 * n, 3 * n))
    C3[:n, :n] = u.cov
    lower, upper = stacked_bounds(w_tilde)
    return StrictAssembly(Q, R, A1, 1.0, A2, B2, np.diag(deltas), C3, sigma_star**2,
                          lower, upper, cs, u, w_tilde)


def _block_eig(C3):
    """Eigen-decomposition of the non-zero leading block of ``C3``."""
    nz = np.flatnonzero(np.any(C3 != 0, axis=0) | np.any(C3 != 0, axis=1))
    k = int(nz.max()) + 1 if nz.size else 0
    lam, U = np.linalg.eigh(C3[:k, :k])
    return k, np.maximum(lam, 0.0), U


def project_variance_sphere(v, C3, B3: float, tol: float = 1e-14,
                            _eig=None) -> SphereProjection:
    """Nearest point to ``v`` with ``x'C3 x = B3``.

    Only the leading block of ``C3`` (the covariance) is non-zero, so only
    those components move: ``y = (I + 2 lam Sigma)^-1 v`` with ``lam`` found
    by bisection on the decreasing secular function.
    """
    v = np.asarray(v, dtype=float)
    if B3 <= 0:
        raise ValueError("B3 must be positive")
    k, evals, U = _eig if _eig is not None else _block_eig(np.asarray(C3, dtype=float))
    if k == 0 or evals[-1] <= 0:
        raise ValueError("C3 has no positive curvature; the surface is empty")
    y = v.copy()
    a = U.T @ v[:k]
    top = evals[-1]
    lam_min = -1.0 / (2.0 * top)

    def g(lam):
        return float(np.sum(evals * a**2 / (1.0 + 2.0 * lam * evals) ** 2))

    scale = max(1.0, np.max(np.abs(a)))
    if np.all(np.abs(a) <= 1e-300 * scale) or not np.any(a):
        # centre of the ellipsoid: every boundary point along the top axis is nearest
        e = U[:, -1] * (1.0 if U[np.argmax(np.abs(U[:, -1])), -1] > 0 else -1.0)
        y[:k] = e * math.sqrt(B3 / top)
        return SphereProjection(y, lam_min, True)

    top_mask = evals >= top * (1.0 - 1e-12)
    if np.all(a[top_mask] == 0.0):
        # hard case: the secular function stays finite at the pole
        rest = ~top_mask
        at_pole = float(np.sum(evals[rest] * a[rest] ** 2
                               / (1.0 + 2.0 * lam_min * evals[rest]) ** 2))
        if at_pole <= B3:
            coords = np.zeros(k)
            coords[rest] = a[rest] / (1.0 + 2.0 * lam_min * evals[rest])
            coords[np.flatnonzero(top_mask)[-1]] = math.sqrt((B3 - at_pole) / top)
            y[:k] = U @ coords
            return SphereProjection(y, lam_min, True)

    g0 = g(0.0)
    if g0 == B3:
        return SphereProjection(y, 0.0, False)
    if g0 > B3:
        lo, hi = 0.0, 1.0
        while g(hi) > B3:
            lo, hi = hi, 2.0 * hi
            if hi > 1e300:
                raise ValueError("could not bracket the variance multiplier")
    else:
        hi, gap = 0.0, -lam_min
        while True:
            gap *= 0.5
            lo = lam_min + gap
            if g(lo) > B3:
                break
            hi = lo
            if gap < 1e-300:
                raise ValueError("could not bracket the variance multiplier")
    lam = 0.5 * (lo + hi)
    for _ in range(300):
        lam = 0.5 * (lo + hi)
        gl = g(lam)
        if abs(gl - B3) <= tol * max(B3, 1e-300) or hi - lo <= 4e-16 * (1 + abs(lam)):
            break
        if gl > B3:
            lo = lam
        else:
            hi = lam
    y[:k] = U @ (a / (1.0 + 2.0 * lam * evals))
    return SphereProjection(y, lam, False)


def _starts(asm: StrictAssembly, count: int, seed: int):
    n = asm.n
    wt = asm.w_tilde
    targets = [wt, np.full(n, 1.0 / n)]
    rng = np.random.default_rng(seed)
    while len(targets) < count:
        targets.append(rng.dirichlet(np.ones(n)))
    out = []
    for w in targets[:count]:
        out.append(np.concatenate([w, np.maximum(wt - w, 0.0), np.maximum(w - wt, 0.0)]))
    return out


def _run(asm, x0, phi, tol, max_iter, eig):
    n = asm.n
    m = 3 * n
    x, y, z = x0.copy(), x0.copy(), x0.copy()
    u1, u2 = np.zeros(m), np.zeros(m)
    H = 2.0 * asm.Q
    sqrt_m = math.sqrt(m)
    k = 0
    for k in range(1, max_iter + 1):
        qp = QpProblem(H + 2.0 * phi * np.eye(m), asm.R + phi * (y - u1) + phi * (z - u2),
                       asm.A2, asm.B2, asm.lower, asm.upper)
        sol = solve_qp(qp, x0=x)
        if not sol.ok:
            raise SolverError(f"strict x-update failed: {sol.status.value}")
        x = sol.x
        y_new = project_budget(x + u1, asm.cs).y
        z_new = project_variance_sphere(x + u2, asm.C3, asm.B3, _eig=eig).y
        u1 += x - y_new
        u2 += x - z_new
        r = max(np.linalg.norm(x - y_new), np.linalg.norm(x - z_new))
        s = phi * max(np.linalg.norm(y_new - y), np.linalg.norm(z_new - z))
        y, z = y_new, z_new
        bres = abs(budget_residual(x, asm.cs))
        vres = abs(float(x @ asm.C3 @ x) - asm.B3)
        if (r <= tol * sqrt_m and s <= tol * sqrt_m * max(1.0, phi * np.linalg.norm(u1))
                and bres <= 1e-8 and vres <= 1e-10):
            break
    return x, k


def solve_strict(asm: StrictAssembly, tol: float = 1e-8, max_iter: int = 5000,
                 starts: int = 5, seed: int = 0, phi: float = 1.0,
                 feas_tol: float = 1e-6):
    """Multi-start consensus ADMM for the strict volatility problem.

    The penalty ``phi`` stays fixed: residual balancing makes the
    three-block iteration cycle on this non-convex problem.

    Returns ``(w_star, trade, status)``. ``status.success`` means both
    quadratic equalities hold within ``feas_tol``; among feasible runs the
    one with the best net return is kept.
    """
    eig = _block_eig(asm.C3)
    best = None
    for i, x0 in enumerate(_starts(asm, starts, seed)):
        try:
            x, iters = _run(asm, x0, phi, tol, max_iter, eig)
        except (SolverError, ProjectionError, ValueError):
            continue
        st = _status(asm, x, iters, i, feas_tol)
        key = (not st.success, st.objective if st.success
               else st.budget_residual + st.variance_residual)
        if best is None or key < best[0]:
            best = (key, x, st)
    if best is None:
        raise SolverError("every strict-problem start failed")
    _, x, st = best
    n = asm.n
    return x[:n].copy(), TradeSplit(x[n:2 * n].copy(), x[2 * n:].copy()), st


def _status(asm, x, iters, start, feas_tol):
    n = asm.n
    w = x[:n]
    bres = abs(w.sum() + cost_quadratic(asm.cs, w, asm.w_tilde) - 1.0)
    bres = max(bres, abs(budget_residual(x, asm.cs)))
    vres = abs(float(w @ asm.universe.cov @ w) - asm.B3)
    tres = float(np.max(np.abs(asm.A2 @ x - asm.B2)))
    bviol = float(max(np.max(asm.lower - x), np.max(x - asm.upper), 0.0))
    ok = bres <= feas_tol and vres <= feas_tol and tres <= 1e-8 and bviol <= 1e-6
    return StrictStatus(ok, asm.objective(x), bres, vres, tres, bviol, iters, start)
