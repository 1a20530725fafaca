"""Target-volatility solves, efficient-frontier sweeps and comparison reports."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .admm import solve_qc
from .linear_cost import SolverError, solve_lc
from .market import (CostSpec, TradeSplit, Universe, cost_linear, cost_quadratic,
                     executed_cost, portfolio_stats, split_trades)
from .qp import QpProblem, solve_qp
from .strict import assemble_strict, solve_strict

__all__ = [
    "MODES",
    "SolveResult",
    "FrontierPoint",
    "TargetUnreachable",
    "normalize",
    "solve_mode",
    "solve_for_target_vol",
    "frontier",
    "default_gamma_grid",
    "efficient_envelope",
    "is_dominated",
    "ComparisonReport",
    "compare_report",
]

log = logging.getLogger(__name__)

MODES = ("mvo", "linear", "quadratic", "strict")
GAMMA_CAP = 2.0**20


class TargetUnreachable(SolverError):
    """The requested volatility lies outside what the mode can reach."""


def normalize(w) -> np.ndarray:
    """Rescale weights to sum to one."""
    w = np.asarray(w, dtype=float)
    total = w.sum()
    if total <= 1e-9:
        raise ValueError(f"cannot normalize a portfolio with wealth {total:.3e}")
    return w / total


@dataclass
class SolveResult:
    w_star: np.ndarray
    trade: TradeSplit
    cost_paid: float
    gamma: float | None
    mode: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def wealth(self) -> float:
        return float(self.w_star.sum())


def solve_mode(mode: str, u: Universe, cs: CostSpec, w_tilde, gamma: float,
               solver: dict | None = None, warm=None) -> SolveResult:
    """Single gamma-form solve in one of ``mvo``, ``linear`` or ``quadratic`` mode.

    ``linear`` uses only the unit costs of ``cs``; ``mvo`` ignores costs.
    """
    solver = dict(solver or {})
    w_tilde = np.asarray(w_tilde, dtype=float)
    n = u.n
    if mode == "mvo":
        qp = QpProblem(u.cov, gamma * u.mu, np.ones((1, n)), [1.0], np.zeros(n), np.ones(n))
        sol = solve_qp(qp, tol=solver.get("qp_tol", 1e-9), x0=warm)
        if not sol.ok:
            raise SolverError(f"Markowitz QP failed: {sol.status.value}")
        w = sol.x
        return SolveResult(w, split_trades(w, w_tilde), 0.0, gamma, mode,
                           {"iterations": sol.iterations, "kkt_residual": sol.kkt_residual})
    if mode == "linear":
        w, trade, cost, sol = solve_lc(u, cs.linear_part(), w_tilde, gamma,
                                       tol=solver.get("qp_tol", 1e-9), return_qp=True)
        return SolveResult(w, trade, cost, gamma, mode,
                           {"iterations": sol.iterations, "kkt_residual": sol.kkt_residual})
    if mode == "quadratic":
        kw = {k: solver[k] for k in ("phi", "eps_abs", "eps_rel", "max_iter", "adaptive",
                                     "budget_tol", "projection", "adapt_every",
                                     "adapt_until") if k in solver}
        if warm is not None:
            kw["state"] = warm
        w, trade, cost, diag = solve_qc(u, cs, w_tilde, gamma, **kw)
        d = diag.to_dict()
        if not solver.get("keep_history"):
            d.pop("history")
        d["state"] = diag.state
        return SolveResult(w, trade, cost, gamma, mode, d)
    raise ValueError(f"mode {mode!r} has no gamma form; expected one of mvo/linear/quadratic")


def _vol(u, w):
    return portfolio_stats(u, w)[1]


def solve_for_target_vol(mode: str, u: Universe, cs: CostSpec, w_tilde, sigma_target: float,
                         tol: float = 1e-4, solver: dict | None = None) -> SolveResult:
    """Find the gamma whose optimum has volatility ``sigma_target``.

    Bisection on gamma over ``[0, gamma_hi]``; ``gamma_hi`` starts at 1 and
    doubles until the volatility passes the target (capped at ``2**20``).
    ``strict`` mode solves the exact-volatility problem directly instead.
    """
    if mode == "strict":
        sv = dict(solver or {})
        asm = assemble_strict(u, cs, w_tilde, sigma_target)
        w, trade, status = solve_strict(asm, **{k: sv[k] for k in ("tol", "max_iter", "starts",
                                                                   "seed", "phi") if k in sv})
        if not status.success:
            raise SolverError("strict problem did not reach a feasible point", status=status)
        return SolveResult(w, trade, executed_cost(cs, trade, "quadratic"), None, mode,
                           {"status": status})
    mono_slack = 2.0 * max((solver or {}).get("qp_tol", 1e-9), 1e-6)
    cache: dict[float, SolveResult] = {}
    last = [None]

    def at(g):
        if g not in cache:
            warm = None
            if mode == "quadratic" and last[0] is not None:
                warm = last[0].diagnostics.get("state")
            cache[g] = solve_mode(mode, u, cs, w_tilde, g, solver, warm=warm)
            last[0] = cache[g]
        return cache[g]

    lo_res = at(0.0)
    if _vol(u, lo_res.w_star) >= sigma_target - tol:
        if _vol(u, lo_res.w_star) > sigma_target + tol:
            raise TargetUnreachable(
                f"target {sigma_target:.6g} is below the lowest reachable volatility "
                f"{_vol(u, lo_res.w_star):.6g}", min_vol=_vol(u, lo_res.w_star))
        return lo_res
    lo, hi = 0.0, 1.0
    prev_vol = _vol(u, lo_res.w_star)
    while True:
        try:
            hv = _vol(u, at(hi).w_star)
        except SolverError as exc:
            if hi <= 1.0:
                raise
            # the solver gives out as gamma grows: the frontier has stalled
            raise TargetUnreachable(
                f"target {sigma_target:.6g} not reached; {mode} solves stop converging "
                f"beyond gamma={lo:.6g} at volatility {prev_vol:.6g}",
                max_vol=prev_vol) from exc
        if hv < prev_vol - mono_slack:
            raise SolverError(f"volatility decreased in gamma ({prev_vol:.6g} -> {hv:.6g})")
        if hv >= sigma_target:
            break
        # sigma(gamma) flattens like 1/gamma, so the remaining rise after a
        # doubling is about the last increment; a 4x margin guards the guess
        stalled = hi >= 64.0 and hv + 4.0 * (hv - prev_vol) < sigma_target - tol
        if hi >= GAMMA_CAP or stalled:
            raise TargetUnreachable(
                f"target {sigma_target:.6g} is above the highest reachable volatility "
                f"{hv:.6g} in {mode} mode", max_vol=hv)
        lo, prev_vol = hi, hv
        hi *= 2.0
    lo_vol = _vol(u, at(lo).w_star)
    hi_vol = _vol(u, at(hi).w_star)
    best = at(hi)
    flo, fhi = lo_vol - sigma_target, hi_vol - sigma_target
    moved = 0
    for _ in range(200):
        # Illinois false position on sigma(gamma); falls back to bisection
        # when the interpolant lands too close to an end of the bracket
        width = hi - lo
        mid = lo - flo * width / (fhi - flo) if fhi != flo else 0.5 * (lo + hi)
        if not (lo + 1e-3 * width < mid < hi - 1e-3 * width):
            mid = 0.5 * (lo + hi)
        res = at(mid)
        v = _vol(u, res.w_star)
        if v < lo_vol - mono_slack or v > hi_vol + mono_slack:
            raise SolverError(f"volatility is not monotone in gamma near {mid:.6g}")
        if abs(v - sigma_target) < abs(_vol(u, best.w_star) - sigma_target):
            best = res
        if abs(v - sigma_target) <= tol:
            return res
        if v < sigma_target:
            lo, lo_vol, flo = mid, v, v - sigma_target
            if moved == -1:
                fhi *= 0.5
            moved = -1
        else:
            hi, hi_vol, fhi = mid, v, v - sigma_target
            if moved == 1:
                flo *= 0.5
            moved = 1
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    if abs(_vol(u, best.w_star) - sigma_target) <= tol:
        return best
    raise TargetUnreachable(f"gamma bisection stalled at volatility {_vol(u, best.w_star):.6g}",
                            max_vol=hi_vol)


@dataclass
class FrontierPoint:
    gamma: float | None
    sigma_bar: float
    mu_gross: float
    cost_paid: float
    mu_net: float
    wealth: float
    weights_raw: np.ndarray
    weights_norm: np.ndarray
    sigma_target: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _point(u, cs, w_tilde, res: SolveResult, rebalances, normalize_net, sigma_target=None):
    w = res.w_star
    wn = normalize(w)
    sigma_bar = _vol(u, wn)
    cost = res.cost_paid
    gross = portfolio_stats(u, wn if normalize_net else w)[0]
    return FrontierPoint(res.gamma, sigma_bar, gross, cost, gross - rebalances * cost,
                         float(w.sum()), w, wn, sigma_target)


def _failed(gamma, n, msg, sigma_target=None):
    nan = float("nan")
    return FrontierPoint(gamma, nan, nan, nan, nan, nan, np.full(n, nan), np.full(n, nan),
                         sigma_target, msg)


def default_gamma_grid(count: int = 100, lo: float = 1e-3, hi: float = 1e2) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), count)


def frontier(mode: str, u: Universe, cs: CostSpec, w_tilde, grid=None,
             rebalances_per_year: int = 1, *, grid_kind: str = "gamma",
             normalize_net: bool = False, solver: dict | None = None) -> list[FrontierPoint]:
    """Sweep a grid of gammas (or volatility targets) and collect frontier points.

    ``mu_net = mu_gross - rebalances_per_year * cost_paid`` where the cost is
    that of the raw trade. ``mu_gross`` is the return of the raw optimum, or of
    the normalized optimum when ``normalize_net`` is set. Failed points carry
    an ``error`` message and NaN statistics; the sweep continues past them.
    """
    if rebalances_per_year < 1 or int(rebalances_per_year) != rebalances_per_year:
        raise ValueError("rebalances_per_year must be an integer >= 1")
    if grid is None:
        grid = default_gamma_grid()
    grid = list(np.atleast_1d(np.asarray(grid, dtype=float)))
    if not grid:
        raise ValueError("frontier grid is empty")
    if mode == "strict" and grid_kind != "sigma":
        raise ValueError("strict mode sweeps volatility targets; use grid_kind='sigma'")
    points = []
    warm = None
    for g in grid:
        try:
            if grid_kind == "gamma":
                res = solve_mode(mode, u, cs, w_tilde, g, solver, warm=warm)
                if mode == "quadratic":
                    warm = res.diagnostics.get("state")
                points.append(_point(u, cs, w_tilde, res, rebalances_per_year, normalize_net))
            elif grid_kind == "sigma":
                res = solve_for_target_vol(mode, u, cs, w_tilde, g,
                                           tol=(solver or {}).get("vol_tol", 1e-4),
                                           solver=solver)
                points.append(_point(u, cs, w_tilde, res, rebalances_per_year, normalize_net, g))
            else:
                raise ValueError(f"unknown grid kind {grid_kind!r}")
        except (SolverError, ArithmeticError) as exc:
            log.warning("frontier point %s=%g failed: %s", grid_kind, g, exc)
            gamma = g if grid_kind == "gamma" else None
            sigma = g if grid_kind == "sigma" else None
            points.append(_failed(gamma, u.n, str(exc), sigma))
    ok = sorted((p for p in points if p.ok), key=lambda p: (p.sigma_bar, p.gamma or 0.0))
    return ok + [p for p in points if not p.ok]


def efficient_envelope(points) -> list[FrontierPoint]:
    """Points not dominated in (lower sigma_bar, higher mu_net), sorted by sigma_bar."""
    pts = sorted((p for p in points if p.ok), key=lambda p: (p.sigma_bar, -p.mu_net))
    env, best = [], -math.inf
    for p in pts:
        if p.mu_net > best:
            env.append(p)
            best = p.mu_net
    return env


def is_dominated(sigma_bar: float, mu_net: float, envelope) -> bool:
    """True when some envelope point has no more risk and strictly more net return."""
    return any(p.sigma_bar <= sigma_bar and p.mu_net > mu_net for p in envelope)


@dataclass
class ComparisonReport:
    """Side-by-side portfolios with their returns, volatilities and costs."""

    names: tuple[str, ...]
    columns: dict[str, np.ndarray]
    stats: dict[str, dict[str, float | None]]
    gammas: dict[str, float | None]

    STAT_ROWS = ("mu", "sigma", "cost_linear", "cost_quadratic", "net_linear", "net_quadratic")
    STAT_LABELS = {"mu": "mu(w)", "sigma": "sigma(w)", "cost_linear": "C_LC(w|w~)",
                   "cost_quadratic": "C_QC(w|w~)", "net_linear": "mu_LC(w|w~)",
                   "net_quadratic": "mu_QC(w|w~)"}

    def to_dict(self) -> dict:
        return {
            "assets": list(self.names),
            "weights": {k: v.tolist() for k, v in self.columns.items()},
            "stats": self.stats,
            "gammas": self.gammas,
        }

    def format(self, decimals: int = 2) -> str:
        """Plain-text table in percent."""
        cols = list(self.columns)
        width = max(12, max(len(c) for c in cols) + 2)
        label_w = max(len(s) for s in self.STAT_LABELS.values()) + 2
        head = "asset".ljust(label_w) + "".join(c.rjust(width) for c in cols)
        lines = [head, "-" * len(head)]
        for i, name in enumerate(self.names):
            lines.append(name.ljust(label_w)
                         + "".join(f"{100 * self.columns[c][i]:.{decimals}f}".rjust(width)
                                   for c in cols))
        lines.append("-" * len(head))
        for row in self.STAT_ROWS:
            cells = []
            for c in cols:
                v = self.stats[c].get(row)
                cells.append(("" if v is None else f"{100 * v:.{decimals}f}").rjust(width))
            lines.append(self.STAT_LABELS[row].ljust(label_w) + "".join(cells))
        return "\n".join(lines)


def compare_report(u: Universe, cs: CostSpec, w_tilde, sigma_target: float,
                   tol: float = 1e-6, solver: dict | None = None) -> ComparisonReport:
    """Current portfolio against the cost-blind, linear-cost and quadratic-cost optima.

    Each optimum is tuned to ``sigma_target`` by gamma bisection. Cost rows
    use the unit costs alone (linear) or the full spec (quadratic); the net
    rows are ``mu(w) - C(w|w_tilde)`` on raw weights.
    """
    w_tilde = np.asarray(w_tilde, dtype=float)
    lin = cs.linear_part()
    res = {m: solve_for_target_vol(m, u, cs, w_tilde, sigma_target, tol=tol, solver=solver)
           for m in ("mvo", "linear", "quadratic")}
    columns = {
        "w_tilde": w_tilde,
        "w_MVO": res["mvo"].w_star,
        "w_LC": res["linear"].w_star,
        "w_QC": res["quadratic"].w_star,
        "w_bar_LC": normalize(res["linear"].w_star),
        "w_bar_QC": normalize(res["quadratic"].w_star),
    }
    stats: dict[str, dict[str, float | None]] = {}
    for name, w in columns.items():
        mu_w, sig_w = portfolio_stats(u, w)
        row: dict[str, float | None] = {"mu": mu_w, "sigma": sig_w}
        if name.startswith("w_bar"):
            row.update(dict.fromkeys(("cost_linear", "cost_quadratic", "net_linear",
                                      "net_quadratic")))
        else:
            cl = cost_linear(lin, w, w_tilde)
            cq = cost_quadratic(cs, w, w_tilde)
            is_current = name == "w_tilde"
            row.update({"cost_linear": None if is_current else cl,
                        "cost_quadratic": None if is_current else cq,
                        "net_linear": mu_w - cl, "net_quadratic": mu_w - cq})
        stats[name] = row
    gammas = {"w_MVO": res["mvo"].gamma, "w_LC": res["linear"].gamma,
              "w_QC": res["quadratic"].gamma}
    return ComparisonReport(u.names, columns, stats, gammas)
