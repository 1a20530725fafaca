"""Euclidean projection onto the quadratic budget surface.

The surface is ``A1 y + y'C1 y = 1`` with ``y = (w, dw_minus, dw_plus)``,
``A1 = (1, c_minus, c_plus)`` and ``C1 = diag(0, delta_minus, delta_plus)``.
Stationarity gives ``y(lam) = (I + 2 lam C1)^-1 (v - lam A1')`` and the
multiplier solves a scalar equation. Two routes are provided:

* :func:`project_homogeneous` for slopes shared by all assets, where the
  scalar equation clears to a degree-5 polynomial;
* :func:`project_general` for arbitrary slopes, by bisection on the
  rational secular function, which is decreasing wherever
  ``I + 2 lam C1`` is positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .market import CostSpec

__all__ = [
    "ProjectionInput",
    "ProjectionResult",
    "ProjectionError",
    "budget_residual",
    "quintic_coefficients",
    "real_roots",
    "secular_residual",
    "project_homogeneous",
    "project_general",
    "project_budget",
]

POLE_TOL = 1e-12
FEAS_TOL = 1e-10


class ProjectionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ProjectionInput:
    """Point ``v_y = (v, dv_minus, dv_plus)`` to project, plus the costs."""

    v: np.ndarray
    dv_minus: np.ndarray
    dv_plus: np.ndarray
    cs: CostSpec

    def __post_init__(self):
        for name in ("v", "dv_minus", "dv_plus"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        n = self.v.size
        if self.dv_minus.size != n or self.dv_plus.size != n or self.cs.n != n:
            raise ValueError("projection input blocks must all have the same length")

    @classmethod
    def from_stacked(cls, vy, cs: CostSpec) -> "ProjectionInput":
        vy = np.asarray(vy, dtype=float)
        n = cs.n
        if vy.shape != (3 * n,):
            raise ValueError(f"stacked vector has shape {vy.shape}, expected {(3 * n,)}")
        return cls(vy[:n], vy[n:2 * n], vy[2 * n:], cs)

    @property
    def n(self) -> int:
        return self.v.size

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.v, self.dv_minus, self.dv_plus])


@dataclass
class ProjectionResult:
    y: np.ndarray
    lam: float
    distance: float
    candidates_considered: int = 1


def budget_residual(y, cs: CostSpec) -> float:
    """``A1 y + y'C1 y - 1`` for a stacked vector ``y``."""
    y = np.asarray(y, dtype=float)
    n = cs.n
    w, dm, dp = y[:n], y[n:2 * n], y[2 * n:]
    return float(w.sum() + dm @ (cs.c_minus + cs.delta_minus * dm)
                 + dp @ (cs.c_plus + cs.delta_plus * dp) - 1.0)


def _reconstruct(lam, p: ProjectionInput):
    cs = p.cs
    w = p.v - lam
    dm = (p.dv_minus - lam * cs.c_minus) / (1.0 + 2.0 * lam * cs.delta_minus)
    dp = (p.dv_plus - lam * cs.c_plus) / (1.0 + 2.0 * lam * cs.delta_plus)
    return np.concatenate([w, dm, dp])


def quintic_coefficients(p: ProjectionInput) -> np.ndarray:
    """Coefficients ``alpha_0 .. alpha_5`` (ascending powers of the multiplier).

    The polynomial is the secular function multiplied by
    ``(1 + 2 lam d-)^2 (1 + 2 lam d+)^2``. Requires shared slopes.
    """
    cs = p.cs
    if not cs.is_homogeneous:
        raise ValueError("quintic route needs identical delta_minus and delta_plus across assets")
    n = p.n
    a, b = float(cs.delta_minus[0]), float(cs.delta_plus[0])
    sv = p.v.sum() - 1.0
    cm_dv = cs.c_minus @ p.dv_minus
    cp_dv = cs.c_plus @ p.dv_plus
    cm2 = cs.c_minus @ cs.c_minus
    cp2 = cs.c_plus @ cs.c_plus
    dvm2 = p.dv_minus @ p.dv_minus
    dvp2 = p.dv_plus @ p.dv_plus

    # leading term comes from -n lam (l-)^2 (l+)^2, hence the negative sign
    a5 = -16.0 * n * a**2 * b**2
    a4 = (16.0 * a**2 * b**2 * sv - 16.0 * n * a * b * (a + b)
          - 4.0 * a * b * (b * cm2 + a * cp2))
    a3 = (16.0 * a * b * (a + b) * sv - 4.0 * n * (a**2 + 4.0 * a * b + b**2)
          - 4.0 * (a + b) * (b * cm2 + a * cp2))
    a2 = (4.0 * (a**2 + 4.0 * a * b + b**2) * sv - 4.0 * n * (a + b)
          + 4.0 * (b**2 * cm_dv + a**2 * cp_dv)
          - (a + 4.0 * b) * cm2 - (4.0 * a + b) * cp2
          + 4.0 * a * b * (b * dvm2 + a * dvp2))
    a1 = (4.0 * (a + b) * sv - n + 4.0 * (b * cm_dv + a * cp_dv)
          - (cm2 + cp2) + 4.0 * a * b * (dvm2 + dvp2))
    a0 = sv + (cm_dv + cp_dv) + (a * dvm2 + b * dvp2)
    return np.array([a0, a1, a2, a3, a4, a5])


def real_roots(coeffs, imag_tol: float = 1e-8) -> list[float]:
    """Real roots of a polynomial given in ascending coefficient order.

    Leading coefficients below ``1e-14 * max|c|`` are dropped, so the degree
    degrades gracefully. Roots come from the companion matrix, are polished
    by Newton steps and returned sorted with near-duplicates merged.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if c.size == 0 or not np.any(c):
        raise ValueError("zero polynomial has no well-defined roots")
    big = np.max(np.abs(c))
    while c.size > 1 and abs(c[-1]) <= 1e-14 * big:
        c = c[:-1]
    if c.size == 1:
        return []
    if c.size == 2:
        return [-c[0] / c[1]]
    z = np.linalg.eigvals(P.polycompanion(c))
    dc = P.polyder(c)
    roots = []
    for r in z:
        if abs(r.imag) > imag_tol * (1.0 + abs(r.real)):
            continue
        x = r.real
        for _ in range(3):
            f, df = P.polyval(x, c), P.polyval(x, dc)
            if df == 0.0:
                break
            step = f / df
            # reject steps that would hop to another root
            if abs(step) > 1e-3 * (1.0 + abs(x)):
                break
            x -= step
        roots.append(x)
    roots.sort()
    merged: list[float] = []
    for x in roots:
        if merged and abs(x - merged[-1]) <= 1e-6 * (1.0 + abs(x)):
            continue
        merged.append(x)
    return merged


def _pole_bound(cs: CostSpec) -> float:
    dmax = max(np.max(cs.delta_minus), np.max(cs.delta_plus))
    return -np.inf if dmax <= 0 else -1.0 / (2.0 * dmax)


def secular_residual(lam: float, p: ProjectionInput) -> float:
    """Budget residual of ``y(lam)``; decreasing on ``lam > -1/(2 max delta)``."""
    cs = p.cs
    dm_den = 1.0 + 2.0 * lam * cs.delta_minus
    dp_den = 1.0 + 2.0 * lam * cs.delta_plus
    if np.any(np.abs(dm_den) < POLE_TOL) or np.any(np.abs(dp_den) < POLE_TOL):
        raise ProjectionError(f"multiplier {lam!r} sits on a pole of the secular function")
    um = p.dv_minus - lam * cs.c_minus
    up = p.dv_plus - lam * cs.c_plus
    return float(np.sum(p.v - lam)
                 + np.sum(cs.c_minus * um / dm_den) + np.sum(cs.c_plus * up / dp_den)
                 + np.sum(cs.delta_minus * um**2 / dm_den**2)
                 + np.sum(cs.delta_plus * up**2 / dp_den**2) - 1.0)


def _secular_with_slope(lam, p):
    cs = p.cs
    dm_den = 1.0 + 2.0 * lam * cs.delta_minus
    dp_den = 1.0 + 2.0 * lam * cs.delta_plus
    um = p.dv_minus - lam * cs.c_minus
    up = p.dv_plus - lam * cs.c_plus
    f = (np.sum(p.v - lam) + np.sum(cs.c_minus * um / dm_den) + np.sum(cs.c_plus * up / dp_den)
         + np.sum(cs.delta_minus * um**2 / dm_den**2) + np.sum(cs.delta_plus * up**2 / dp_den**2)
         - 1.0)
    df = (-p.n
          - np.sum((cs.c_minus**2 * dm_den + 2.0 * cs.delta_minus * cs.c_minus * um) / dm_den**2)
          - np.sum((cs.c_plus**2 * dp_den + 2.0 * cs.delta_plus * cs.c_plus * up) / dp_den**2)
          - np.sum(cs.delta_minus * (2.0 * um * cs.c_minus * dm_den
                                     + 4.0 * cs.delta_minus * um**2) / dm_den**3)
          - np.sum(cs.delta_plus * (2.0 * up * cs.c_plus * dp_den
                                    + 4.0 * cs.delta_plus * up**2) / dp_den**3))
    return float(f), float(df)


def _result(lam, p, count=1):
    y = _reconstruct(lam, p)
    return ProjectionResult(y, float(lam), 0.5 * float(np.sum((y - p.stacked) ** 2)), count)


def project_homogeneous(p: ProjectionInput) -> ProjectionResult:
    """Project through the real roots of the quintic, keeping the closest point."""
    alpha = quintic_coefficients(p)
    if not np.any(alpha):
        # v_y on the surface with every term vanishing identically
        return _result(0.0, p, 0)
    roots = real_roots(alpha)
    cs = p.cs
    best = None
    scale = 1.0 + np.sum(np.abs(p.stacked))
    for lam in roots:
        if (np.any(np.abs(1.0 + 2.0 * lam * cs.delta_minus) < POLE_TOL)
                or np.any(np.abs(1.0 + 2.0 * lam * cs.delta_plus) < POLE_TOL)):
            continue
        lam = _newton_secular(lam, p)
        cand = _result(lam, p)
        if abs(budget_residual(cand.y, cs)) > FEAS_TOL * scale:
            continue
        if (best is None or cand.distance < best.distance - 1e-12
                or (abs(cand.distance - best.distance) <= 1e-12 and abs(lam) < abs(best.lam))):
            best = cand
    if best is None:
        raise ProjectionError("no real root of the quintic gives a point on the budget surface",
                              alpha, roots)
    best.candidates_considered = len(roots)
    return best


def _newton_secular(lam, p, steps=4):
    """A few safeguarded Newton steps on the rational form of the residual."""
    for _ in range(steps):
        f, df = _secular_with_slope(lam, p)
        if abs(f) <= 1e-15 or df == 0.0 or not np.isfinite(df):
            break
        step = f / df
        if abs(step) > 1e-4 * (1.0 + abs(lam)):
            break
        lam -= step
    return lam


def project_general(p: ProjectionInput, tol: float = 1e-12,
                    max_doublings: int = 200) -> ProjectionResult:
    """Project by bisection on the secular equation (any non-negative slopes)."""
    lam_min = _pole_bound(p.cs)
    f0 = secular_residual(0.0, p)
    if f0 == 0.0:
        return _result(0.0, p)
    if f0 > 0.0:
        lo, hi = 0.0, 1.0
        for _ in range(max_doublings):
            if secular_residual(hi, p) < 0.0:
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise ProjectionError("could not bracket the multiplier from above")
    else:
        hi = 0.0
        if np.isfinite(lam_min):
            # walk towards the pole; the residual blows up there unless the
            # numerators vanish (degenerate case)
            lo = None
            gap = -lam_min
            for _ in range(max_doublings):
                gap *= 0.5
                trial = lam_min + max(gap, 1e-9 * (1.0 + abs(lam_min)))
                if secular_residual(trial, p) > 0.0:
                    lo = trial
                    break
                hi = trial
            if lo is None:
                raise ProjectionError("secular function stays negative up to the pole")
        else:
            lo = -1.0
            for _ in range(max_doublings):
                if secular_residual(lo, p) > 0.0:
                    break
                hi, lo = lo, 2.0 * lo
            else:
                raise ProjectionError("could not bracket the multiplier from below")

    f_lo = secular_residual(lo, p)
    lam = 0.5 * (lo + hi)
    for _ in range(400):
        lam = 0.5 * (lo + hi)
        f = secular_residual(lam, p)
        if abs(f) <= tol or hi - lo <= 4 * np.finfo(float).eps * (1.0 + abs(lam)):
            break
        if (f > 0.0) == (f_lo > 0.0):
            lo, f_lo = lam, f
        else:
            hi = lam
    return _result(lam, p)


def project_budget(vy, cs: CostSpec, method: str = "auto", tol: float = 1e-12) -> ProjectionResult:
    """Project a stacked vector onto the budget surface.

    ``method`` is ``"quintic"``, ``"bisection"`` or ``"auto"`` (quintic when
    the slopes are shared and not all zero).
    """
    p = ProjectionInput.from_stacked(vy, cs)
    if method == "auto":
        method = "quintic" if cs.is_homogeneous and not cs.is_linear else "bisection"
    if method == "quintic":
        return project_homogeneous(p)
    if method == "bisection":
        return project_general(p, tol)
    raise ValueError(f"unknown projection method {method!r}")
