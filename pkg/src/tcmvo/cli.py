"""Command-line entry point.

    tcmvo optimize --config run.json --mode quadratic --target-vol 0.04
    tcmvo frontier --config run.json --mode linear --grid-count 50 --rebalances 5
    tcmvo compare  --config run.json --target-vol 0.04
    tcmvo project  --input point.json

Without ``--config`` the bundled seven-asset example is used. Exit status is
0 on success, 1 when a solver fails and 2 for bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from importlib import resources

import numpy as np

from .config import ConfigError, load_config, parse_config
from .frontier import (FrontierPoint, TargetUnreachable, _point, compare_report,
                       default_gamma_grid, frontier, solve_for_target_vol, solve_mode)
from .linear_cost import SolverError
from .market import CostSpec
from .projection import ProjectionError, ProjectionInput, budget_residual, project_budget

log = logging.getLogger("tcmvo")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2
POINT_FIELDS = ("gamma", "sigma_bar", "mu_gross", "cost_paid", "mu_net", "wealth")


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.10g}"


def _load(args):
    if args.config:
        return load_config(args.config)
    doc = json.loads(resources.files("tcmvo").joinpath("data/seven_assets.json").read_text())
    return parse_config(doc)


def _point_dict(p: FrontierPoint, names, verbose=False) -> dict:
    d = {k: getattr(p, k) for k in POINT_FIELDS}
    d["weights_norm"] = dict(zip(names, p.weights_norm.tolist()))
    d["weights_raw"] = dict(zip(names, p.weights_raw.tolist()))
    if p.sigma_target is not None:
        d["sigma_target"] = p.sigma_target
    if p.error:
        d["error"] = p.error
    return d


def points_csv(points, names) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(POINT_FIELDS) + list(names))
    for p in points:
        w.writerow([_fmt(getattr(p, k)) for k in POINT_FIELDS]
                   + [_fmt(x) for x in p.weights_norm])
    return buf.getvalue()


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def cmd_optimize(args) -> int:
    cfg = _load(args)
    mode = args.mode or cfg.mode
    gamma = args.gamma if args.gamma is not None else None
    target = args.target_vol if args.target_vol is not None else None
    if gamma is None and target is None:
        gamma, target = cfg.gamma, cfg.sigma_star
    if (gamma is None) == (target is None):
        raise ConfigError("a single solve needs exactly one of gamma or a volatility target")
    u, cs = cfg.universe, cfg.costs
    wt = cfg.resolve_current()
    if target is not None:
        res = solve_for_target_vol(mode, u, cs, wt, target,
                                   tol=cfg.solver.get("vol_tol", 1e-4), solver=cfg.solver)
    else:
        res = solve_mode(mode, u, cs, wt, gamma, cfg.solver)
    p = _point(u, cs, wt, res, cfg.rebalances_per_year, False, target)
    if args.format == "csv":
        _emit(points_csv([p], u.names), args.out)
    else:
        d = {"mode": mode, **_point_dict(p, u.names)}
        if args.verbose:
            diag = dict(res.diagnostics)
            diag.pop("state", None)
            d["diagnostics"] = _jsonable(diag)
        _emit(json.dumps(d, indent=2), args.out)
    return EXIT_OK


def cmd_frontier(args) -> int:
    cfg = _load(args)
    mode = args.mode or cfg.mode
    g = cfg.grid
    kind = args.grid_kind or g.get("kind", "gamma" if mode != "strict" else "sigma")
    count = args.grid_count or g.get("count", 100)
    if kind == "gamma":
        lo = args.grid_min if args.grid_min is not None else g.get("min", 1e-3)
        hi = args.grid_max if args.grid_max is not None else g.get("max", 1e2)
        if not 0 < lo <= hi:
            raise ConfigError("gamma grid needs 0 < min <= max")
        grid = default_gamma_grid(count, lo, hi)
    else:
        lo = args.grid_min if args.grid_min is not None else g.get("min")
        hi = args.grid_max if args.grid_max is not None else g.get("max")
        if lo is None or hi is None or not 0 < lo <= hi:
            raise ConfigError("a volatility grid needs 0 < min <= max")
        grid = np.linspace(lo, hi, count)
    if count < 1:
        raise ConfigError("grid count must be >= 1")
    reb = args.rebalances or cfg.rebalances_per_year
    wt = cfg.resolve_current()
    points = frontier(mode, cfg.universe, cfg.costs, wt, grid, reb, grid_kind=kind,
                      solver=cfg.solver)
    if args.format == "json":
        _emit(json.dumps([_point_dict(p, cfg.universe.names) for p in points], indent=2),
              args.out)
    else:
        _emit(points_csv(points, cfg.universe.names), args.out)
    failed = sum(not p.ok for p in points)
    if failed:
        log.warning("%d of %d frontier points failed", failed, len(points))
    return EXIT_SOLVER if failed == len(points) else EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    target = args.target_vol if args.target_vol is not None else cfg.sigma_star
    if target is None:
        raise ConfigError("compare needs a volatility target (--target-vol or sigma_star)")
    wt = cfg.resolve_current()
    rep = compare_report(cfg.universe, cfg.costs, wt, target, solver=cfg.solver)
    if args.format == "json":
        _emit(json.dumps(rep.to_dict(), indent=2), args.out)
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = list(rep.columns)
        w.writerow(["row"] + cols)
        for i, name in enumerate(rep.names):
            w.writerow([name] + [_fmt(rep.columns[c][i]) for c in cols])
        for row in rep.STAT_ROWS:
            w.writerow([row] + [_fmt(rep.stats[c][row]) for c in cols])
        _emit(buf.getvalue(), args.out)
    else:
        _emit(rep.format(), args.out)
    return EXIT_OK


def cmd_project(args) -> int:
    try:
        with open(args.input) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read projection input: {exc}") from exc
    try:
        c = doc["costs"]
        v = np.asarray(doc["v"], dtype=float)
        n = v.size
        cs = CostSpec.broadcast(n, *(c.get(k, 0.0) for k in
                                     ("c_minus", "c_plus", "delta_minus", "delta_plus")))
        p = ProjectionInput(v, np.asarray(doc.get("dv_minus", np.zeros(n)), dtype=float),
                            np.asarray(doc.get("dv_plus", np.zeros(n)), dtype=float), cs)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"projection input needs v, costs and optional dv_minus/dv_plus: "
                          f"{exc}") from exc
    res = project_budget(p.stacked, cs, args.method)
    y = res.y
    out = {"y": y.tolist(), "w": y[:n].tolist(), "dw_minus": y[n:2 * n].tolist(),
           "dw_plus": y[2 * n:].tolist(), "lambda": res.lam, "distance": res.distance,
           "budget_residual": budget_residual(y, cs)}
    _emit(json.dumps(out, indent=2), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tcmvo", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, formats=("json", "csv"), default="json"):
        p.add_argument("--config", help="JSON run configuration (default: bundled example)")
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--format", choices=formats, default=default)
        p.add_argument("--verbose", "-v", action="store_true")

    p = sub.add_parser("optimize", help="single solve at a gamma or volatility target")
    common(p)
    p.add_argument("--mode", choices=("mvo", "linear", "quadratic", "strict"))
    tgt = p.add_mutually_exclusive_group()
    tgt.add_argument("--gamma", type=float)
    tgt.add_argument("--target-vol", type=float, help="decimal, e.g. 0.04")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("frontier", help="efficient frontier sweep")
    common(p, default="csv")
    p.add_argument("--mode", choices=("mvo", "linear", "quadratic", "strict"))
    p.add_argument("--grid-kind", choices=("gamma", "sigma"))
    p.add_argument("--grid-min", type=float)
    p.add_argument("--grid-max", type=float)
    p.add_argument("--grid-count", type=int)
    p.add_argument("--rebalances", type=int, help="rebalances per year (cost multiplier)")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("compare", help="side-by-side report of the cost-aware optima")
    common(p, formats=("text", "json", "csv"), default="text")
    p.add_argument("--target-vol", type=float)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("project", help="project a point onto the quadratic budget surface")
    p.add_argument("--input", required=True, help="JSON with v, dv_minus, dv_plus, costs")
    p.add_argument("--method", choices=("auto", "quintic", "bisection"), default="auto")
    p.add_argument("--out")
    p.add_argument("--verbose", "-v", action="store_true")
    p.set_defaults(func=cmd_project)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ProjectionError) as exc:
        extra = ""
        if isinstance(exc, TargetUnreachable) and exc.info:
            extra = " " + ", ".join(f"{k}={v:.6g}" for k, v in exc.info.items())
        print(f"solver failure: {exc}{extra}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
