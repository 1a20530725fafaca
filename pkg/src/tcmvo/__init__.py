"""Mean-variance portfolio optimization with linear and quadratic transaction costs."""

from .admm import AdmmDiagnostics, admm_solve, assemble_qc, solve_qc
from .config import ConfigError, RunConfig, load_config, parse_config
from .frontier import (ComparisonReport, FrontierPoint, SolveResult, TargetUnreachable,
                       compare_report, default_gamma_grid, efficient_envelope, frontier,
                       is_dominated, normalize, solve_for_target_vol, solve_mode)
from .linear_cost import SolverError, assemble_lc, solve_lc
from .market import (CostSpec, TradeSplit, Universe, build_covariance, cost_linear,
                     cost_quadratic, net_expected_return, portfolio_stats, split_trades,
                     transaction_cost)
from .projection import ProjectionError, project_budget
from .qp import QpProblem, QpSolution, QpStatus, solve_qp
from .strict import assemble_strict, solve_strict

__version__ = "0.1.0"

__all__ = [
    "AdmmDiagnostics", "ComparisonReport", "ConfigError", "CostSpec", "FrontierPoint",
    "ProjectionError", "SolveResult",
    "QpProblem", "QpSolution", "QpStatus", "RunConfig", "SolverError", "TargetUnreachable",
    "TradeSplit", "Universe", "admm_solve", "assemble_lc", "assemble_qc", "assemble_strict",
    "build_covariance", "compare_report", "cost_linear", "cost_quadratic",
    "default_gamma_grid", "efficient_envelope", "frontier", "is_dominated", "load_config", "net_expected_return", "normalize",
    "parse_config", "portfolio_stats", "project_budget", "solve_for_target_vol", "solve_lc",
    "solve_mode", "solve_qc", "solve_qp", "solve_strict", "split_trades", "transaction_cost",
]
