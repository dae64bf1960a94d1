"""Active-set solvers for the stacked neighborhood sub-problems."""

from ._common import RELATIVE_TOL, SolveResult, certificate_tolerance
from .coop import coop_lambda_max, solve_coop
from .group import group_lambda_max, solve_group
from .lasso import lambda_max, solve_lasso

__all__ = [
    "RELATIVE_TOL",
    "SolveResult",
    "certificate_tolerance",
    "coop_lambda_max",
    "group_lambda_max",
    "lambda_max",
    "solve_coop",
    "solve_group",
    "solve_lasso",
]
