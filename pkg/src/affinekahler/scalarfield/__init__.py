"""Scalar fields: expressions, jets and a finite-difference oracle."""

from .expr import (
    EXTENSION_VARS, FUNCTIONS, SURFACE_VARS, ArityError, DomainError, Expr,
    ExprError, ExprSyntaxError, Num, Potential, UnknownIdentifierError, Var,
    as_expr, diff, evaluate, free_vars, parse_expr, substitute, to_string,
)
from .fd import fd_partial
from .jets import Jet, JetSpace, eval_jet, eval_jets, get_space

__all__ = [
    "EXTENSION_VARS", "FUNCTIONS", "SURFACE_VARS", "ArityError", "DomainError",
    "Expr", "ExprError", "ExprSyntaxError", "Jet", "JetSpace", "Num", "Potential",
    "UnknownIdentifierError", "Var", "as_expr", "diff", "eval_jet", "eval_jets",
    "evaluate", "fd_partial", "free_vars", "get_space", "parse_expr", "substitute",
    "to_string",
]
