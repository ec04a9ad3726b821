"""chronode: symbolic first-order ODE solving via operator series.

The package solves du/dt = f(t, u) symbolically with four cooperating
strategies (omega-operator series with survived-term detection, Picard/flow
iteration, trial-function reductions, particular-to-general constructions)
and ships a numerical time-ordered-exponential oracle that certifies the
operator identities the strategies rest on.
"""

from .expr import (
    Expr,
    Integer,
    Rational,
    Parameter,
    Variable,
    Sum,
    Product,
    Power,
    Call,
    Integral,
    ZeroVerdict,
    add,
    mul,
    power,
    call,
    integral,
    normalize,
    substitute,
    free_names,
    eval_numeric,
    equivalent_zero,
    expand,
)
from .parse import ODEProblem, ParseError, parse_expr, parse_ode, render

__all__ = [
    "Expr",
    "Integer",
    "Rational",
    "Parameter",
    "Variable",
    "Sum",
    "Product",
    "Power",
    "Call",
    "Integral",
    "ZeroVerdict",
    "add",
    "mul",
    "power",
    "call",
    "integral",
    "normalize",
    "substitute",
    "free_names",
    "eval_numeric",
    "equivalent_zero",
    "expand",
    "ODEProblem",
    "ParseError",
    "parse_expr",
    "parse_ode",
    "render",
]

__version__ = "0.1.0"
