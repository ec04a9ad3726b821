"""Residual computation and the uniform verification record.

Every solver in the package funnels its candidates through
:func:`certified_solution`; a :class:`Solution` can only be built with a
verification record whose status is ``proven`` or ``numeric``, so failed
candidates never escape as solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .expr import (
    Bindings,
    DEFAULT_SEED,
    Expr,
    ExprError,
    ZERO,
    ZeroVerdict,
    equivalent_zero,
    free_names,
    mul,
    normalize,
    substitute,
    Integer,
)
from .calculus import diff
from .parse import ODEProblem

__all__ = [
    "Solution",
    "VerificationRecord",
    "VerificationFailure",
    "residual",
    "verify",
    "certified_solution",
    "DEFAULT_PARAMETER_VALUES",
]

# Symbolic parameters must be grounded before numeric probing; small integer
# values keep symbolic exponents well-defined on the probe window.
DEFAULT_PARAMETER_VALUES = {"m": 2, "n": 1, "p": 1, "q": 1, "l": 2}

CONSTANT_WINDOW = (-1.0, 1.0)


@dataclass(frozen=True)
class VerificationRecord:
    """Evidence attached to a solution."""

    status: str  # "proven" | "numeric"
    max_residual: Optional[float] = None
    samples: int = 0
    excluded_regions: tuple[str, ...] = ()
    tolerance: float = 1e-9

    def __post_init__(self) -> None:
        if self.status not in ("proven", "numeric"):
            raise ValueError(f"invalid verification status {self.status!r}")
        if self.status == "numeric":
            if self.max_residual is None or self.max_residual >= self.tolerance:
                raise ValueError("numeric verification requires max residual below tolerance")


class VerificationFailure(Exception):
    """Candidate failed verification; carries the witness binding."""

    def __init__(self, message: str, witness: Optional[dict] = None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class Solution:
    """A verified particular/general/implicit solution.

    ``expression`` is u(t) or u(t, c); for implicit solutions it is the
    relation R(t, u, c) whose zero set defines the family.  Construct through
    :func:`certified_solution` so the invariant on ``verification`` holds.
    """

    kind: str  # "particular" | "general" | "implicit"
    expression: Expr
    provenance: str  # "dyson" | "flow" | "reduce" | "part2gen" | "user"
    verification: VerificationRecord
    side_conditions: tuple[str, ...] = ()
    constant_name: Optional[str] = None
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("particular", "general", "implicit"):
            raise ValueError(f"invalid solution kind {self.kind!r}")
        if self.verification.status not in ("proven", "numeric"):
            raise ValueError("solution requires a proven or numeric verification record")


def residual(problem: ODEProblem, u: Expr) -> Expr:
    """du/dt minus the right-hand side with u substituted in, normalized."""
    lhs = diff(u, problem.indep)
    rhs = substitute(problem.rhs, problem.dep, u)
    return _sub(lhs, rhs)


def _sub(a: Expr, b: Expr) -> Expr:
    from .expr import add

    return add([a, mul([Integer(-1), b])])


def _numeric_windows(problem: ODEProblem) -> dict[str, tuple[float, float]]:
    return {problem.const_name: CONSTANT_WINDOW}


def verify(
    problem: ODEProblem,
    u: Expr,
    mode: str = "both",
    *,
    tol: float = 1e-9,
    seed: int = DEFAULT_SEED,
    n_samples: int = 24,
    parameter_values: Optional[Bindings] = None,
) -> VerificationRecord:
    """Verify a candidate solution; raises :class:`VerificationFailure`.

    ``symbolic`` requires the residual to normalize to literal zero;
    ``numeric`` probes the residual at seeded sample points (t in the probe
    window, the constant in [-1, 1], parameters at documented defaults);
    ``both`` tries symbolic first and falls back to numeric.
    """
    if mode not in ("symbolic", "numeric", "both"):
        raise ValueError(f"invalid verify mode {mode!r}")
    r = residual(problem, u)
    if r == ZERO:
        return VerificationRecord(status="proven", tolerance=tol)
    if mode == "symbolic":
        raise VerificationFailure("residual does not normalize to zero")
    fixed = dict(DEFAULT_PARAMETER_VALUES)
    fixed.update(parameter_values or {})
    fixed = {k: v for k, v in fixed.items() if k in free_names(r)}
    try:
        verdict = equivalent_zero(
            r,
            tol=tol,
            n_samples=n_samples,
            seed=seed,
            windows=_numeric_windows(problem),
            fixed=fixed,
        )
    except ExprError as exc:
        raise VerificationFailure(f"numeric verification impossible: {exc}") from exc
    if verdict.status == "proven-zero":
        return VerificationRecord(status="proven", tolerance=tol)
    if verdict.status == "numeric-zero":
        return VerificationRecord(
            status="numeric",
            max_residual=verdict.max_residual,
            samples=verdict.samples,
            tolerance=tol,
        )
    raise VerificationFailure(
        f"residual is nonzero (|r| ~ {verdict.max_residual:.3g})", witness=verdict.witness
    )


def verify_implicit(
    problem: ODEProblem,
    relation: Expr,
    *,
    tol: float = 1e-9,
    seed: int = DEFAULT_SEED,
    n_samples: int = 24,
    parameter_values: Optional[Bindings] = None,
) -> VerificationRecord:
    """Verify an implicit relation R(t, u, c) = 0 as a first integral.

    R is constant along solutions iff dR/dt + f * dR/du vanishes identically;
    that total derivative is probed numerically over (t, u, c).
    """
    rt = diff(relation, problem.indep)
    ru = diff(relation, problem.dep)
    total = normalize(_add2(rt, mul([problem.rhs, ru])))
    if total == ZERO:
        return VerificationRecord(status="proven", tolerance=tol)
    fixed = dict(DEFAULT_PARAMETER_VALUES)
    fixed.update(parameter_values or {})
    fixed = {k: v for k, v in fixed.items() if k in free_names(total)}
    try:
        verdict = equivalent_zero(
            total,
            tol=tol,
            n_samples=n_samples,
            seed=seed,
            windows=_numeric_windows(problem),
            fixed=fixed,
        )
    except ExprError as exc:
        raise VerificationFailure(f"numeric verification impossible: {exc}") from exc
    if verdict.is_zero:
        status = "proven" if verdict.status == "proven-zero" else "numeric"
        return VerificationRecord(
            status=status,
            max_residual=verdict.max_residual if status == "numeric" else None,
            samples=verdict.samples,
            tolerance=tol,
        )
    raise VerificationFailure(
        f"first-integral residual is nonzero (|r| ~ {verdict.max_residual:.3g})",
        witness=verdict.witness,
    )


def _add2(a: Expr, b: Expr) -> Expr:
    from .expr import add

    return add([a, b])


def certified_solution(
    problem: ODEProblem,
    expression: Expr,
    *,
    kind: str,
    provenance: str,
    mode: str = "both",
    tol: float = 1e-9,
    seed: int = DEFAULT_SEED,
    side_conditions: tuple[str, ...] = (),
    constant_name: Optional[str] = None,
    notes: tuple[str, ...] = (),
    parameter_values: Optional[Bindings] = None,
) -> Solution:
    """Verify and wrap a candidate; raises :class:`VerificationFailure`."""
    if kind == "implicit":
        record = verify_implicit(
            problem, expression, tol=tol, seed=seed, parameter_values=parameter_values
        )
    else:
        record = verify(
            problem, expression, mode, tol=tol, seed=seed, parameter_values=parameter_values
        )
    return Solution(
        kind=kind,
        expression=normalize(expression),
        provenance=provenance,
        verification=record,
        side_conditions=side_conditions,
        constant_name=constant_name,
        notes=notes,
    )
