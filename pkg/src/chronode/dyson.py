"""Operator-series solver for du/dt = f(t, u) with f polynomial in u.

The unknown is encoded through S(t, w) = exp(w*u(t)), which turns the
nonlinear scalar equation into a linear operator equation in (t, w): S
evolves under w*f(t, d/dw).  Truncated w-polynomials represent the partial
sums of the corresponding iterated-integral series; the candidate solution
is the w-degree-1 coefficient of the running sum.  Across iterations an
unaltered ("survived") set of additive terms emerges; each candidate set is
verified by residual before it is ever returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .calculus import definite, diff, integrate
from .expr import (
    Expr,
    Integer,
    ONE,
    Variable,
    ZERO,
    add,
    contains_integral,
    mul,
    normalize,
    poly_coefficients,
    power,
    size,
    sum_terms,
)
from .parse import ODEProblem
from .verify import Solution, VerificationFailure, certified_solution

__all__ = [
    "OmegaPoly",
    "SurvivedReport",
    "DysonOptions",
    "lift_rhs",
    "apply_operator",
    "next_term",
    "partial_solution",
    "survived_part",
    "solve_dyson",
]


# An OmegaPoly maps w-degree -> coefficient expression in t (and parameters).
OmegaPoly = dict[int, Expr]


@dataclass(frozen=True)
class SurvivedReport:
    """Stable additive terms detected across the tail of the iterate sequence."""

    candidate: Expr
    window: int
    first_stable_index: int
    sequence: tuple[Expr, ...]


@dataclass(frozen=True)
class DysonOptions:
    max_iter: int = 25
    window: int = 3
    precondition: bool = True
    node_cap: int = 200_000
    verify_mode: str = "both"
    tol: float = 1e-9


@dataclass
class DysonTrace:
    """Diagnostics for reporting: what happened during the iteration."""

    iterations: int = 0
    candidates_tried: int = 0
    preconditioned: bool = False
    stopped_reason: str = ""
    survived_history: list[str] = field(default_factory=list)


def lift_rhs(problem: ODEProblem) -> Optional[list[Expr]]:
    """Coefficients (a_0 .. a_d) of the rhs as a polynomial in the unknown.

    None when the rhs is not polynomial in the dependent variable, in which
    case this strategy does not apply.
    """
    pc = poly_coefficients(problem.rhs, problem.dep)
    if pc is None:
        return None
    d = max(pc, default=0)
    return [pc.get(k, ZERO) for k in range(d + 1)]


def apply_operator(coeffs: list[Expr], poly: OmegaPoly) -> OmegaPoly:
    """One application of w * sum_k a_k(t) (d/dw)^k to a truncated polynomial."""
    out: dict[int, list[Expr]] = {}
    for j, c in poly.items():
        for k, a in enumerate(coeffs):
            if a == ZERO or k > j:
                continue
            # (d/dw)^k w^j = j!/(j-k)! w^(j-k); multiplying by w shifts up by 1
            fall = 1
            for i in range(k):
                fall *= j - i
            deg = j - k + 1
            out.setdefault(deg, []).append(mul([Integer(fall), a, c]))
    result: OmegaPoly = {}
    for deg, parts in out.items():
        s = add(parts)
        if s != ZERO:
            result[deg] = s
    return result


def next_term(coeffs: list[Expr], prev: OmegaPoly, problem: ODEProblem) -> OmegaPoly:
    """Next series element: integrate the operator image coefficient-wise.

    Definite integrals from the base point when one is present, indefinite
    otherwise.  Coefficients whose integrals do not close keep unevaluated
    integral nodes; they are excluded later by survived-term detection.
    """
    image = apply_operator(coeffs, prev)
    out: OmegaPoly = {}
    for deg, c in image.items():
        if problem.base_point is not None:
            r = definite(c, problem.indep, problem.base_point, Variable(problem.indep))
        else:
            r = integrate(c, problem.indep)
        if r.expression != ZERO:
            out[deg] = r.expression
    return out


def partial_solution(elements: list[OmegaPoly]) -> Expr:
    """Sum of the w-degree-1 coefficients of the series elements so far."""
    return add([el.get(1, ZERO) for el in elements])


def _term_set(e: Expr, exclude_unclosed: bool) -> dict[tuple, Expr]:
    if e == ZERO:
        return {ZERO.sort_key(): ZERO}
    out: dict[tuple, Expr] = {}
    for t in sum_terms(e):
        if exclude_unclosed and contains_integral(t):
            continue
        out[t.sort_key()] = t
    return out


def survived_part(
    sequence: list[Expr], window: int = 3, *, exclude_unclosed: bool = True
) -> Optional[SurvivedReport]:
    """Additive terms present with identical normal form in the last ``window``
    entries of the iterate sequence; None when that set is empty.

    Terms containing unevaluated integrals are excluded by default: an
    unclosed coefficient cannot take part in a verifiable candidate.
    """
    if len(sequence) < window:
        return None
    tail = sequence[-window:]
    common = _term_set(tail[0], exclude_unclosed)
    for entry in tail[1:]:
        keys = _term_set(entry, exclude_unclosed)
        common = {k: v for k, v in common.items() if k in keys}
        if not common:
            return None
    candidate = add(list(common.values()))
    if candidate == ZERO and not all(e == ZERO for e in tail):
        return None
    # earliest index from which the candidate terms are all present
    first = len(sequence) - window
    cand_keys = set(common.keys())
    while first > 0:
        keys = set(_term_set(sequence[first - 1], exclude_unclosed).keys())
        if cand_keys <= keys:
            first -= 1
        else:
            break
    return SurvivedReport(
        candidate=candidate,
        window=window,
        first_stable_index=first,
        sequence=tuple(sequence),
    )


def seed_element(constant: Optional[Expr], truncation: int) -> OmegaPoly:
    """Initial series element exp(w*c) truncated; {0: 1} for c = 0."""
    if constant is None or constant == ZERO:
        return {0: ONE}
    out: OmegaPoly = {0: ONE}
    from fractions import Fraction

    from .expr import from_fraction

    fact = 1
    for j in range(1, truncation + 1):
        fact *= j
        out[j] = mul([from_fraction(Fraction(1, fact)), power(constant, Integer(j))])
    return out


def _degree_bound(i: int, d: int) -> int:
    return 1 + (i - 1) * max(1, d - 1)


def solve_dyson(
    problem: ODEProblem,
    options: DysonOptions = DysonOptions(),
    *,
    trace: Optional[DysonTrace] = None,
) -> Optional[Solution]:
    """Iterate the series, watch for survived terms, verify candidates.

    Returns the first verified particular solution (zero-constant
    convention), or None when the strategy does not apply or no candidate
    verifies within the iteration budget.
    """
    trace = trace if trace is not None else DysonTrace()
    coeffs = lift_rhs(problem)
    if coeffs is None:
        trace.stopped_reason = "rhs is not polynomial in the unknown"
        return None

    if options.precondition:
        sol = _solve_preconditioned(problem, coeffs, options, trace)
        if sol is not None:
            return sol

    return _solve_plain(problem, coeffs, options, trace)


def _solve_preconditioned(
    problem: ODEProblem,
    coeffs: list[Expr],
    options: DysonOptions,
    trace: DysonTrace,
) -> Optional[Solution]:
    """Peel the u-free part of the rhs when its antiderivative closes.

    With h = integral of a_0, the shifted unknown v = u - h satisfies
    dv/dt = f(t, v + h) - a_0; a verified v gives back u = v + h.
    """
    a0 = coeffs[0]
    if a0 == ZERO or len(coeffs) == 1:
        return None
    if problem.base_point is not None:
        r = definite(a0, problem.indep, problem.base_point, Variable(problem.indep))
    else:
        r = integrate(a0, problem.indep)
    if not r.closed:
        return None
    h = r.expression
    from .expr import substitute

    dep = Variable(problem.dep)
    shifted_rhs = normalize(
        add(
            [
                substitute(problem.rhs, problem.dep, add([dep, h])),
                mul([Integer(-1), a0]),
            ]
        )
    )
    shifted = ODEProblem(
        rhs=shifted_rhs,
        indep=problem.indep,
        dep=problem.dep,
        base_point=problem.base_point,
        const_name=problem.const_name,
    )
    inner_opts = DysonOptions(
        max_iter=options.max_iter,
        window=options.window,
        precondition=False,
        node_cap=options.node_cap,
        verify_mode=options.verify_mode,
        tol=options.tol,
    )
    inner_trace = DysonTrace()
    inner = _solve_plain(shifted, lift_rhs(shifted) or [], inner_opts, inner_trace)
    trace.iterations += inner_trace.iterations
    trace.candidates_tried += inner_trace.candidates_tried
    if inner is None:
        return None
    trace.preconditioned = True
    candidate = add([inner.expression, h])
    try:
        return certified_solution(
            problem,
            candidate,
            kind="particular",
            provenance="dyson",
            mode=options.verify_mode,
            tol=options.tol,
            side_conditions=inner.side_conditions,
            notes=("preconditioned: u-free part of the rhs peeled off",),
        )
    except VerificationFailure:
        return None


def _solve_plain(
    problem: ODEProblem,
    coeffs: list[Expr],
    options: DysonOptions,
    trace: DysonTrace,
) -> Optional[Solution]:
    d = len(coeffs) - 1
    element: OmegaPoly = seed_element(None, 0)  # zero-constant convention
    elements = [element]
    useq = [partial_solution(elements)]
    last_candidate: Optional[Expr] = None
    for i in range(2, options.max_iter + 2):
        element = next_term(coeffs, element, problem)
        elements.append(element)
        trace.iterations += 1
        bound = _degree_bound(i, d)
        got = max(element, default=0)
        if got > bound:
            raise AssertionError(
                f"series degree law violated: element {i} has degree {got} > {bound}"
            )
        useq.append(partial_solution(elements))
        if sum(size(c) for c in element.values()) > options.node_cap:
            trace.stopped_reason = f"expression size exceeded {options.node_cap} nodes"
            return None
        report = survived_part(useq, options.window)
        if report is None:
            trace.survived_history.append("none")
            continue
        trace.survived_history.append(str(report.candidate))
        if last_candidate is not None and report.candidate == last_candidate:
            continue
        last_candidate = report.candidate
        trace.candidates_tried += 1
        try:
            return certified_solution(
                problem,
                report.candidate,
                kind="particular",
                provenance="dyson",
                mode=options.verify_mode,
                tol=options.tol,
            )
        except VerificationFailure:
            continue
    trace.stopped_reason = "iteration budget exhausted"
    return None
