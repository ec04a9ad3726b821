"""Symbolic differentiation and rule-based antidifferentiation.

Differentiation is total on the supported node set.  Antidifferentiation is
deliberately a fixed, ordered rule cascade (first match wins):

1. linearity (top-level sums split; variable-free factors pull out),
2. power rule ``t^k`` for ``k != -1`` (symbolic exponents emit the side
   condition ``k != -1``), with ``t^-1 -> ln t``,
3. ``exp(linear) * t^n`` by repeated integration by parts,
4. ``(ln t)^j / t -> (ln t)^(j+1)/(j+1)``,
5. the derivative pattern ``q * g'(t) * F'(g(t)) -> q * F(g(t))`` for a
   variable-free ratio ``q``, with ``F'`` drawn from powers of ``g``,
   ``1/g``, ``exp``, ``sin`` and ``cos``,
6. otherwise: expand the term and retry once, then leave an unevaluated
   integral with the variable-free coefficient kept outside (so identical
   residual integrals collect across series iterations).

Integration constants are always zero by convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .expr import (
    Call,
    Expr,
    ExprError,
    Integer,
    Integral,
    ONE,
    Parameter,
    Power,
    Product,
    Rational,
    Sum,
    Variable,
    ZERO,
    add,
    as_fraction,
    call,
    expand,
    free_names,
    integral,
    mul,
    normalize,
    poly_coefficients,
    power,
    product_factors,
    substitute,
    sum_terms,
)
from .parse import render

__all__ = ["AntiderivativeResult", "DerivativeError", "diff", "integrate", "definite"]


class DerivativeError(ExprError):
    """Raised for unsupported derivative/integral bound interactions."""


@dataclass(frozen=True)
class AntiderivativeResult:
    """Antiderivative with closure flag and accumulated side conditions.

    ``closed`` is False when any term had to stay as an unevaluated
    integral.  Either way ``diff(expression, var)`` reproduces the
    integrand (unevaluated terms differentiate back by the fundamental
    theorem).
    """

    expression: Expr
    closed: bool
    side_conditions: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

def diff(e: Expr, var: str) -> Expr:
    """Derivative of ``e`` with respect to ``var``, normalized."""
    e = normalize(e)
    return _diff(e, var)


def _diff(e: Expr, var: str) -> Expr:
    if isinstance(e, (Integer, Rational, Parameter)):
        return ZERO
    if isinstance(e, Variable):
        return ONE if e.name == var else ZERO
    if var not in free_names(e):
        return ZERO
    if isinstance(e, Sum):
        return add([_diff(t, var) for t in e.terms])
    if isinstance(e, Product):
        factors = list(e.factors)
        terms = []
        for i, f in enumerate(factors):
            df = _diff(f, var)
            if df == ZERO:
                continue
            terms.append(mul([df] + factors[:i] + factors[i + 1 :]))
        return add(terms)
    if isinstance(e, Power):
        b, x = e.base, e.exponent
        db = _diff(b, var)
        dx = _diff(x, var)
        parts = []
        if db != ZERO:
            parts.append(mul([x, power(b, add([x, Integer(-1)])), db]))
        if dx != ZERO:
            parts.append(mul([power(b, x), call("ln", b), dx]))
        return add(parts)
    if isinstance(e, Call):
        inner = _diff(e.arg, var)
        if inner == ZERO:
            return ZERO
        if e.func == "exp":
            outer: Expr = call("exp", e.arg)
        elif e.func == "ln":
            outer = power(e.arg, Integer(-1))
        elif e.func == "sin":
            outer = call("cos", e.arg)
        elif e.func == "cos":
            outer = mul([Integer(-1), call("sin", e.arg)])
        elif e.func == "tan":
            # 1 + tan^2 keeps tan-family residuals cancelling structurally
            outer = add([ONE, power(call("tan", e.arg), Integer(2))])
        elif e.func == "arctan":
            outer = power(add([ONE, power(e.arg, Integer(2))]), Integer(-1))
        else:  # pragma: no cover
            raise ValueError(f"unknown function {e.func!r}")
        return mul([outer, inner])
    if isinstance(e, Integral):
        return _diff_integral(e, var)
    raise TypeError(f"not an expression: {e!r}")


def _diff_integral(e: Integral, var: str) -> Expr:
    if e.bounds is None:
        if e.var == var:
            return e.integrand
        # differentiate under the integral sign (zero-constant convention)
        return integral(_diff(e.integrand, var), e.var, None)
    lo, hi = e.bounds
    in_bounds = var in free_names(lo) | free_names(hi)
    in_body = var in free_names(e.integrand) - {e.var}
    if in_bounds and in_body:
        raise DerivativeError(
            f"derivative variable {var!r} appears in both the bounds and the "
            "integrand of an unevaluated integral"
        )
    if in_bounds:
        parts = []
        dhi = _diff(hi, var)
        if dhi != ZERO:
            parts.append(mul([substitute(e.integrand, e.var, hi), dhi]))
        dlo = _diff(lo, var)
        if dlo != ZERO:
            parts.append(mul([Integer(-1), substitute(e.integrand, e.var, lo), dlo]))
        return add(parts)
    if in_body:
        return integral(_diff(e.integrand, var), e.var, e.bounds)
    return ZERO


# ---------------------------------------------------------------------------
# Antidifferentiation
# ---------------------------------------------------------------------------

_core_cache: dict[tuple, Optional[tuple[Expr, tuple[str, ...]]]] = {}


def integrate(e: Expr, var: str) -> AntiderivativeResult:
    """Antiderivative of ``e`` in ``var`` (constant of integration zero)."""
    e = normalize(e)
    parts: list[Expr] = []
    closed = True
    conds: list[str] = []
    for term in sum_terms(e):
        expr, ok, cs = _integrate_term(term, var)
        parts.extend(sum_terms(expr))
        closed = closed and ok
        for c in cs:
            if c not in conds:
                conds.append(c)
    return AntiderivativeResult(add(parts), closed, tuple(conds))


def definite(e: Expr, var: str, lo: Expr, hi: Expr) -> AntiderivativeResult:
    """Definite integral from ``lo`` to ``hi``; unclosed terms keep bounds."""
    e = normalize(e)
    parts: list[Expr] = []
    closed = True
    conds: list[str] = []
    for term in sum_terms(e):
        expr, ok, cs = _integrate_term(term, var)
        if ok:
            try:
                parts.append(substitute(expr, var, hi))
                parts.append(mul([Integer(-1), substitute(expr, var, lo)]))
            except ExprError:
                ok = False
        if not ok:
            coeff, core = _split_var_free(term, var)
            body = core if core is not None else ONE
            parts.append(mul(coeff + [integral(body, var, (normalize(lo), normalize(hi)))]))
            closed = False
        for c in cs:
            if c not in conds:
                conds.append(c)
    return AntiderivativeResult(add(parts), closed, tuple(conds))


def _split_var_free(term: Expr, var: str) -> tuple[list[Expr], Optional[Expr]]:
    coeff: list[Expr] = []
    core: list[Expr] = []
    for f in product_factors(term):
        if var in free_names(f):
            core.append(f)
        else:
            coeff.append(f)
    if not core:
        return coeff, None
    return coeff, mul(core)


def _integrate_term(term: Expr, var: str) -> tuple[Expr, bool, tuple[str, ...]]:
    coeff, core = _split_var_free(term, var)
    if core is None:
        return mul(coeff + [Variable(var)]), True, ()
    hit = _integrate_core_cached(core, var)
    if hit is not None:
        expr, conds = hit
        return mul(coeff + [expr]), True, conds
    expanded = expand(core)
    if expanded != core:
        sub = integrate(expanded, var)
        distributed = add([mul(coeff + [st]) for st in sum_terms(sub.expression)])
        return distributed, sub.closed, sub.side_conditions
    return mul(coeff + [integral(core, var, None)]), False, ()


def _integrate_core_cached(core: Expr, var: str) -> Optional[tuple[Expr, tuple[str, ...]]]:
    key = (core.sort_key(), var)
    if key in _core_cache:
        return _core_cache[key]
    out = _integrate_core(core, var)
    if len(_core_cache) < 100_000:
        _core_cache[key] = out
    return out


def _integrate_core(core: Expr, var: str) -> Optional[tuple[Expr, tuple[str, ...]]]:
    """Integration rules for a coefficient-free core term; None when no rule fires."""
    t = Variable(var)
    if core == t:
        return mul([Rational(1, 2), power(t, Integer(2))]), ()

    factors = product_factors(core)

    # power of the bare variable
    if len(factors) == 1 and isinstance(core, Power) and core.base == t:
        k = core.exponent
        if var not in free_names(k):
            return _power_rule(t, k)

    # exp(linear) * t^n by repeated integration by parts
    hit = _exp_poly_rule(factors, t, var)
    if hit is not None:
        return hit

    # (ln t)^j / t
    hit = _log_power_rule(factors, t, var)
    if hit is not None:
        return hit

    # derivative pattern: q * g' * F'(g)
    return _derivative_pattern(factors, var)


def _power_rule(t: Variable, k: Expr) -> Optional[tuple[Expr, tuple[str, ...]]]:
    if k == Integer(-1):
        return call("ln", t), ()
    kp1 = add([k, ONE])
    if kp1 == ZERO:
        return call("ln", t), ()
    conds: tuple[str, ...] = ()
    if as_fraction(k) is None:
        conds = (f"{render(k)} != -1",)
    return mul([power(t, kp1), power(kp1, Integer(-1))]), conds


def _exp_poly_rule(factors: list[Expr], t: Variable, var: str) -> Optional[tuple[Expr, tuple[str, ...]]]:
    exps = [f for f in factors if isinstance(f, Call) and f.func == "exp"]
    if len(exps) != 1:
        return None
    g = exps[0].arg
    pc = poly_coefficients(g, var)
    if pc is None or max(pc, default=0) != 1:
        return None
    kappa = pc[1]
    others = [f for f in factors if f is not exps[0]]
    n: Optional[int] = None
    if not others:
        n = 0
    elif len(others) == 1:
        f = others[0]
        if f == t:
            n = 1
        elif isinstance(f, Power) and f.base == t:
            kf = as_fraction(f.exponent)
            if kf is not None and kf.denominator == 1 and kf >= 2:
                n = kf.numerator
    if n is None:
        return None
    conds: tuple[str, ...] = ()
    if as_fraction(kappa) is None:
        conds = (f"{render(kappa)} != 0",)
    inv_kappa = power(kappa, Integer(-1))
    expg = call("exp", g)
    out = mul([inv_kappa, expg])  # n = 0 seed
    for j in range(1, n + 1):
        out = add([
            mul([inv_kappa, power(t, Integer(j)), expg]),
            mul([Integer(-j), inv_kappa, out]),
        ])
    # distribute so repeated runs collect term-by-term in series iterations
    return expand(out), conds


def _log_power_rule(factors: list[Expr], t: Variable, var: str) -> Optional[tuple[Expr, tuple[str, ...]]]:
    if len(factors) != 2:
        return None
    inv = [f for f in factors if f == Power(t, Integer(-1))]
    if len(inv) != 1:
        return None
    other = factors[0] if factors[1] is inv[0] else factors[1]
    if other == Call("ln", t):
        j: Expr = ONE
    elif isinstance(other, Power) and other.base == Call("ln", t) and var not in free_names(other.exponent):
        j = other.exponent
    else:
        return None
    jp1 = add([j, ONE])
    if jp1 == ZERO:
        return None  # 1/(t ln t) is handled by the derivative pattern
    conds: tuple[str, ...] = ()
    if as_fraction(j) is None:
        conds = (f"{render(j)} != -1",)
    return mul([power(call("ln", t), jp1), power(jp1, Integer(-1))]), conds


def _derivative_pattern(factors: list[Expr], var: str) -> Optional[tuple[Expr, tuple[str, ...]]]:
    for i, f in enumerate(factors):
        candidates: list[tuple[Expr, Expr, tuple[str, ...]]] = []  # (g, F(g), conds)
        if isinstance(f, Power) and var not in free_names(f.exponent):
            g, k = f.base, f.exponent
            if k == Integer(-1):
                candidates.append((g, call("ln", g), ()))
            else:
                kp1 = add([k, ONE])
                if kp1 != ZERO:
                    conds: tuple[str, ...] = ()
                    if as_fraction(k) is None:
                        conds = (f"{render(k)} != -1",)
                    candidates.append((g, mul([power(g, kp1), power(kp1, Integer(-1))]), conds))
        elif isinstance(f, Call) and f.func == "exp":
            candidates.append((f.arg, call("exp", f.arg), ()))
        elif isinstance(f, Call) and f.func == "sin":
            candidates.append((f.arg, mul([Integer(-1), call("cos", f.arg)]), ()))
        elif isinstance(f, Call) and f.func == "cos":
            candidates.append((f.arg, call("sin", f.arg), ()))
        else:
            candidates.append((f, mul([Rational(1, 2), power(f, Integer(2))]), ()))
        rest = factors[:i] + factors[i + 1 :]
        for g, F, conds in candidates:
            if var not in free_names(g):
                continue
            try:
                gp = _diff(g, var)
            except DerivativeError:
                continue
            if gp == ZERO:
                continue
            q = mul(rest + [power(gp, Integer(-1))])
            if var not in free_names(q):
                return mul([q, F]), conds
    return None
