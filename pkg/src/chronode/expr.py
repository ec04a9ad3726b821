"""Immutable symbolic expression kernel.

Expression trees are built through the smart constructors (``add``, ``mul``,
``power``, ``call``, ``integral``) which maintain a canonical normal form:
sums and products are flattened and sorted under a fixed total order, numeric
literals fold exactly in arbitrary-precision rational arithmetic, like terms
collect, and a small set of confluent local rewrites closes the residual
identities the solvers rely on (power laws, exp/ln cancellation, merging of
exponential factors, and the sin^2 + cos^2 elimination).

Structural equality of normal forms is the kernel's notion of equality.  No
floating-point value ever appears inside a normalized expression; floats only
arise in :func:`eval_numeric`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

import numpy as np

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
    "Bindings",
    "ZeroVerdict",
    "ExprError",
    "UnboundNameError",
    "DomainEvalError",
    "UnboundedIntegralError",
    "EvaluationSingularError",
    "UnsupportedSubstitutionError",
    "add",
    "mul",
    "power",
    "call",
    "integral",
    "integer",
    "rational",
    "from_fraction",
    "normalize",
    "substitute",
    "free_names",
    "eval_numeric",
    "equivalent_zero",
    "expand",
    "sum_terms",
    "product_factors",
    "split_coefficient",
    "as_fraction",
    "poly_coefficients",
    "contains_integral",
    "size",
    "ZERO",
    "ONE",
    "FUNCTIONS",
    "DEFAULT_SEED",
    "DEFAULT_WINDOW",
]

FUNCTIONS = ("exp", "ln", "sin", "cos", "tan", "arctan")

DEFAULT_SEED = 1729
# Probe window dodges the poles at t = 0 (negative powers, ln t) that the
# supported equation family produces.
DEFAULT_WINDOW = (0.3, 2.3)


class ExprError(Exception):
    """Base class for kernel errors."""


class UnboundNameError(ExprError):
    pass


class DomainEvalError(ExprError):
    pass


class UnboundedIntegralError(ExprError):
    pass


class EvaluationSingularError(ExprError):
    pass


class UnsupportedSubstitutionError(ExprError):
    pass


# ---------------------------------------------------------------------------
# Node types
# ---------------------------------------------------------------------------

class Expr:
    """Base class for all expression nodes.

    Nodes are immutable; each instance precomputes a canonical key used for
    the total order, hashing and structural equality.
    """

    __slots__ = ()
    _key: tuple
    _hash: int

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Expr) and self._key == other._key

    def __ne__(self, other: object) -> bool:
        return not self.__eq__(other)

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:  # render lazily to avoid an import cycle
        from . import parse

        return parse.render(self, "plain")

    def sort_key(self) -> tuple:
        return self._key


def _seal(node: Expr, key: tuple) -> None:
    object.__setattr__(node, "_key", key)
    object.__setattr__(node, "_hash", hash(key))


@dataclass(frozen=True, eq=False, repr=False)
class Integer(Expr):
    value: int

    def __post_init__(self) -> None:
        _seal(self, (0, (self.value,)))


@dataclass(frozen=True, eq=False, repr=False)
class Rational(Expr):
    """Reduced fraction with positive denominator; never integer-valued."""

    num: int
    den: int

    def __post_init__(self) -> None:
        if self.den <= 0:
            raise ValueError("denominator must be positive")
        if math.gcd(self.num, self.den) != 1:
            raise ValueError("fraction must be reduced")
        if self.den == 1:
            raise ValueError("integer-valued rational; use Integer")
        _seal(self, (1, (Fraction(self.num, self.den),)))

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.num, self.den)


@dataclass(frozen=True, eq=False, repr=False)
class Parameter(Expr):
    """Named symbolic constant (e.g. p, m, n, q, l)."""

    name: str

    def __post_init__(self) -> None:
        _seal(self, (2, (self.name,)))


@dataclass(frozen=True, eq=False, repr=False)
class Variable(Expr):
    """Named variable (e.g. t, u, c)."""

    name: str

    def __post_init__(self) -> None:
        _seal(self, (3, (self.name,)))


@dataclass(frozen=True, eq=False, repr=False)
class Call(Expr):
    func: str
    arg: Expr

    def __post_init__(self) -> None:
        if self.func not in FUNCTIONS:
            raise ValueError(f"unknown function {self.func!r}")
        _seal(self, (4, (self.func, self.arg._key)))


@dataclass(frozen=True, eq=False, repr=False)
class Power(Expr):
    base: Expr
    exponent: Expr

    def __post_init__(self) -> None:
        _seal(self, (5, (self.base._key, self.exponent._key)))


@dataclass(frozen=True, eq=False, repr=False)
class Product(Expr):
    factors: tuple[Expr, ...]

    def __post_init__(self) -> None:
        if len(self.factors) < 2:
            raise ValueError("Product needs at least two factors")
        _seal(self, (6, tuple(f._key for f in self.factors)))


@dataclass(frozen=True, eq=False, repr=False)
class Sum(Expr):
    terms: tuple[Expr, ...]

    def __post_init__(self) -> None:
        if len(self.terms) < 2:
            raise ValueError("Sum needs at least two terms")
        _seal(self, (7, tuple(t._key for t in self.terms)))


@dataclass(frozen=True, eq=False, repr=False)
class Integral(Expr):
    """Unevaluated integral.

    ``bounds is None`` denotes an antiderivative in ``var`` (the node is a
    function of ``var``); with bounds the integration variable is bound and
    the node depends on whatever is free in the bounds and integrand.
    """

    integrand: Expr
    var: str
    bounds: Optional[tuple[Expr, Expr]] = None

    def __post_init__(self) -> None:
        bkey: tuple = ()
        if self.bounds is not None:
            bkey = (self.bounds[0]._key, self.bounds[1]._key)
        _seal(self, (8, (self.var, self.integrand._key, bkey)))


ZERO = Integer(0)
ONE = Integer(1)
MINUS_ONE = Integer(-1)

Bindings = Mapping[str, Union[int, float, Fraction]]


# ---------------------------------------------------------------------------
# Numeric literal helpers
# ---------------------------------------------------------------------------

def integer(n: int) -> Integer:
    return Integer(int(n))


def rational(num: int, den: int) -> Expr:
    return from_fraction(Fraction(num, den))


def from_fraction(fr: Fraction) -> Expr:
    if fr.denominator == 1:
        return Integer(fr.numerator)
    return Rational(fr.numerator, fr.denominator)


def as_fraction(e: Expr) -> Optional[Fraction]:
    """Exact value of a numeric literal, or None."""
    if isinstance(e, Integer):
        return Fraction(e.value)
    if isinstance(e, Rational):
        return e.fraction
    return None


def is_number(e: Expr) -> bool:
    return isinstance(e, (Integer, Rational))


# ---------------------------------------------------------------------------
# Structure helpers
# ---------------------------------------------------------------------------

def sum_terms(e: Expr) -> list[Expr]:
    """Top-level additive terms (a non-sum is its own single term)."""
    if isinstance(e, Sum):
        return list(e.terms)
    return [e]


def product_factors(e: Expr) -> list[Expr]:
    if isinstance(e, Product):
        return list(e.factors)
    return [e]


def split_coefficient(term: Expr) -> tuple[Fraction, Optional[Expr]]:
    """Split a normalized term into (rational coefficient, monomial).

    The monomial is None for a purely numeric term.  In a normalized product
    the numeric literal, if any, is a single leading factor.
    """
    fr = as_fraction(term)
    if fr is not None:
        return fr, None
    if isinstance(term, Product):
        coeff = Fraction(1)
        rest: list[Expr] = []
        for f in term.factors:
            fr = as_fraction(f)
            if fr is not None:
                coeff *= fr
            else:
                rest.append(f)
        if not rest:
            return coeff, None
        if len(rest) == 1:
            return coeff, rest[0]
        return coeff, Product(tuple(rest))
    return Fraction(1), term


def _with_coefficient(coeff: Fraction, mono: Optional[Expr]) -> Expr:
    if mono is None:
        return from_fraction(coeff)
    if coeff == 0:
        return ZERO
    if coeff == 1:
        return mono
    factors = product_factors(mono)
    return Product(tuple([from_fraction(coeff)] + factors))


# ---------------------------------------------------------------------------
# Smart constructors
# ---------------------------------------------------------------------------

def add(terms: Iterable[Expr]) -> Expr:
    """Normalized sum: flatten, collect like terms, fold numerics, sort."""
    flat: list[Expr] = []
    for t in terms:
        if isinstance(t, Sum):
            flat.extend(t.terms)
        else:
            flat.append(t)

    numeric = Fraction(0)
    by_mono: dict[tuple, tuple[Fraction, Expr]] = {}
    for t in flat:
        coeff, mono = split_coefficient(t)
        if mono is None:
            numeric += coeff
            continue
        key = mono._key
        if key in by_mono:
            prev, _ = by_mono[key]
            by_mono[key] = (prev + coeff, mono)
        else:
            by_mono[key] = (coeff, mono)

    numeric += _apply_pythagorean(by_mono)

    out: list[Expr] = []
    if numeric != 0:
        out.append(from_fraction(numeric))
    for coeff, mono in by_mono.values():
        if coeff != 0:
            out.append(_with_coefficient(coeff, mono))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    out.sort(key=lambda e: e._key)
    return Sum(tuple(out))


def _pyth_partner(mono: Expr) -> Optional[tuple[tuple, Optional[Expr]]]:
    """For a monomial with a sin(u)^2 factor, return (cos-partner key, rest)."""
    factors = product_factors(mono)
    for i, f in enumerate(factors):
        if (
            isinstance(f, Power)
            and f.exponent == Integer(2)
            and isinstance(f.base, Call)
            and f.base.func == "sin"
        ):
            partner = Power(Call("cos", f.base.arg), Integer(2))
            others = factors[:i] + factors[i + 1 :]
            new_factors = sorted(others + [partner], key=lambda e: e._key)
            if len(new_factors) == 1:
                pkey = new_factors[0]._key
            else:
                pkey = Product(tuple(new_factors))._key
            if not others:
                rest: Optional[Expr] = None
            elif len(others) == 1:
                rest = others[0]
            else:
                rest = Product(tuple(sorted(others, key=lambda e: e._key)))
            return pkey, rest
    return None


def _apply_pythagorean(by_mono: dict[tuple, tuple[Fraction, Expr]]) -> Fraction:
    """Eliminate cos(u)^2 monomials paired with a matching sin(u)^2 monomial.

    alpha*R*sin(u)^2 + beta*R*cos(u)^2  ->  beta*R + (alpha-beta)*R*sin(u)^2.
    Loops until no pair remains (each merge removes one monomial) and returns
    the purely numeric contribution released by the merges.
    """
    numeric = Fraction(0)
    changed = True
    while changed:
        changed = False
        for key in list(by_mono.keys()):
            if key not in by_mono:
                continue
            coeff, mono = by_mono[key]
            hit = _pyth_partner(mono)
            if hit is None:
                continue
            pkey, rest = hit
            if pkey not in by_mono:
                continue
            pcoeff, _ = by_mono.pop(pkey)
            by_mono[key] = (coeff - pcoeff, mono)
            if rest is None:
                numeric += pcoeff
            else:
                rcoeff, rmono = split_coefficient(rest)
                rcoeff *= pcoeff
                if rmono is None:
                    numeric += rcoeff
                else:
                    rkey = rmono._key
                    if rkey in by_mono:
                        prev, _ = by_mono[rkey]
                        by_mono[rkey] = (prev + rcoeff, rmono)
                    else:
                        by_mono[rkey] = (rcoeff, rmono)
            changed = True
    return numeric


def mul(factors: Iterable[Expr]) -> Expr:
    """Normalized product: flatten, fold numerics, collect equal bases."""
    flat: list[Expr] = []
    for f in factors:
        if isinstance(f, Product):
            flat.extend(f.factors)
        else:
            flat.append(f)

    coeff = Fraction(1)
    exp_args: list[Expr] = []
    by_base: dict[tuple, tuple[Expr, list[Expr]]] = {}
    for f in flat:
        fr = as_fraction(f)
        if fr is not None:
            coeff *= fr
            if coeff == 0:
                return ZERO
            continue
        if isinstance(f, Call) and f.func == "exp":
            exp_args.append(f.arg)
            continue
        if isinstance(f, Power):
            base, exponent = f.base, f.exponent
        else:
            base, exponent = f, ONE
        key = base._key
        if key in by_base:
            by_base[key][1].append(exponent)
        else:
            by_base[key] = (base, [exponent])

    out: list[Expr] = []
    if exp_args:
        merged = call("exp", add(exp_args))
        fr = as_fraction(merged)
        if fr is not None:
            coeff *= fr
        else:
            out.append(merged)
    for base, exponents in by_base.values():
        e = exponents[0] if len(exponents) == 1 else add(exponents)
        p = power(base, e)
        fr = as_fraction(p)
        if fr is not None:
            coeff *= fr
            if coeff == 0:
                return ZERO
        elif isinstance(p, Product):
            # power() may itself fold into a product (e.g. exp peeling)
            for sub in p.factors:
                sfr = as_fraction(sub)
                if sfr is not None:
                    coeff *= sfr
                else:
                    out.append(sub)
        else:
            out.append(p)

    if coeff == 0:
        return ZERO
    if not out:
        return from_fraction(coeff)
    out.sort(key=lambda e: e._key)
    if coeff != 1:
        out.insert(0, from_fraction(coeff))
    if len(out) == 1:
        return out[0]
    return Product(tuple(out))


def power(base: Expr, exponent: Expr) -> Expr:
    """Normalized power with the folding rules the kernel guarantees."""
    if exponent == ZERO:
        return ONE  # includes 0^0 by convention
    if exponent == ONE:
        return base
    if base == ONE:
        return ONE

    bfr = as_fraction(base)
    efr = as_fraction(exponent)
    if bfr is not None and efr is not None and efr.denominator == 1:
        k = efr.numerator
        if bfr == 0:
            if k > 0:
                return ZERO
            return Power(base, exponent)  # 0^negative left opaque
        return from_fraction(bfr**k)
    if bfr is not None and bfr == 0 and efr is not None and efr > 0:
        return ZERO

    # (b^e2)^k folds only for a numeric literal k (sound on the positive
    # domain convention; symbolic outer exponents stay opaque).
    if isinstance(base, Power) and efr is not None:
        return power(base.base, mul([base.exponent, exponent]))

    # (x*y)^k distributes for integer k only.
    if isinstance(base, Product) and efr is not None and efr.denominator == 1:
        return mul([power(f, exponent) for f in base.factors])

    # exp(a)^b -> exp(a*b); exp is positive so this is unconditionally sound.
    if isinstance(base, Call) and base.func == "exp":
        return call("exp", mul([base.arg, exponent]))

    return Power(base, exponent)


def _peel_log_terms(arg: Expr) -> tuple[list[Expr], list[Expr]]:
    """Split exp-argument terms into x^k factors (from k*ln x) and the rest."""
    peeled: list[Expr] = []
    remaining: list[Expr] = []
    for term in sum_terms(arg):
        factors = product_factors(term)
        lns = [f for f in factors if isinstance(f, Call) and f.func == "ln"]
        if len(lns) == 1:
            others = [f for f in factors if f is not lns[0]]
            k = mul(others) if others else ONE
            peeled.append(power(lns[0].arg, k))
        else:
            remaining.append(term)
    return peeled, remaining


def call(func: str, arg: Expr) -> Expr:
    if func == "exp":
        if arg == ZERO:
            return ONE
        if isinstance(arg, Call) and arg.func == "ln":
            return arg.arg
        peeled, remaining = _peel_log_terms(arg)
        if peeled:
            rest = add(remaining) if remaining else ZERO
            factors = list(peeled)
            if rest != ZERO:
                factors.append(Call("exp", rest))
            return mul(factors)
        return Call("exp", arg)
    if func == "ln":
        if arg == ONE:
            return ZERO
        if isinstance(arg, Call) and arg.func == "exp":
            return arg.arg
        return Call("ln", arg)
    if func in ("sin", "tan", "arctan"):
        if arg == ZERO:
            return ZERO
        return Call(func, arg)
    if func == "cos":
        if arg == ZERO:
            return ONE
        return Call(func, arg)
    raise ValueError(f"unknown function {func!r}")


def integral(integrand: Expr, var: str, bounds: Optional[tuple[Expr, Expr]] = None) -> Expr:
    if integrand == ZERO:
        return ZERO
    return Integral(integrand, var, bounds)


def normalize(e: Expr) -> Expr:
    """Canonical normal form; idempotent by construction."""
    if isinstance(e, (Integer, Rational, Parameter, Variable)):
        if isinstance(e, Rational) and e.den == 1:  # defensive; ctor forbids
            return Integer(e.num)
        return e
    if isinstance(e, Sum):
        return add([normalize(t) for t in e.terms])
    if isinstance(e, Product):
        return mul([normalize(f) for f in e.factors])
    if isinstance(e, Power):
        return power(normalize(e.base), normalize(e.exponent))
    if isinstance(e, Call):
        return call(e.func, normalize(e.arg))
    if isinstance(e, Integral):
        b = e.bounds
        if b is not None:
            b = (normalize(b[0]), normalize(b[1]))
        return integral(normalize(e.integrand), e.var, b)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Substitution and free names
# ---------------------------------------------------------------------------

def free_names(e: Expr) -> frozenset[str]:
    """Free variable and parameter names.

    An indefinite integral is a function of its variable, so that name counts
    as free; with bounds the integration variable is bound inside the
    integrand and the bounds contribute their own names.
    """
    if isinstance(e, (Integer, Rational)):
        return frozenset()
    if isinstance(e, (Parameter, Variable)):
        return frozenset((e.name,))
    if isinstance(e, Sum):
        out: frozenset[str] = frozenset()
        for t in e.terms:
            out |= free_names(t)
        return out
    if isinstance(e, Product):
        out = frozenset()
        for f in e.factors:
            out |= free_names(f)
        return out
    if isinstance(e, Power):
        return free_names(e.base) | free_names(e.exponent)
    if isinstance(e, Call):
        return free_names(e.arg)
    if isinstance(e, Integral):
        inner = free_names(e.integrand)
        if e.bounds is None:
            return inner | frozenset((e.var,))
        out = inner - frozenset((e.var,))
        return out | free_names(e.bounds[0]) | free_names(e.bounds[1])
    raise TypeError(f"not an expression: {e!r}")


def substitute(e: Expr, name: str, replacement: Expr) -> Expr:
    """Replace free occurrences of ``name`` and renormalize."""
    replacement = normalize(replacement)

    def walk(node: Expr) -> Expr:
        if isinstance(node, (Integer, Rational)):
            return node
        if isinstance(node, (Parameter, Variable)):
            return replacement if node.name == name else node
        if isinstance(node, Sum):
            return add([walk(t) for t in node.terms])
        if isinstance(node, Product):
            return mul([walk(f) for f in node.factors])
        if isinstance(node, Power):
            return power(walk(node.base), walk(node.exponent))
        if isinstance(node, Call):
            return call(node.func, walk(node.arg))
        if isinstance(node, Integral):
            if node.bounds is None:
                if node.var == name:
                    # F(name) with F an antiderivative: only a plain rename
                    # keeps the node representable.
                    if isinstance(replacement, (Variable, Parameter)):
                        new = substitute(node.integrand, name, replacement)
                        return integral(new, replacement.name, None)
                    raise UnsupportedSubstitutionError(
                        "cannot substitute a compound expression into an "
                        "indefinite integral's variable"
                    )
                return integral(walk(node.integrand), node.var, None)
            lo, hi = node.bounds
            if node.var == name:
                # bound variable shadows the name inside the integrand
                return integral(node.integrand, node.var, (walk(lo), walk(hi)))
            if node.var in free_names(replacement):
                # avoid capture: rename the bound variable first
                fresh = _fresh_name(node.var, free_names(node.integrand) | free_names(replacement) | {name})
                body = substitute(node.integrand, node.var, Variable(fresh))
                return integral(substitute(body, name, replacement), fresh, (walk(lo), walk(hi)))
            return integral(walk(node.integrand), node.var, (walk(lo), walk(hi)))
        raise TypeError(f"not an expression: {node!r}")

    return walk(normalize(e))


def _fresh_name(base: str, taken: frozenset[str] | set[str]) -> str:
    i = 1
    while f"{base}_{i}" in taken:
        i += 1
    return f"{base}_{i}"


# ---------------------------------------------------------------------------
# Size / inspection
# ---------------------------------------------------------------------------

def size(e: Expr) -> int:
    """Node count of the tree."""
    if isinstance(e, (Integer, Rational, Parameter, Variable)):
        return 1
    if isinstance(e, Sum):
        return 1 + sum(size(t) for t in e.terms)
    if isinstance(e, Product):
        return 1 + sum(size(f) for f in e.factors)
    if isinstance(e, Power):
        return 1 + size(e.base) + size(e.exponent)
    if isinstance(e, Call):
        return 1 + size(e.arg)
    if isinstance(e, Integral):
        n = 1 + size(e.integrand)
        if e.bounds is not None:
            n += size(e.bounds[0]) + size(e.bounds[1])
        return n
    raise TypeError(f"not an expression: {e!r}")


def contains_integral(e: Expr) -> bool:
    if isinstance(e, Integral):
        return True
    if isinstance(e, Sum):
        return any(contains_integral(t) for t in e.terms)
    if isinstance(e, Product):
        return any(contains_integral(f) for f in e.factors)
    if isinstance(e, Power):
        return contains_integral(e.base) or contains_integral(e.exponent)
    if isinstance(e, Call):
        return contains_integral(e.arg)
    return False


# ---------------------------------------------------------------------------
# Expansion and polynomial views
# ---------------------------------------------------------------------------

_EXPAND_POWER_CAP = 16


def expand(e: Expr) -> Expr:
    """Distribute products over sums and small integer powers of sums.

    Best effort: powers of sums with exponents above a small cap, negative
    powers and integral nodes are left in place.  The result is normalized.
    """
    if isinstance(e, (Integer, Rational, Parameter, Variable)):
        return e
    if isinstance(e, Sum):
        return add([expand(t) for t in e.terms])
    if isinstance(e, Product):
        parts: list[list[Expr]] = []
        for f in e.factors:
            parts.append(sum_terms(expand(f)))
        acc: list[Expr] = [ONE]
        for terms in parts:
            acc = [mul([a, t]) for a in acc for t in terms]
            # renormalization inside mul may recreate sums; flatten again
            nxt: list[Expr] = []
            for a in acc:
                nxt.extend(sum_terms(a))
            acc = nxt
        return add(acc)
    if isinstance(e, Power):
        base = expand(e.base)
        exponent = expand(e.exponent)
        efr = as_fraction(exponent)
        if (
            isinstance(base, Sum)
            and efr is not None
            and efr.denominator == 1
            and 2 <= efr.numerator <= _EXPAND_POWER_CAP
        ):
            # distribute term-by-term; going through mul() on the whole sum
            # would just refold the power
            base_terms = sum_terms(base)
            acc = list(base_terms)
            for _ in range(efr.numerator - 1):
                nxt: list[Expr] = []
                for x in acc:
                    for y in base_terms:
                        nxt.extend(sum_terms(mul([x, y])))
                acc = nxt
            return add(acc)
        return power(base, exponent)
    if isinstance(e, Call):
        return call(e.func, expand(e.arg))
    if isinstance(e, Integral):
        b = e.bounds
        if b is not None:
            b = (expand(b[0]), expand(b[1]))
        return integral(expand(e.integrand), e.var, b)
    raise TypeError(f"not an expression: {e!r}")


def poly_coefficients(e: Expr, var: str) -> Optional[dict[int, Expr]]:
    """Coefficients of ``e`` viewed as a polynomial in ``var``.

    Returns None when ``var`` occurs inside a function call, an integral, a
    symbolic or negative power, or any other non-polynomial position.  Keys
    with zero coefficients are dropped; the zero polynomial gives ``{}``.
    """
    acc: dict[int, list[Expr]] = {}
    for term in sum_terms(expand(e)):
        deg = 0
        rest: list[Expr] = []
        for f in product_factors(term):
            if isinstance(f, Variable) and f.name == var:
                deg += 1
                continue
            if (
                isinstance(f, Power)
                and isinstance(f.base, Variable)
                and f.base.name == var
            ):
                k = as_fraction(f.exponent)
                if k is None or k.denominator != 1 or k < 0:
                    return None
                deg += k.numerator
                continue
            if var in free_names(f):
                return None
            rest.append(f)
        acc.setdefault(deg, []).append(mul(rest) if rest else ONE)
    out: dict[int, Expr] = {}
    for deg, parts in acc.items():
        s = add(parts)
        if s != ZERO:
            out[deg] = s
    return out


# ---------------------------------------------------------------------------
# Numeric evaluation
# ---------------------------------------------------------------------------

def eval_numeric(e: Expr, bindings: Bindings) -> float:
    """Evaluate to a float; all free names must be bound.

    Unevaluated integrals with bounds evaluate by adaptive quadrature
    (absolute/relative tolerance 1e-10); indefinite ones are an error.
    """
    if isinstance(e, Integer):
        return float(e.value)
    if isinstance(e, Rational):
        return e.num / e.den
    if isinstance(e, (Parameter, Variable)):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise UnboundNameError(f"unbound name {e.name!r}") from None
    if isinstance(e, Sum):
        return math.fsum(eval_numeric(t, bindings) for t in e.terms)
    if isinstance(e, Product):
        out = 1.0
        for f in e.factors:
            out *= eval_numeric(f, bindings)
        return out
    if isinstance(e, Power):
        b = eval_numeric(e.base, bindings)
        x = eval_numeric(e.exponent, bindings)
        if b == 0.0 and x < 0:
            raise DomainEvalError("division by zero (0 raised to negative power)")
        if b < 0.0 and not float(x).is_integer():
            raise DomainEvalError(f"negative base {b!r} with non-integer exponent {x!r}")
        try:
            return float(b**x)
        except OverflowError as exc:
            raise DomainEvalError(str(exc)) from None
    if isinstance(e, Call):
        v = eval_numeric(e.arg, bindings)
        if e.func == "exp":
            try:
                return math.exp(v)
            except OverflowError as exc:
                raise DomainEvalError(str(exc)) from None
        if e.func == "ln":
            if v <= 0.0:
                raise DomainEvalError(f"ln of non-positive value {v!r}")
            return math.log(v)
        if e.func == "sin":
            return math.sin(v)
        if e.func == "cos":
            return math.cos(v)
        if e.func == "tan":
            return math.tan(v)
        if e.func == "arctan":
            return math.atan(v)
        raise ValueError(f"unknown function {e.func!r}")
    if isinstance(e, Integral):
        if e.bounds is None:
            raise UnboundedIntegralError(
                "cannot numerically evaluate an indefinite integral"
            )
        from scipy import integrate as _sciint

        lo = eval_numeric(e.bounds[0], bindings)
        hi = eval_numeric(e.bounds[1], bindings)

        def f(x: float) -> float:
            inner = dict(bindings)
            inner[e.var] = x
            return eval_numeric(e.integrand, inner)

        val, _err = _sciint.quad(f, lo, hi, epsabs=1e-10, epsrel=1e-10, limit=200)
        return float(val)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Zero-equivalence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroVerdict:
    """Outcome of a zero-equivalence check."""

    status: str  # "proven-zero" | "numeric-zero" | "nonzero"
    max_residual: Optional[float] = None
    witness: Optional[dict[str, float]] = None
    samples: int = 0

    @property
    def is_zero(self) -> bool:
        return self.status in ("proven-zero", "numeric-zero")


def _term_scale(e: Expr, bindings: Bindings) -> float:
    """Magnitude reference for relative tolerance: the largest additive term."""
    best = 1.0
    for t in sum_terms(e):
        try:
            best = max(best, abs(eval_numeric(t, bindings)))
        except ExprError:
            continue
    return best


def equivalent_zero(
    e: Expr,
    *,
    tol: float = 1e-9,
    n_samples: int = 24,
    seed: int = DEFAULT_SEED,
    window: tuple[float, float] = DEFAULT_WINDOW,
    windows: Optional[Mapping[str, tuple[float, float]]] = None,
    fixed: Optional[Bindings] = None,
    max_redraws: int = 5,
) -> ZeroVerdict:
    """Decide whether ``e`` is identically zero.

    Proven when the normal form is literally 0; otherwise the expression is
    probed at pseudo-random bindings (fixed seed, default window dodging the
    poles at 0) and judged zero when every sample is below ``tol`` relative
    to the magnitude of its largest additive term.  A sample that hits a pole
    or a log of a non-positive value is redrawn at most ``max_redraws`` times
    before the singularity surfaces as an error.
    """
    en = normalize(e)
    if en == ZERO:
        return ZeroVerdict("proven-zero")

    fixed = dict(fixed or {})
    names = sorted(free_names(en) - set(fixed))
    rng = np.random.default_rng(seed)
    max_res = 0.0
    for _ in range(n_samples):
        for attempt in range(max_redraws + 1):
            bindings = dict(fixed)
            for name in names:
                lo, hi = (windows or {}).get(name, window)
                bindings[name] = float(rng.uniform(lo, hi))
            try:
                value = eval_numeric(en, bindings)
                scale = _term_scale(en, bindings)
                break
            except ExprError:
                if attempt == max_redraws:
                    raise EvaluationSingularError(
                        f"sampling kept hitting singularities near {bindings!r}"
                    ) from None
        if not math.isfinite(value):
            return ZeroVerdict("nonzero", max_residual=float("inf"), witness=bindings, samples=n_samples)
        rel = abs(value) / scale
        max_res = max(max_res, rel)
        if rel >= tol:
            return ZeroVerdict("nonzero", max_residual=rel, witness=bindings, samples=n_samples)
    return ZeroVerdict("numeric-zero", max_residual=max_res, samples=n_samples)
