"""Text grammar for expressions and ODE problems, plus renderers.

Grammar (plain form)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | atom ['^' factor]
    atom   := number | name | name '(' args ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so ``-t^2``
reads as ``-(t^2)``.  Implicit multiplication is rejected.  Numbers are
integers; rationals are written ``p/q`` and fold exactly.  ``ln(t)^l`` parses
as ``(ln t)^l``.  The callable names are the kernel functions plus
``integrate(f, v)`` / ``integrate(f, v, lo, hi)`` so that every normalized
expression round-trips through :func:`render`.

ODE problems are written ``diff(u,t) = <expr>`` with optional clauses
``, at t=<expr>`` (base point) and ``, const <name>``.
"""

from __future__ import annotations

import json as _json
from dataclasses import dataclass, field
from typing import Optional

from .expr import (
    FUNCTIONS,
    Call,
    Expr,
    Integer,
    Integral,
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
    contains_integral,
    free_names,
    integral,
    mul,
    normalize,
    power,
    split_coefficient,
    sum_terms,
)

__all__ = [
    "ParseError",
    "ODEProblem",
    "parse_expr",
    "parse_ode",
    "render",
    "DEFAULT_VARIABLES",
]

DEFAULT_VARIABLES = frozenset({"t", "u", "c"})


class ParseError(Exception):
    """Syntax error with position information.

    ``offset`` is a byte offset into the UTF-8 encoding of the input.
    """

    def __init__(self, text: str, pos: int, expected: str, found: str):
        self.offset = len(text[:pos].encode("utf-8"))
        self.expected = expected
        self.found = found
        super().__init__(f"at offset {self.offset}: expected {expected}, found {found}")


@dataclass(frozen=True)
class ODEProblem:
    """A first-order problem du/dt = f(t, u).

    ``base_point`` absent means indefinite-integral mode; ``const_name``
    names the integration constant of general solutions.
    """

    rhs: Expr
    indep: str = "t"
    dep: str = "u"
    base_point: Optional[Expr] = None
    const_name: str = "c"

    def __post_init__(self) -> None:
        if self.dep == self.indep:
            raise ValueError("dependent and independent variables must differ")
        if _mentions_dep_integral(self.rhs, self.dep):
            raise ValueError("right-hand side may not integrate the dependent variable")
        if self.base_point is not None:
            extra = free_names(self.base_point)
            if extra:
                raise ValueError(f"base point must be a pure literal, has names {sorted(extra)}")


def _mentions_dep_integral(e: Expr, dep: str) -> bool:
    if isinstance(e, Integral):
        if dep in free_names(e.integrand):
            return True
        inner = _mentions_dep_integral(e.integrand, dep)
        if e.bounds is not None:
            inner = inner or _mentions_dep_integral(e.bounds[0], dep)
            inner = inner or _mentions_dep_integral(e.bounds[1], dep)
        return inner
    if isinstance(e, Sum):
        return any(_mentions_dep_integral(t, dep) for t in e.terms)
    if isinstance(e, Product):
        return any(_mentions_dep_integral(f, dep) for f in e.factors)
    if isinstance(e, Power):
        return _mentions_dep_integral(e.base, dep) or _mentions_dep_integral(e.exponent, dep)
    if isinstance(e, Call):
        return _mentions_dep_integral(e.arg, dep)
    return False


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_PUNCT = {"+", "-", "*", "/", "^", "(", ")", ",", "="}


@dataclass
class _Token:
    kind: str  # "int" | "name" | punctuation | "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("int", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], i))
            i = j
            continue
        if ch in _PUNCT:
            tokens.append(_Token(ch, ch, i))
            i += 1
            continue
        raise ParseError(text, i, "a token", repr(ch))
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: frozenset[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = variables

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(self.text, tok.pos, repr(kind), self._describe(tok))
        return self.next()

    def _describe(self, tok: _Token) -> str:
        return "end of input" if tok.kind == "end" else repr(tok.text)

    # expr := term (('+'|'-') term)*
    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            t = self.term()
            terms.append(t if op == "+" else mul([Integer(-1), t]))
        return add(terms)

    # term := factor (('*'|'/') factor)*
    def term(self) -> Expr:
        factors = [self.factor()]
        while self.peek().kind in ("*", "/"):
            op = self.next().kind
            f = self.factor()
            factors.append(f if op == "*" else power(f, Integer(-1)))
        return mul(factors)

    # factor := '-' factor | atom ['^' factor]
    def factor(self) -> Expr:
        if self.peek().kind == "-":
            self.next()
            return mul([Integer(-1), self.factor()])
        base = self.atom()
        if self.peek().kind == "^":
            self.next()
            return power(base, self.factor())
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return Integer(int(tok.text))
        if tok.kind == "(":
            self.next()
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind == "name":
            self.next()
            if self.peek().kind == "(":
                return self._call(tok)
            if tok.text in self.variables:
                return Variable(tok.text)
            return Parameter(tok.text)
        raise ParseError(self.text, tok.pos, "a number, name or '('", self._describe(tok))

    def _call(self, name_tok: _Token) -> Expr:
        self.expect("(")
        args = [self.expr()]
        while self.peek().kind == ",":
            self.next()
            args.append(self.expr())
        self.expect(")")
        name = name_tok.text
        if name in FUNCTIONS:
            if len(args) != 1:
                raise ParseError(self.text, name_tok.pos, f"one argument to {name}", f"{len(args)} arguments")
            return call(name, args[0])
        if name == "integrate":
            if len(args) not in (2, 4):
                raise ParseError(
                    self.text, name_tok.pos, "integrate(f, v) or integrate(f, v, lo, hi)", f"{len(args)} arguments"
                )
            var = args[1]
            if not isinstance(var, (Variable, Parameter)):
                raise ParseError(self.text, name_tok.pos, "a variable name as second argument", "an expression")
            bounds = (args[2], args[3]) if len(args) == 4 else None
            return integral(args[0], var.name, bounds)
        raise ParseError(self.text, name_tok.pos, "a known function name", repr(name))


def parse_expr(text: str, variables: frozenset[str] = DEFAULT_VARIABLES) -> Expr:
    """Parse an expression; raises :class:`ParseError` on the first violation."""
    p = _Parser(text, variables)
    e = p.expr()
    tok = p.peek()
    if tok.kind != "end":
        raise ParseError(text, tok.pos, "end of input", p._describe(tok))
    return normalize(e)


def parse_ode(text: str) -> ODEProblem:
    """Parse ``diff(u,t) = <expr>`` with optional ``at``/``const`` clauses."""
    head, _, rest = text.partition("=")
    if not _:
        raise ParseError(text, len(text), "'='", "end of input")
    p = _Parser(head, DEFAULT_VARIABLES)
    name = p.expect("name")
    if name.text != "diff":
        raise ParseError(text, name.pos, "'diff'", repr(name.text))
    p.expect("(")
    dep = p.expect("name").text
    p.expect(",")
    indep = p.expect("name").text
    p.expect(")")
    if p.peek().kind != "end":
        raise ParseError(text, p.peek().pos, "'='", p._describe(p.peek()))

    # split optional clauses off the right-hand side at top-level commas
    clauses = _split_top_level(rest)
    rhs_text, extras = clauses[0], clauses[1:]
    base_point: Optional[Expr] = None
    const_name = "c"
    offset = len(head) + 1
    for clause in extras:
        stripped = clause.strip()
        if stripped.startswith("at "):
            _, _, binding = stripped.partition(" ")
            var, eq, value = binding.partition("=")
            if var.strip() != indep or not eq:
                raise ParseError(text, offset, f"'at {indep}=<expr>'", repr(stripped))
            base_point = parse_expr(value, frozenset())
        elif stripped.startswith("const "):
            const_name = stripped.split(None, 1)[1].strip()
            if not const_name.isidentifier():
                raise ParseError(text, offset, "a constant name", repr(const_name))
        else:
            raise ParseError(text, offset, "'at' or 'const' clause", repr(stripped))

    if "diff" in rhs_text:
        raise ParseError(text, offset + rhs_text.index("diff"), "no diff(...) on the right-hand side", "'diff'")
    variables = frozenset({indep, dep, const_name})
    rhs = parse_expr(rhs_text, variables)
    return ODEProblem(rhs=rhs, indep=indep, dep=dep, base_point=base_point, const_name=const_name)


def _split_top_level(text: str) -> list[str]:
    parts: list[str] = []
    depth = 0
    cur: list[str] = []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


# ---------------------------------------------------------------------------
# Renderers
# ---------------------------------------------------------------------------

# precedence levels used for parenthesization
_P_SUM, _P_TERM, _P_NEG, _P_POW, _P_ATOM = 1, 2, 3, 4, 5


def render(e: Expr, fmt: str = "plain") -> str:
    """Render an expression; ``fmt`` is 'plain', 'latex' or 'json'.

    The plain form re-parses to a structurally equal expression.
    """
    if fmt == "plain":
        return _plain(e, _P_SUM)
    if fmt == "latex":
        return _latex(e, _P_SUM)
    if fmt == "json":
        return _json.dumps(_to_json(e), separators=(",", ":"))
    raise ValueError(f"unknown format {fmt!r}")


def _plain(e: Expr, ctx: int) -> str:
    if isinstance(e, Integer):
        s = str(e.value)
        return _wrap(s, _P_NEG if e.value < 0 else _P_ATOM, ctx)
    if isinstance(e, Rational):
        s = f"{e.num}/{e.den}"
        return _wrap(s, _P_NEG if e.num < 0 else _P_TERM, ctx)
    if isinstance(e, (Parameter, Variable)):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({_plain(e.arg, _P_SUM)})"
    if isinstance(e, Integral):
        inner = _plain(e.integrand, _P_SUM)
        if e.bounds is None:
            return f"integrate({inner}, {e.var})"
        lo, hi = e.bounds
        return f"integrate({inner}, {e.var}, {_plain(lo, _P_SUM)}, {_plain(hi, _P_SUM)})"
    if isinstance(e, Power):
        base = _plain(e.base, _P_ATOM)
        exponent = _plain(e.exponent, _P_SUM)
        if not _is_atom_str(exponent):
            exponent = f"({exponent})"
        return _wrap(f"{base}^{exponent}", _P_POW, ctx)
    if isinstance(e, Product):
        parts: list[str] = []
        neg = False
        for f in e.factors:
            if f == Integer(-1):
                neg = not neg
                continue
            parts.append(_plain(f, _P_NEG))
        s = "*".join(parts) if parts else "1"
        if neg:
            return _wrap(f"-{s}", _P_SUM, ctx)
        return _wrap(s, _P_TERM, ctx)
    if isinstance(e, Sum):
        parts = [_plain(e.terms[0], _P_SUM if _leading_negative(e.terms[0]) else _P_TERM)]
        for t in e.terms[1:]:
            coeff, mono = split_coefficient(t)
            if coeff < 0:
                flipped = mul([Integer(-1), t])
                parts.append(f" - {_plain(flipped, _P_TERM)}")
            else:
                parts.append(f" + {_plain(t, _P_TERM)}")
        return _wrap("".join(parts), _P_SUM, ctx)
    raise TypeError(f"not an expression: {e!r}")


def _leading_negative(t: Expr) -> bool:
    coeff, _ = split_coefficient(t)
    return coeff < 0


def _wrap(s: str, prec: int, ctx: int) -> str:
    return f"({s})" if prec < ctx else s


def _is_atom_str(s: str) -> bool:
    return s.isalnum() or s.replace("_", "").isalnum()


_LATEX_FUNCS = {
    "exp": r"\exp",
    "ln": r"\ln",
    "sin": r"\sin",
    "cos": r"\cos",
    "tan": r"\tan",
    "arctan": r"\arctan",
}


def _latex(e: Expr, ctx: int) -> str:
    if isinstance(e, Integer):
        return _wrap(str(e.value), _P_NEG if e.value < 0 else _P_ATOM, ctx)
    if isinstance(e, Rational):
        s = rf"\frac{{{e.num}}}{{{e.den}}}"
        return _wrap(s, _P_NEG if e.num < 0 else _P_ATOM, ctx)
    if isinstance(e, (Parameter, Variable)):
        return e.name if len(e.name) == 1 else rf"\mathrm{{{e.name}}}"
    if isinstance(e, Call):
        return rf"{_LATEX_FUNCS[e.func]}\left({_latex(e.arg, _P_SUM)}\right)"
    if isinstance(e, Integral):
        body = rf"{_latex(e.integrand, _P_TERM)}\,d{e.var}"
        if e.bounds is None:
            return rf"\int {body}"
        lo, hi = e.bounds
        return rf"\int_{{{_latex(lo, _P_SUM)}}}^{{{_latex(hi, _P_SUM)}}} {body}"
    if isinstance(e, Power):
        return _wrap(rf"{_latex(e.base, _P_ATOM)}^{{{_latex(e.exponent, _P_SUM)}}}", _P_POW, ctx)
    if isinstance(e, Product):
        parts = [_latex(f, _P_NEG) for f in e.factors]
        return _wrap(r" \cdot ".join(parts), _P_TERM, ctx)
    if isinstance(e, Sum):
        out = _latex(e.terms[0], _P_TERM if not _leading_negative(e.terms[0]) else _P_SUM)
        for t in e.terms[1:]:
            coeff, _ = split_coefficient(t)
            if coeff < 0:
                out += f" - {_latex(mul([Integer(-1), t]), _P_TERM)}"
            else:
                out += f" + {_latex(t, _P_TERM)}"
        return _wrap(out, _P_SUM, ctx)
    raise TypeError(f"not an expression: {e!r}")


def _to_json(e: Expr) -> dict:
    if isinstance(e, Integer):
        return {"kind": "integer", "value": str(e.value)}
    if isinstance(e, Rational):
        return {"kind": "rational", "num": str(e.num), "den": str(e.den)}
    if isinstance(e, Parameter):
        return {"kind": "parameter", "name": e.name}
    if isinstance(e, Variable):
        return {"kind": "variable", "name": e.name}
    if isinstance(e, Sum):
        return {"kind": "sum", "children": [_to_json(t) for t in e.terms]}
    if isinstance(e, Product):
        return {"kind": "product", "children": [_to_json(f) for f in e.factors]}
    if isinstance(e, Power):
        return {"kind": "power", "children": [_to_json(e.base), _to_json(e.exponent)]}
    if isinstance(e, Call):
        return {"kind": "call", "func": e.func, "children": [_to_json(e.arg)]}
    if isinstance(e, Integral):
        doc = {"kind": "integral", "var": e.var, "children": [_to_json(e.integrand)]}
        if e.bounds is not None:
            doc["bounds"] = [_to_json(e.bounds[0]), _to_json(e.bounds[1])]
        return doc
    raise TypeError(f"not an expression: {e!r}")
