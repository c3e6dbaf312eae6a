"""Real expression trees: the common language for weights and phases.

Variables are named x1, x2, ... (1-based in text, 0-based as ``Var.index``).
Identifiers that are not variables or builtin functions are free parameters,
bound at evaluation time. Trees are immutable and compare structurally.

The ``bump`` atom is exp(-1/(1-u^2)) for |u| < 1 and 0 elsewhere: smooth,
compactly supported, and closed under the jet arithmetic in ``jets``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

from .errors import DomainViolation, ExprParseError, UnboundParameter

FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "bump")

# |u| within BUMP_EDGE_TOL of 1 is treated as outside the open support; the
# true value there is below double-precision underflow anyway.
BUMP_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class Var:
    index: int  # 0-based


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Add:
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class Sub:
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class Mul:
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class Div:
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class Neg:
    a: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: float  # must be a literal constant; see parser


@dataclass(frozen=True)
class Func:
    name: str  # one of FUNCTIONS
    arg: "Expr"


Expr = Union[Var, Param, Const, Add, Sub, Mul, Div, Neg, Pow, Func]


def bump_value(u: float) -> float:
    if abs(u) >= 1.0 - BUMP_EDGE_TOL:
        return 0.0
    return math.exp(-1.0 / (1.0 - u * u))


def is_integer_exponent(p: float) -> bool:
    return p == math.floor(p) and abs(p) < 1e15


def _pow_real(base: float, p: float) -> float:
    if is_integer_exponent(p):
        if base == 0.0 and p < 0:
            raise DomainViolation(f"0.0 raised to negative power {p}")
        return base ** p
    if base <= 0.0:
        raise DomainViolation(f"fractional power of non-positive base {base}")
    return base ** p


def evaluate(e: Expr, x: tuple, params: Mapping[str, float] | None = None) -> complex:
    """Evaluate at a real point. Returns complex with zero imaginary part."""
    return complex(_eval_real(e, x, params or {}))


def _eval_real(e: Expr, x, params) -> float:
    match e:
        case Var(index=i):
            if i >= len(x):
                raise DomainViolation(f"variable x{i + 1} given no value")
            return float(x[i])
        case Param(name=n):
            try:
                return float(params[n])
            except KeyError:
                raise UnboundParameter(f"parameter {n!r} is unbound") from None
        case Const(value=v):
            return v
        case Add(a=a, b=b):
            return _eval_real(a, x, params) + _eval_real(b, x, params)
        case Sub(a=a, b=b):
            return _eval_real(a, x, params) - _eval_real(b, x, params)
        case Mul(a=a, b=b):
            return _eval_real(a, x, params) * _eval_real(b, x, params)
        case Div(a=a, b=b):
            den = _eval_real(b, x, params)
            if den == 0.0:
                raise DomainViolation("division by zero")
            return _eval_real(a, x, params) / den
        case Neg(a=a):
            return -_eval_real(a, x, params)
        case Pow(base=b, exponent=p):
            return _pow_real(_eval_real(b, x, params), p)
        case Func(name=name, arg=a):
            v = _eval_real(a, x, params)
            if name == "exp":
                return math.exp(v)
            if name == "log":
                if v <= 0.0:
                    raise DomainViolation(f"log of non-positive value {v}")
                return math.log(v)
            if name == "sqrt":
                if v < 0.0:
                    raise DomainViolation(f"sqrt of negative value {v}")
                return math.sqrt(v)
            if name == "sin":
                return math.sin(v)
            if name == "cos":
                return math.cos(v)
            if name == "bump":
                return bump_value(v)
    raise TypeError(f"not an Expr node: {e!r}")


def free_vars(e: Expr) -> set[int]:
    match e:
        case Var(index=i):
            return {i}
        case Param() | Const():
            return set()
        case Add(a=a, b=b) | Sub(a=a, b=b) | Mul(a=a, b=b) | Div(a=a, b=b):
            return free_vars(a) | free_vars(b)
        case Neg(a=a) | Func(arg=a) | Pow(base=a):
            return free_vars(a)
    raise TypeError(f"not an Expr node: {e!r}")


def free_params(e: Expr) -> set[str]:
    match e:
        case Param(name=n):
            return {n}
        case Var() | Const():
            return set()
        case Add(a=a, b=b) | Sub(a=a, b=b) | Mul(a=a, b=b) | Div(a=a, b=b):
            return free_params(a) | free_params(b)
        case Neg(a=a) | Func(arg=a) | Pow(base=a):
            return free_params(a)
    raise TypeError(f"not an Expr node: {e!r}")


def substitute(e: Expr, replacements: Mapping[int, Expr]) -> Expr:
    """Replace variables by expressions (simultaneous substitution)."""
    match e:
        case Var(index=i):
            return replacements.get(i, e)
        case Param() | Const():
            return e
        case Add(a=a, b=b):
            return Add(substitute(a, replacements), substitute(b, replacements))
        case Sub(a=a, b=b):
            return Sub(substitute(a, replacements), substitute(b, replacements))
        case Mul(a=a, b=b):
            return Mul(substitute(a, replacements), substitute(b, replacements))
        case Div(a=a, b=b):
            return Div(substitute(a, replacements), substitute(b, replacements))
        case Neg(a=a):
            return Neg(substitute(a, replacements))
        case Pow(base=b, exponent=p):
            return Pow(substitute(b, replacements), p)
        case Func(name=n, arg=a):
            return Func(n, substitute(a, replacements))
    raise TypeError(f"not an Expr node: {e!r}")


def bind_params(e: Expr, params: Mapping[str, float]) -> Expr:
    """Replace named parameters by constants (missing names stay symbolic)."""
    match e:
        case Param(name=n):
            return Const(float(params[n])) if n in params else e
        case Var() | Const():
            return e
        case Add(a=a, b=b):
            return Add(bind_params(a, params), bind_params(b, params))
        case Sub(a=a, b=b):
            return Sub(bind_params(a, params), bind_params(b, params))
        case Mul(a=a, b=b):
            return Mul(bind_params(a, params), bind_params(b, params))
        case Div(a=a, b=b):
            return Div(bind_params(a, params), bind_params(b, params))
        case Neg(a=a):
            return Neg(bind_params(a, params))
        case Pow(base=b, exponent=p):
            return Pow(bind_params(b, params), p)
        case Func(name=n, arg=a):
            return Func(n, bind_params(a, params))
    raise TypeError(f"not an Expr node: {e!r}")


def fold(e: Expr) -> Expr:
    """Collapse parameter-free, variable-free subtrees to constants."""

    def rec(node: Expr) -> tuple[Expr, bool]:
        match node:
            case Const():
                return node, True
            case Var() | Param():
                return node, False
            case Neg(a=a):
                fa, ca = rec(a)
                if ca:
                    return Const(-fa.value), True
                return Neg(fa), False
            case Pow(base=b, exponent=p):
                fb, cb = rec(b)
                if cb:
                    return Const(_pow_real(fb.value, p)), True
                return Pow(fb, p), False
            case Func(name=n, arg=a):
                fa, ca = rec(a)
                if ca:
                    return Const(_eval_real(Func(n, fa), (), {})), True
                return Func(n, fa), False
            case Add(a=a, b=b) | Sub(a=a, b=b) | Mul(a=a, b=b) | Div(a=a, b=b):
                fa, ca = rec(node.a)
                fb, cb = rec(node.b)
                rebuilt = type(node)(fa, fb)
                if ca and cb:
                    return Const(_eval_real(rebuilt, (), {})), True
                return rebuilt, False
        raise TypeError(f"not an Expr node: {node!r}")

    out, _ = rec(e)
    return out


def bind_vars(e: Expr, values: Mapping[int, float]) -> Expr:
    """Pin some variables to constants, then fold."""
    reps = {i: Const(float(v)) for i, v in values.items()}
    return fold(substitute(e, reps))


def differentiate(e: Expr, var: int) -> Expr:
    """Symbolic derivative with respect to one variable.

    Used for phase-rate scans; bump nodes are excluded on purpose (their
    derivative has a removable 0*inf form at the support edge, so bump
    derivatives are only taken through jet arithmetic).
    """
    d = _diff(e, var)
    return fold(d)


def _diff(e: Expr, var: int) -> Expr:
    zero = Const(0.0)
    match e:
        case Var(index=i):
            return Const(1.0) if i == var else zero
        case Param() | Const():
            return zero
        case Add(a=a, b=b):
            return Add(_diff(a, var), _diff(b, var))
        case Sub(a=a, b=b):
            return Sub(_diff(a, var), _diff(b, var))
        case Mul(a=a, b=b):
            return Add(Mul(_diff(a, var), b), Mul(a, _diff(b, var)))
        case Div(a=a, b=b):
            return Div(Sub(Mul(_diff(a, var), b), Mul(a, _diff(b, var))), Mul(b, b))
        case Neg(a=a):
            return Neg(_diff(a, var))
        case Pow(base=b, exponent=p):
            if var not in free_vars(b):
                return zero
            return Mul(Mul(Const(p), Pow(b, p - 1.0)), _diff(b, var))
        case Func(name=name, arg=a):
            if var not in free_vars(a):
                return zero
            da = _diff(a, var)
            if name == "exp":
                return Mul(Func("exp", a), da)
            if name == "log":
                return Div(da, a)
            if name == "sqrt":
                return Div(da, Mul(Const(2.0), Func("sqrt", a)))
            if name == "sin":
                return Mul(Func("cos", a), da)
            if name == "cos":
                return Neg(Mul(Func("sin", a), da))
            raise DomainViolation(
                "bump has no safe closed-form derivative at its support edge; "
                "differentiate it through jets instead"
            )
    raise TypeError(f"not an Expr node: {e!r}")


# --- parser ---------------------------------------------------------------

_OPS = set("+-*/^()")


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1
        self.tokens: list[tuple[str, str, int, int]] = []
        self._run()

    def _error(self, msg: str):
        raise ExprParseError(msg, self.line, self.col)

    def _run(self):
        text = self.text
        n = len(text)
        while self.pos < n:
            c = text[self.pos]
            if c == "\n":
                self.pos += 1
                self.line += 1
                self.col = 1
                continue
            if c in " \t\r":
                self.pos += 1
                self.col += 1
                continue
            start_line, start_col = self.line, self.col
            if c in _OPS:
                self.tokens.append(("op", c, start_line, start_col))
                self.pos += 1
                self.col += 1
                continue
            if c.isdigit() or c == ".":
                j = self.pos
                seen_dot = False
                while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                    if text[j] == ".":
                        seen_dot = True
                    j += 1
                if j < n and text[j] in "eE":
                    k = j + 1
                    if k < n and text[k] in "+-":
                        k += 1
                    if k < n and text[k].isdigit():
                        while k < n and text[k].isdigit():
                            k += 1
                        j = k
                lit = text[self.pos : j]
                try:
                    float(lit)
                except ValueError:
                    self._error(f"bad number literal {lit!r}")
                self.tokens.append(("num", lit, start_line, start_col))
                self.col += j - self.pos
                self.pos = j
                continue
            if c.isalpha() or c == "_":
                j = self.pos
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.tokens.append(("ident", text[self.pos : j], start_line, start_col))
                self.col += j - self.pos
                self.pos = j
                continue
            self._error(f"unexpected character {c!r}")


class _Parser:
    def __init__(self, text: str):
        self.tokens = _Tokenizer(text).tokens
        self.i = 0

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _next(self):
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else ("", "", 1, 1)
            raise ExprParseError("unexpected end of expression", last[2], last[3] + len(last[1]))
        self.i += 1
        return tok

    def _expect_op(self, op: str):
        tok = self._next()
        if tok[0] != "op" or tok[1] != op:
            raise ExprParseError(f"expected {op!r}, got {tok[1]!r}", tok[2], tok[3])

    def parse(self) -> Expr:
        e = self._expr()
        tok = self._peek()
        if tok is not None:
            raise ExprParseError(f"trailing input starting at {tok[1]!r}", tok[2], tok[3])
        return e

    def _expr(self) -> Expr:
        e = self._term()
        while True:
            tok = self._peek()
            if tok and tok[0] == "op" and tok[1] in "+-":
                self.i += 1
                rhs = self._term()
                e = Add(e, rhs) if tok[1] == "+" else Sub(e, rhs)
            else:
                return e

    def _term(self) -> Expr:
        e = self._unary()
        while True:
            tok = self._peek()
            if tok and tok[0] == "op" and tok[1] in "*/":
                self.i += 1
                rhs = self._unary()
                e = Mul(e, rhs) if tok[1] == "*" else Div(e, rhs)
            else:
                return e

    def _unary(self) -> Expr:
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self.i += 1
            return Neg(self._unary())
        return self._power()

    def _power(self) -> Expr:
        base = self._atom()
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] == "^":
            self.i += 1
            where = self._peek() or tok
            exponent = self._unary()
            folded = fold(exponent)
            if not isinstance(folded, Const):
                raise ExprParseError("exponent must fold to a constant", where[2], where[3])
            return Pow(base, folded.value)
        return base

    def _atom(self) -> Expr:
        tok = self._next()
        kind, lit, line, col = tok
        if kind == "num":
            return Const(float(lit))
        if kind == "op" and lit == "(":
            e = self._expr()
            self._expect_op(")")
            return e
        if kind == "ident":
            if lit in FUNCTIONS:
                self._expect_op("(")
                arg = self._expr()
                self._expect_op(")")
                return Func(lit, arg)
            if len(lit) >= 2 and lit[0] == "x" and lit[1:].isdigit():
                idx = int(lit[1:])
                if idx == 0:
                    raise ExprParseError("variables are numbered from x1", line, col)
                return Var(idx - 1)
            return Param(lit)
        raise ExprParseError(f"unexpected token {lit!r}", line, col)


def parse(text: str) -> Expr:
    """Parse expression text; errors carry line and column."""
    return _Parser(text).parse()


def render(e: Expr) -> str:
    """Expression text that parses back to an equal tree."""
    return _render(e, 0)


# precedence levels: 0 add, 1 mul, 2 unary, 3 power, 4 atom
def _render(e: Expr, ctx: int) -> str:
    match e:
        case Var(index=i):
            return f"x{i + 1}"
        case Param(name=n):
            return n
        case Const(value=v):
            s = repr(v)
            return f"({s})" if v < 0 and ctx >= 2 else s
        case Add(a=a, b=b):
            s = f"{_render(a, 0)} + {_render(b, 1)}"
            return f"({s})" if ctx > 0 else s
        case Sub(a=a, b=b):
            s = f"{_render(a, 0)} - {_render(b, 1)}"
            return f"({s})" if ctx > 0 else s
        case Mul(a=a, b=b):
            s = f"{_render(a, 1)}*{_render(b, 2)}"
            return f"({s})" if ctx > 1 else s
        case Div(a=a, b=b):
            s = f"{_render(a, 1)}/{_render(b, 2)}"
            return f"({s})" if ctx > 1 else s
        case Neg(a=a):
            s = f"-{_render(a, 2)}"
            return f"({s})" if ctx > 2 else s
        case Pow(base=b, exponent=p):
            ps = repr(p) if p >= 0 else f"({repr(p)})"
            s = f"{_render(b, 4)}^{ps}"
            return f"({s})" if ctx > 3 else s
        case Func(name=n, arg=a):
            return f"{n}({_render(a, 0)})"
    raise TypeError(f"not an Expr node: {e!r}")
