"""Expression trees over coordinate symbols.

Expressions are immutable dataclass nodes.  They are produced either by
:func:`parse_expr` (faithful to the grammar, no rewriting) or by combining
nodes with the Python arithmetic operators, which apply light constant
folding (``0 + e -> e``, ``1 * e -> e`` ...) so that generated trees stay small.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | base ('^' signed_number)?
    base   := number | ident | '(' expr ')' | func '(' expr ')'
    func   := exp | log | sin | cos | sqrt
    ident  := x1 | x2 | y1 | y2

A unary minus applied directly to a numeric literal is folded into a negative
literal, which makes ``parse_expr(to_string(e)) == e`` hold for every parsed
expression.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "Expr", "Num", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Func",
    "Potential", "ExprError", "ExprSyntaxError", "UnknownIdentifierError",
    "ArityError", "DomainError", "FUNCTIONS", "SURFACE_VARS", "EXTENSION_VARS",
    "parse_expr", "to_string", "as_expr", "free_vars", "diff", "substitute",
    "evaluate",
]

SURFACE_VARS = ("x1", "x2")
EXTENSION_VARS = ("x1", "x2", "y1", "y2")
FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ArityError(ExprSyntaxError):
    pass


class DomainError(ExprError):
    """Raised when an expression is evaluated outside its domain."""


def as_expr(value) -> "Expr":
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.integer, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            raise ExprError(f"non-finite literal {value!r}")
        return Num(v)
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


def _is_num(e, v=None) -> bool:
    return isinstance(e, Num) and (v is None or e.value == v)


def _add(a, b):
    a, b = as_expr(a), as_expr(b)
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if isinstance(b, Num) and b.value < 0:
        return Sub(a, Num(-b.value))
    return Add(a, b)


def _sub(a, b):
    a, b = as_expr(a), as_expr(b)
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return _neg(b)
    return Sub(a, b)


def _neg(a):
    a = as_expr(a)
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a, b):
    a, b = as_expr(a), as_expr(b)
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a, -1.0):
        return _neg(b)
    if _is_num(b, -1.0):
        return _neg(a)
    return Mul(a, b)


def _div(a, b):
    a, b = as_expr(a), as_expr(b)
    if _is_num(b, 0.0):
        raise ZeroDivisionError("division by literal zero")
    if _is_num(a) and _is_num(b):
        return Num(a.value / b.value)
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    return Div(a, b)


def _pow(a, p):
    a = as_expr(a)
    p = float(p)
    if p == 0.0:
        return Num(1.0)
    if p == 1.0:
        return a
    if isinstance(a, Num) and (a.value > 0 or p.is_integer()):
        return Num(a.value ** p)
    return Pow(a, p)


class Expr:
    """Base node.  Subclasses are frozen dataclasses."""

    __slots__ = ()

    def __add__(self, other):
        return _add(self, other)

    def __radd__(self, other):
        return _add(other, self)

    def __sub__(self, other):
        return _sub(self, other)

    def __rsub__(self, other):
        return _sub(other, self)

    def __mul__(self, other):
        return _mul(self, other)

    def __rmul__(self, other):
        return _mul(other, self)

    def __truediv__(self, other):
        return _div(self, other)

    def __rtruediv__(self, other):
        return _div(other, self)

    def __neg__(self):
        return _neg(self)

    def __pos__(self):
        return self

    def __pow__(self, p):
        if isinstance(p, Expr):
            if not isinstance(p, Num):
                raise ExprError("exponent must be a number")
            p = p.value
        return _pow(self, p)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, eq=True, repr=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: float


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr


@dataclass(frozen=True)
class Potential(Expr):
    """A scalar known through its gradient, gauged to vanish at ``base``.

    The value at a point is the line integral of ``grad`` along the
    axis-parallel path ``base -> (x1, base[1]) -> (x1, x2)``; derivatives come
    from ``grad`` exactly.  The gradient must be closed for the result to be
    path independent; callers check integrability before building one.
    """

    name: str
    grad: tuple
    base: tuple
    variables: tuple = SURFACE_VARS

    def __hash__(self):
        return hash((self.name, self.grad, self.base, self.variables))


# --------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]|,)"
    r"|(?P<bad>\S))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        if m.end() == pos:
            break
        kind = m.lastgroup
        if kind is None:
            break
        start = m.start(kind)
        if kind == "bad":
            raise ExprSyntaxError(f"unexpected character {m.group(kind)!r}", start)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = tuple(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, off = self.take()
        if val != value:
            shown = val if kind != "end" else "end of input"
            raise ExprSyntaxError(f"expected {value!r}, found {shown!r}", off)

    def parse(self):
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.factor()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def factor(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            inner = self.factor()
            if isinstance(inner, Num):
                return Num(-inner.value)
            return Neg(inner)
        b = self.base()
        if self.peek()[1] == "^":
            self.take()
            return Pow(b, self.signed_number())
        return b

    def signed_number(self):
        kind, val, off = self.peek()
        if val == "(":
            self.take()
            v = self.signed_number()
            self.expect(")")
            return v
        sign = 1.0
        if val in ("-", "+") and kind == "op":
            self.take()
            sign = -1.0 if val == "-" else 1.0
            kind, val, off = self.peek()
        if kind != "num":
            raise ExprSyntaxError("exponent must be a signed number", off)
        self.take()
        return sign * float(val)

    def base(self):
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if val in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ArityError(f"function {val!r} expects 1 argument", off)
                self.take()
                arg = self.expr()
                if self.peek()[1] == ",":
                    raise ArityError(f"function {val!r} expects 1 argument", self.peek()[2])
                self.expect(")")
                return Func(val, arg)
            if val in self.variables:
                if self.peek()[1] == "(":
                    raise ArityError(f"{val!r} is not a function", self.peek()[2])
                return Var(val)
            raise UnknownIdentifierError(f"unknown identifier {val!r}", off)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        shown = val if kind != "end" else "end of input"
        raise ExprSyntaxError(f"unexpected {shown!r}", off)


def parse_expr(text: str, variables=EXTENSION_VARS) -> Expr:
    """Parse ``text`` into an expression over ``variables``.

    Raises
    ------
    ExprSyntaxError
        Malformed input; ``offset`` is the position of the offending token.
    UnknownIdentifierError
        A symbol that is neither a declared variable nor a known function.
    ArityError
        A function called with the wrong number of arguments.
    """
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    return _Parser(text, variables).parse()


# --------------------------------------------------------------------------
# Printing

def _fmt_num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _prec(e: Expr) -> int:
    if isinstance(e, (Add, Sub)):
        return 1
    if isinstance(e, (Mul, Div)):
        return 2
    if isinstance(e, Neg) or (isinstance(e, Num) and (e.value < 0 or str(e.value).startswith("-"))):
        return 3
    if isinstance(e, Pow):
        return 4
    return 5


def to_string(e: Expr) -> str:
    """Render ``e`` so that :func:`parse_expr` reproduces it."""

    def wrap(sub, ok):
        s = to_string(sub)
        return s if ok else f"({s})"

    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Potential):
        return e.name
    if isinstance(e, Neg):
        return "-" + wrap(e.arg, _prec(e.arg) >= 3)
    if isinstance(e, (Add, Sub)):
        op = " + " if isinstance(e, Add) else " - "
        return wrap(e.left, _prec(e.left) >= 1) + op + wrap(e.right, _prec(e.right) > 1)
    if isinstance(e, (Mul, Div)):
        op = "*" if isinstance(e, Mul) else "/"
        return wrap(e.left, _prec(e.left) >= 2) + op + wrap(e.right, _prec(e.right) > 2)
    if isinstance(e, Pow):
        ex = _fmt_num(e.exponent)
        return wrap(e.base, _prec(e.base) >= 5) + "^" + (ex if e.exponent >= 0 else f"({ex})")
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    raise TypeError(f"unknown node {e!r}")


# --------------------------------------------------------------------------
# Structural operations

def free_vars(e: Expr) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Potential):
        return set(e.variables)
    if isinstance(e, (Neg, Func)):
        return free_vars(e.arg)
    if isinstance(e, Pow):
        return free_vars(e.base)
    return free_vars(e.left) | free_vars(e.right)


def diff(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative (with constant folding only)."""
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0 if e.name == var else 0.0)
    if isinstance(e, Potential):
        if var in e.variables:
            return e.grad[e.variables.index(var)]
        return Num(0.0)
    if isinstance(e, Neg):
        return -diff(e.arg, var)
    if isinstance(e, Add):
        return diff(e.left, var) + diff(e.right, var)
    if isinstance(e, Sub):
        return diff(e.left, var) - diff(e.right, var)
    if isinstance(e, Mul):
        return diff(e.left, var) * e.right + e.left * diff(e.right, var)
    if isinstance(e, Div):
        du, dv = diff(e.left, var), diff(e.right, var)
        if _is_num(dv, 0.0):
            return du / e.right
        return (du * e.right - e.left * dv) / (e.right ** 2)
    if isinstance(e, Pow):
        db = diff(e.base, var)
        if _is_num(db, 0.0):
            return Num(0.0)
        return e.exponent * (e.base ** (e.exponent - 1.0)) * db
    if isinstance(e, Func):
        da = diff(e.arg, var)
        if _is_num(da, 0.0):
            return Num(0.0)
        a = e.arg
        outer = {
            "exp": lambda: e,
            "log": lambda: 1.0 / a,
            "sin": lambda: Func("cos", a),
            "cos": lambda: -Func("sin", a),
            "sqrt": lambda: 0.5 / e,
        }[e.name]()
        return outer * da
    raise TypeError(f"unknown node {e!r}")


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions.

    Potentials only support substitutions that permute their variables.
    """
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict = {}

    def go(n):
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Var):
            out = mapping.get(n.name, n)
        elif isinstance(n, Num):
            out = n
        elif isinstance(n, Potential):
            out = _substitute_potential(n, mapping, go)
        elif isinstance(n, Neg):
            out = -go(n.arg)
        elif isinstance(n, Add):
            out = go(n.left) + go(n.right)
        elif isinstance(n, Sub):
            out = go(n.left) - go(n.right)
        elif isinstance(n, Mul):
            out = go(n.left) * go(n.right)
        elif isinstance(n, Div):
            out = go(n.left) / go(n.right)
        elif isinstance(n, Pow):
            out = go(n.base) ** n.exponent
        elif isinstance(n, Func):
            out = Func(n.name, go(n.arg))
        else:
            raise TypeError(f"unknown node {n!r}")
        memo[key] = out
        return out

    return go(e)


def _substitute_potential(n: Potential, mapping, go):
    targets = [mapping.get(v, Var(v)) for v in n.variables]
    if not all(isinstance(t, Var) for t in targets):
        raise ExprError("potentials only support variable permutations")
    names = [t.name for t in targets]
    if sorted(names) != sorted(n.variables):
        raise ExprError("potentials only support variable permutations")
    # new coordinate names[i] plays the role of old variables[i]
    grad = tuple(go(n.grad[names.index(v)]) for v in n.variables)
    base = tuple(n.base[names.index(v)] for v in n.variables)
    return Potential(n.name, grad, base, n.variables)


# --------------------------------------------------------------------------
# Numeric evaluation (values only, vectorised over points)

def _check(cond, message):
    if not np.all(cond):
        raise DomainError(message)


_VALUE_FUNCS: dict[str, Callable] = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
}


def evaluate(e: Expr, points, variables=None) -> np.ndarray:
    """Evaluate ``e`` at ``points`` (shape ``(N, D)`` or ``(D,)``)."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if variables is None:
        variables = EXTENSION_VARS[: pts.shape[1]]
    cols = {v: pts[:, i] for i, v in enumerate(variables)}
    n = pts.shape[0]
    memo: dict = {}

    def go(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Num):
            out = np.full(n, node.value)
        elif isinstance(node, Var):
            if node.name not in cols:
                raise ExprError(f"variable {node.name!r} not in context {variables}")
            out = cols[node.name]
        elif isinstance(node, Potential):
            from .potential import potential_values

            out = potential_values(node, pts, variables)
        elif isinstance(node, Neg):
            out = -go(node.arg)
        elif isinstance(node, Add):
            out = go(node.left) + go(node.right)
        elif isinstance(node, Sub):
            out = go(node.left) - go(node.right)
        elif isinstance(node, Mul):
            out = go(node.left) * go(node.right)
        elif isinstance(node, Div):
            den = go(node.right)
            _check(den != 0.0, "division by zero")
            out = go(node.left) / den
        elif isinstance(node, Pow):
            b = go(node.base)
            p = node.exponent
            if not p.is_integer():
                _check(b > 0.0, f"non-integer power {p} of non-positive value")
            elif p < 0:
                _check(b != 0.0, "negative power of zero")
            out = b ** p
        elif isinstance(node, Func):
            a = go(node.arg)
            if node.name == "log":
                _check(a > 0.0, "log of non-positive value")
                out = np.log(a)
            elif node.name == "sqrt":
                _check(a >= 0.0, "sqrt of negative value")
                out = np.sqrt(a)
            else:
                out = _VALUE_FUNCS[node.name](a)
        else:
            raise TypeError(f"unknown node {node!r}")
        memo[key] = out
        return out

    val = np.asarray(go(e), dtype=float)
    if not np.all(np.isfinite(val)):
        raise DomainError("non-finite value")
    return val[0] if single else val
