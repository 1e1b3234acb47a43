"""Scalar expressions: parsing, evaluation and symbolic differentiation.

Grammar (lowest to highest precedence)::

    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' ['-'] INTEGER)*
    atom    := NUMBER | NAME | NAME '(' sum ')' | '(' sum ')'

Exponents are integer literals only; ``a^b`` for real ``b`` is written
``exp(b*log(a))``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping

__all__ = [
    "Expression", "Const", "Var", "Func", "BinOp", "Pow",
    "ExprError", "ExprSyntaxError", "UnknownFunctionError",
    "UnboundVariableError", "ExprDomainError",
    "parse", "evaluate", "derivative", "serialize", "variables", "compile_expr",
    "substitute",
    "const", "var", "add", "sub", "mul", "div", "neg", "power", "func",
]

FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos")
_NAME = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*")


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownFunctionError(ExprSyntaxError):
    pass


class UnboundVariableError(ExprError, KeyError):
    def __init__(self, name: str):
        ExprError.__init__(self, f"unbound variable {name!r}")
        self.name = name

    def __str__(self):
        return self.args[0]


class ExprDomainError(ExprError, ArithmeticError):
    pass


class Expression:
    """Base node. Nodes are frozen dataclasses, so equality is structural."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return power(self, n)

    def __str__(self):
        return serialize(self)


@dataclass(frozen=True, eq=True)
class Const(Expression):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expression):
    name: str

    def __post_init__(self):
        if not _NAME.fullmatch(self.name):
            raise ValueError(f"invalid identifier {self.name!r}")


@dataclass(frozen=True, eq=True)
class Func(Expression):
    """Unary function application; ``name`` is one of FUNCTIONS or 'neg'."""

    name: str
    arg: Expression


@dataclass(frozen=True, eq=True)
class BinOp(Expression):
    op: str
    left: Expression
    right: Expression


@dataclass(frozen=True, eq=True)
class Pow(Expression):
    base: Expression
    exponent: int


def _lift(x) -> Expression:
    if isinstance(x, Expression):
        return x
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return Const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


# --- constructors with literal constant folding --------------------------

def const(value: float) -> Const:
    return Const(float(value))


def var(name: str) -> Var:
    return Var(name)


def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return BinOp("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return BinOp("*", a, b)


def div(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return Const(0.0)
    return BinOp("/", a, b)


def neg(a: Expression) -> Expression:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Func) and a.name == "neg":
        return a.arg
    return Func("neg", a)


def power(a: Expression, n: int) -> Expression:
    if isinstance(n, bool) or int(n) != n:
        raise ExprError("exponent must be an integer")
    n = int(n)
    if n == 0:
        return Const(1.0)
    if n == 1:
        return a
    if _is_const(a) and (a.value != 0.0 or n > 0):
        return Const(a.value ** n)
    return Pow(a, n)


def func(name: str, a: Expression) -> Expression:
    if name == "neg":
        return neg(a)
    if name not in FUNCTIONS:
        raise UnknownFunctionError(f"unknown function {name!r}", 0)
    return Func(name, a)


# --- parsing ---------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)|(?P<name>[a-zA-Z][a-zA-Z0-9_]*)|(?P<op>[-+*/^()]))")


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            what = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {what}", pos)

    def parse(self):
        e = self.sum()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return e

    def sum(self):
        e = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.product())
        return e

    def product(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.unary())
        return e

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            nxt = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else None
            # a signed literal is a constant, unless it is the base of a power
            if self.peek()[0] == "num" and not (nxt and nxt[0] == "op" and nxt[1] == "^"):
                return Const(-float(self.take()[1]))
            return Func("neg", self.unary())
        return self.pow()

    def pow(self):
        e = self.atom()
        while self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[0] == "op" and self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", pos)
            e = Pow(e, sign * int(text))
        return e

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {text!r}", pos)
                self.take()
                arg = self.sum()
                self.expect(")")
                return Func(text, arg)
            return Var(text)
        if kind == "op" and text == "(":
            e = self.sum()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {what}", pos)


def parse(text: str) -> Expression:
    """Parse ``text`` into an expression tree.

    Raises ExprSyntaxError (with ``offset``, the 0-based position of the first
    offending token) or UnknownFunctionError.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text).parse()


def serialize(e: Expression) -> str:
    """Fully parenthesized text form; ``parse(serialize(e)) == e``."""
    if isinstance(e, Const):
        if not math.isfinite(e.value):
            raise ExprError(f"constant {e.value!r} has no literal form")
        if math.copysign(1.0, e.value) < 0:
            return f"(-{-e.value!r})"
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        if e.name == "neg":
            inner = serialize(e.arg)
            return f"(-({inner}))" if isinstance(e.arg, Const) else f"(-{inner})"
        return f"{e.name}({serialize(e.arg)})"
    if isinstance(e, BinOp):
        return f"({serialize(e.left)} {e.op} {serialize(e.right)})"
    if isinstance(e, Pow):
        return f"({serialize(e.base)}^{e.exponent})"
    raise TypeError(type(e))


def variables(e: Expression) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Func):
        return variables(e.arg)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Pow):
        return variables(e.base)
    return frozenset()


def substitute(e: Expression, mapping: Mapping[str, Expression]) -> Expression:
    """Replace variables by expressions, simultaneously."""
    if isinstance(e, Var):
        return _lift(mapping[e.name]) if e.name in mapping else e
    if isinstance(e, Func):
        return func(e.name, substitute(e.arg, mapping))
    if isinstance(e, BinOp):
        op = {"+": add, "-": sub, "*": mul, "/": div}[e.op]
        return op(substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Pow):
        return power(substitute(e.base, mapping), e.exponent)
    return e


# --- evaluation --------------------------------------------------------------

def _exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _log(a):
    if a <= 0.0:
        raise ExprDomainError(f"log of non-positive argument {a!r}")
    return math.log(a)


def _sqrt(a):
    if a < 0.0:
        raise ExprDomainError(f"sqrt of negative argument {a!r}")
    return math.sqrt(a)


def _div(a, b):
    if b == 0.0:
        raise ExprDomainError("division by zero")
    return a / b


def _pow(a, n):
    if n < 0:
        if a == 0.0:
            raise ExprDomainError("division by zero")
        return _div(1.0, _pow(a, -n))
    try:
        return a ** n
    except OverflowError:
        return math.copysign(math.inf, a) if n % 2 else math.inf


_UNARY = {
    "exp": _exp, "log": _log, "sqrt": _sqrt,
    "sin": math.sin, "cos": math.cos, "neg": lambda a: -a,
}
_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
}


def evaluate(e: Expression, bindings: Mapping[str, float] | None = None) -> float:
    """Evaluate ``e`` in double precision."""
    bindings = bindings or {}
    return compile_expr(e)(bindings)


def compile_expr(e: Expression):
    """Return a callable ``f(bindings) -> float`` equivalent to evaluate(e, .).

    Closures avoid re-walking the tree, which matters in root-finding loops.
    """
    if isinstance(e, Const):
        value = e.value
        return lambda b: value
    if isinstance(e, Var):
        name = e.name

        def lookup(b):
            try:
                return float(b[name])
            except KeyError:
                raise UnboundVariableError(name) from None
        return lookup
    if isinstance(e, Func):
        fn = _UNARY[e.name]
        arg = compile_expr(e.arg)
        return lambda b: fn(arg(b))
    if isinstance(e, BinOp):
        fn = _BINARY[e.op]
        left, right = compile_expr(e.left), compile_expr(e.right)
        return lambda b: fn(left(b), right(b))
    if isinstance(e, Pow):
        base, n = compile_expr(e.base), e.exponent
        return lambda b: _pow(base(b), n)
    raise TypeError(type(e))


# --- differentiation -------------------------------------------------------

def _d(e: Expression, x: str) -> Expression:
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.name == x else 0.0)
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        da, db = _d(a, x), _d(b, x)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        # quotient rule
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if isinstance(e, Pow):
        n = e.exponent
        return mul(mul(Const(float(n)), power(e.base, n - 1)), _d(e.base, x))
    if isinstance(e, Func):
        u = e.arg
        du = _d(u, x)
        if _is_const(du, 0.0):
            return Const(0.0)
        name = e.name
        if name == "neg":
            return neg(du)
        if name == "exp":
            return mul(e, du)
        if name == "log":
            return div(du, u)
        if name == "sqrt":
            return div(du, mul(Const(2.0), e))
        if name == "sin":
            return mul(Func("cos", u), du)
        if name == "cos":
            return neg(mul(Func("sin", u), du))
    raise TypeError(type(e))


def derivative(e: Expression, x: str, order: int = 1) -> Expression:
    """Symbolic ``order``-th partial derivative of ``e`` with respect to ``x``."""
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order!r}")
    for _ in range(order):
        e = _d(e, x)
    return e

