"""A small arithmetic expression language for nonlinearities and lower bounds.

Grammar (highest precedence last)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | NAME | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

so ``-2^2 == -4`` and ``2^3^2 == 512``.  Identifiers are case-sensitive.

Expressions evaluate either on Python floats (using :mod:`math`) or on numpy
arrays, which is how the solver evaluates ``f(s, u(s), v(s))`` at all grid
nodes at once.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .exceptions import BKError

__all__ = [
    "VARIABLES",
    "FUNCTIONS",
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprSyntaxError",
    "ExprEvalError",
    "parse",
    "evaluate",
    "to_source",
]

VARIABLES = frozenset({"t", "x", "y", "u", "v", "r1", "r2"})
FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "ln": 1, "sqrt": 1, "abs": 1, "min": 2, "max": 2}


class ExprSyntaxError(BKError, ValueError):
    def __init__(self, message: str, src: str, pos: int):
        self.src = src
        self.pos = pos
        super().__init__(f"{message} at position {pos}\n  {src}\n  {' ' * pos}^")


class ExprEvalError(BKError, ValueError):
    """Unbound variable or a domain error (ln/sqrt/division/pow)."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    pos = 0
    tokens = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None:
            bad = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", src, bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        what = "end of input" if tok[0] == "end" else repr(tok[1])
        raise ExprSyntaxError(f"{message}, found {what}", self.src, tok[2])

    def accept(self, op):
        if self.tok[0] == "op" and self.tok[1] == op:
            self.i += 1
            return True
        return False

    def expect(self, op):
        if not self.accept(op):
            self.error(f"expected {op!r}")

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok[0] != "end":
            self.error("unexpected token")
        return node

    def expr(self):
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.tok[1]
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.tok[1]
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.tok
        if kind == "num":
            self.i += 1
            return Num(float(text))
        if kind == "name":
            self.i += 1
            if text in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    raise ExprSyntaxError(
                        f"{text}() takes {FUNCTIONS[text]} argument(s), got {len(args)}",
                        self.src,
                        pos,
                    )
                return Call(text, tuple(args))
            if text in VARIABLES:
                return Var(text)
            raise ExprSyntaxError(f"unknown identifier {text!r}", self.src, pos)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.error("expected a number, variable, function or '('")


def parse(src: str) -> Expr:
    """Parse ``src`` into an expression tree; raises :class:`ExprSyntaxError`."""
    if not isinstance(src, str) or not src.strip():
        raise ExprSyntaxError("empty expression", src if isinstance(src, str) else "", 0)
    return _Parser(src).parse()


def to_source(e: Expr) -> str:
    """Fully parenthesized source text that parses back to ``e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)}{e.op}{to_source(e.right)})"
    return f"{e.func}({', '.join(to_source(a) for a in e.args)})"


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    return set().union(*(free_variables(a) for a in e.args))


def _domain_error(e, detail):
    return ExprEvalError(f"{detail} in {to_source(e)}")


def _scalar(e: Expr, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise ExprEvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -_scalar(e.operand, env)
    if isinstance(e, BinOp):
        a = _scalar(e.left, env)
        b = _scalar(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                raise _domain_error(e, "division by zero")
            return a / b
        try:
            return math.pow(a, b)
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise _domain_error(e, f"invalid power ({exc})") from None
    args = [_scalar(a, env) for a in e.args]
    f = e.func
    if f == "ln" and args[0] <= 0.0:
        raise _domain_error(e, "logarithm of a nonpositive number")
    if f == "sqrt" and args[0] < 0.0:
        raise _domain_error(e, "square root of a negative number")
    try:
        return _SCALAR_FUNCS[f](*args)
    except OverflowError:
        raise _domain_error(e, "overflow") from None


_SCALAR_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
    "min": min,
    "max": max,
}

_ARRAY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
}


def _first_bad(mask):
    return int(np.flatnonzero(np.broadcast_to(mask, np.shape(mask)))[0]) if np.ndim(mask) else 0


def _array(e: Expr, env):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        try:
            return np.asarray(env[e.name], dtype=float)
        except KeyError:
            raise ExprEvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -_array(e.operand, env)
    if isinstance(e, BinOp):
        a = _array(e.left, env)
        b = _array(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            bad = b == 0.0
            if np.any(bad):
                raise _domain_error(e, f"division by zero (at flat index {_first_bad(bad)})")
            return a / b
        with np.errstate(all="ignore"):
            out = np.power(a, b)
        bad = ~np.isfinite(out)
        if np.any(bad):
            raise _domain_error(e, f"invalid power (at flat index {_first_bad(bad)})")
        return out
    args = [_array(a, env) for a in e.args]
    f = e.func
    if f == "ln":
        bad = args[0] <= 0.0
        if np.any(bad):
            raise _domain_error(e, f"logarithm of a nonpositive number (at flat index {_first_bad(bad)})")
    if f == "sqrt":
        bad = args[0] < 0.0
        if np.any(bad):
            raise _domain_error(e, f"square root of a negative number (at flat index {_first_bad(bad)})")
    with np.errstate(over="ignore"):
        out = _ARRAY_FUNCS[f](*args)
    if f == "exp":
        bad = ~np.isfinite(out)
        if np.any(bad):
            raise _domain_error(e, f"overflow (at flat index {_first_bad(bad)})")
    return out


def evaluate(e: Expr, env: Mapping[str, object]):
    """Evaluate ``e`` with variable bindings ``env``.

    If every binding is a Python/numpy scalar the result is a float computed
    with :mod:`math`; if any binding is an array, evaluation is element-wise
    with numpy broadcasting and the result is an array of the broadcast shape.
    """
    if any(np.ndim(val) > 0 for val in env.values()):
        shape = np.broadcast_shapes(*(np.shape(val) for val in env.values()))
        return np.broadcast_to(_array(e, env), shape).astype(float)
    return float(_scalar(e, env))
