"""Small arithmetic expression language for propensity functions.

Expressions are built from rational constants, species counts written
``x[name]``, the binary operators ``+ - * /``, unary minus, and integer
powers ``^``.  Trees are immutable and evaluate either exactly (with
:class:`fractions.Fraction`) or elementwise on numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Union

import numpy as np

Number = Union[int, Fraction]


class ExpressionSyntaxError(ValueError):
    """Raised when an expression string cannot be parsed."""

    def __init__(self, message: str, column: int, expected: tuple[str, ...] = ()):
        super().__init__(message)
        self.column = column
        self.expected = expected


class ExpressionDomainError(ArithmeticError):
    """Division by zero (or similar) while evaluating an expression."""


class Expr:
    """Base class of expression nodes."""

    def species(self) -> frozenset[str]:
        raise NotImplementedError

    def evaluate(self, counts: Mapping[str, Number]) -> Fraction:
        raise NotImplementedError

    def substitute(self, mapping: Mapping[str, "Expr"]) -> "Expr":
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_text()

    # operator sugar used when building expressions programmatically
    def __add__(self, other: "Expr | Number") -> "Expr":
        return BinOp("+", self, as_expr(other))

    def __radd__(self, other: Number) -> "Expr":
        return BinOp("+", as_expr(other), self)

    def __sub__(self, other: "Expr | Number") -> "Expr":
        return BinOp("-", self, as_expr(other))

    def __mul__(self, other: "Expr | Number") -> "Expr":
        return BinOp("*", self, as_expr(other))

    def __rmul__(self, other: Number) -> "Expr":
        return BinOp("*", as_expr(other), self)

    def __truediv__(self, other: "Expr | Number") -> "Expr":
        return BinOp("/", self, as_expr(other))


def as_expr(value: "Expr | Number") -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(Fraction(value))


def _fraction_text(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class Const(Expr):
    value: Fraction

    def species(self) -> frozenset[str]:
        return frozenset()

    def evaluate(self, counts):
        return self.value

    def substitute(self, mapping):
        return self

    def to_text(self) -> str:
        text = _fraction_text(self.value)
        return f"({text})" if ("/" in text or self.value < 0) else text


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def species(self) -> frozenset[str]:
        return frozenset({self.name})

    def evaluate(self, counts):
        return Fraction(counts[self.name])

    def substitute(self, mapping):
        return mapping.get(self.name, self)

    def to_text(self) -> str:
        return f"x[{self.name}]"


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def species(self):
        return self.operand.species()

    def evaluate(self, counts):
        return -self.operand.evaluate(counts)

    def substitute(self, mapping):
        return Neg(self.operand.substitute(mapping))

    def to_text(self) -> str:
        return f"-({self.operand.to_text()})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def species(self):
        return self.left.species() | self.right.species()

    def evaluate(self, counts):
        a = self.left.evaluate(counts)
        b = self.right.evaluate(counts)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if b == 0:
            raise ExpressionDomainError(f"division by zero in {self.to_text()}")
        return a / b

    def substitute(self, mapping):
        return BinOp(self.op, self.left.substitute(mapping), self.right.substitute(mapping))

    def to_text(self) -> str:
        return f"({self.left.to_text()} {self.op} {self.right.to_text()})"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def species(self):
        return self.base.species()

    def evaluate(self, counts):
        b = self.base.evaluate(counts)
        if b == 0 and self.exponent < 0:
            raise ExpressionDomainError(f"zero raised to a negative power in {self.to_text()}")
        return b ** self.exponent

    def substitute(self, mapping):
        return Pow(self.base.substitute(mapping), self.exponent)

    def to_text(self) -> str:
        return f"({self.base.to_text()})^{self.exponent}"


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)|(?P<var>x\[\s*(?P<name>[A-Za-z_][\w']*)\s*\])"
    r"|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None:
                col = pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise ExpressionSyntaxError(
                    f"unexpected character {text[col]!r} at column {col + 1}",
                    col + 1,
                    ("number", "x[<name>]", "operator"),
                )
            start = m.start(m.lastgroup if m.lastgroup != "name" else "var")
            if m.group("num") is not None:
                self.tokens.append(("num", m.group("num"), start))
            elif m.group("var") is not None:
                self.tokens.append(("var", m.group("name"), start))
            else:
                self.tokens.append(("op", m.group("op"), start))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", "", len(self.text))

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def fail(self, expected: tuple[str, ...]):
        kind, value, col = self.peek()
        shown = "end of expression" if kind == "end" else repr(value)
        raise ExpressionSyntaxError(
            f"unexpected {shown} at column {col + 1}; expected one of {', '.join(expected)}",
            col + 1,
            expected,
        )

    def parse(self) -> Expr:
        node = self.sum()
        if self.peek()[0] != "end":
            self.fail(("operator", "end of expression"))
        return node

    def sum(self) -> Expr:
        node = self.product()
        while self.peek() in (("op", "+", self.peek()[2]), ("op", "-", self.peek()[2])):
            op = self.take()[1]
            node = BinOp(op, node, self.product())
        return node

    def product(self) -> Expr:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            right = self.unary()
            if op == "/" and isinstance(node, Const) and isinstance(right, Const) and right.value != 0:
                node = Const(node.value / right.value)  # keeps rational literals canonical
            else:
                node = BinOp(op, node, right)
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            inner = self.unary()
            return Const(-inner.value) if isinstance(inner, Const) else Neg(inner)
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[0] == "op" and self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, value, _ = self.peek()
            if kind != "num" or not value.isdigit():
                self.fail(("integer exponent",))
            self.take()
            node = Pow(node, sign * int(value))
        return node

    def atom(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "num":
            self.take()
            return Const(Fraction(value))
        if kind == "var":
            self.take()
            return Var(value)
        if kind == "op" and value == "(":
            self.take()
            node = self.sum()
            if self.peek()[0] != "op" or self.peek()[1] != ")":
                self.fail(("')'",))
            self.take()
            return node
        self.fail(("number", "x[<name>]", "'('"))
        raise AssertionError  # unreachable


def parse_expression(text: str) -> Expr:
    """Parse ``text`` into an expression tree."""
    return _Parser(text).parse()


# -- helpers -------------------------------------------------------------------

def falling_factorial_term(name: str, order: int) -> Expr:
    """``x (x-1) ... (x-order+1) / order!`` for species ``name``."""
    node: Expr = Const(Fraction(1))
    factorial = 1
    for j in range(order):
        factor = Var(name) if j == 0 else BinOp("-", Var(name), Const(Fraction(j)))
        node = factor if j == 0 else BinOp("*", node, factor)
        factorial *= j + 1
    if factorial != 1:
        node = BinOp("/", node, Const(Fraction(factorial)))
    return node


def affine_expr(offset: Fraction, coefficients: Mapping[str, Fraction]) -> Expr:
    """Build ``offset + sum(coef * x[name])`` skipping zero coefficients."""
    node: Expr | None = None
    for name, coef in coefficients.items():
        if coef == 0:
            continue
        term: Expr = Var(name) if coef == 1 else BinOp("*", Const(Fraction(coef)), Var(name))
        node = term if node is None else BinOp("+", node, term)
    if node is None:
        return Const(Fraction(offset))
    if offset != 0:
        node = BinOp("+", node, Const(Fraction(offset)))
    return node


def compile_numpy(expr: Expr, index: Mapping[str, int]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile ``expr`` to a function of a float array ``X[..., d]``."""

    def build(node: Expr):
        if isinstance(node, Const):
            value = float(node.value)
            return lambda X: value
        if isinstance(node, Var):
            col = index[node.name]
            return lambda X: X[..., col]
        if isinstance(node, Neg):
            inner = build(node.operand)
            return lambda X: -inner(X)
        if isinstance(node, Pow):
            inner = build(node.base)
            e = node.exponent
            return lambda X: np.power(inner(X), float(e)) if e < 0 else inner(X) ** e
        if isinstance(node, BinOp):
            left, right = build(node.left), build(node.right)
            if node.op == "+":
                return lambda X: left(X) + right(X)
            if node.op == "-":
                return lambda X: left(X) - right(X)
            if node.op == "*":
                return lambda X: left(X) * right(X)
            return lambda X: left(X) / right(X)
        raise TypeError(f"unknown node {node!r}")

    return build(expr)
