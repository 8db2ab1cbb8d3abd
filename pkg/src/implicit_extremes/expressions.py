"""Loss expressions: a small recursive-descent parser, evaluator and printer.

Grammar::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := primary ('^' rational)?
    primary := coordinate | number
             | 'pow' '(' expr ',' rational ')'
             | ('min' | 'max') '(' expr (',' expr)* ')'
             | 'pos' '(' expr ')'
             | '(' expr ')'
    rational := ['-'] number | '(' ['-'] integer '/' integer ')'     (after '^')
    rational := ['-'] number ['/' integer]                          (inside pow)

Coordinates are ``x1 .. xd``.  Numbers are non-negative integer or decimal
literals and are kept as exact fractions; exponents must be rational.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import LossFunction, from_expression


class ParseError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


# -- tree -------------------------------------------------------------------


@dataclass(frozen=True)
class Coord:
    index: int  # 0-based

    def evaluate(self, x):
        return x[:, self.index]

    def degree(self):
        return Fraction(1)

    def text(self):
        return f"x{self.index + 1}"


@dataclass(frozen=True)
class Const:
    value: Fraction

    def evaluate(self, x):
        return np.full(x.shape[0], float(self.value))

    def degree(self):
        return Fraction(0)

    def text(self):
        return _decimal_text(self.value)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def evaluate(self, x):
        a = self.left.evaluate(x)
        b = self.right.evaluate(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return a / b

    def degree(self):
        a, b = self.left.degree(), self.right.degree()
        if a is None or b is None:
            return None
        if self.op in "+-":
            return a if a == b else None
        return a + b if self.op == "*" else a - b

    def text(self):
        return f"{_wrap(self.left)} {self.op} {_wrap(self.right)}"


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: Fraction

    def evaluate(self, x):
        return np.power(self.base.evaluate(x), float(self.exponent))

    def degree(self):
        d = self.base.degree()
        return None if d is None else d * self.exponent

    def text(self):
        e = self.exponent
        exp = str(e.numerator) if e.denominator == 1 else f"{e.numerator}/{e.denominator}"
        return f"pow({self.base.text()}, {exp})"


@dataclass(frozen=True)
class Call:
    fn: str  # min, max, pos
    args: tuple

    def evaluate(self, x):
        values = [a.evaluate(x) for a in self.args]
        if self.fn == "pos":
            return np.maximum(values[0], 0.0)
        reduce = np.minimum if self.fn == "min" else np.maximum
        out = values[0]
        for v in values[1:]:
            out = reduce(out, v)
        return out

    def degree(self):
        degrees = {a.degree() for a in self.args}
        return degrees.pop() if len(degrees) == 1 else None

    def text(self):
        return f"{self.fn}({', '.join(a.text() for a in self.args)})"


def _wrap(node):
    return f"({node.text()})" if isinstance(node, BinOp) else node.text()


def _decimal_text(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    # literals are decimals, so some power of ten clears the denominator
    k = 0
    while (q * 10**k).denominator != 1:
        k += 1
    s = str((q * 10**k).numerator).rjust(k + 1, "0")
    return f"{s[:-k]}.{s[-k:]}"


@dataclass(frozen=True)
class LossExpression:
    """A parsed loss expression over ``dimension`` coordinates."""

    tree: object
    dimension: int

    def evaluate(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.tree.evaluate(x.reshape(-1, x.shape[-1]))

    def to_text(self) -> str:
        return self.tree.text()

    def degree(self):
        """Static homogeneity degree, or None when the terms do not balance."""
        return self.tree.degree()

    def as_loss(self, validate: bool = True) -> LossFunction:
        return from_expression(self, self.dimension, validate=validate)


# -- tokenizer / parser --------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)
_FUNCTIONS = ("pow", "min", "max", "pos")


def _tokenize(text):
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = len(text) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
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
        self.max_coord = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.primary()
        if self.peek()[1] == "^":
            self.take()
            node = Pow(node, self.caret_rational())
        return node

    def primary(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(Fraction(text))
        if kind == "name":
            if re.fullmatch(r"x[1-9][0-9]*", text):
                index = int(text[1:])
                self.max_coord = max(self.max_coord, index)
                return Coord(index - 1)
            if text in _FUNCTIONS:
                return self.call(text)
            raise ParseError(f"unknown name {text!r}", pos)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"expected a coordinate, number or function, found {found}", pos)

    def call(self, fn):
        self.expect("(")
        if fn == "pow":
            base = self.expr()
            self.expect(",")
            exponent = self.pow_rational()
            self.expect(")")
            return Pow(base, exponent)
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if fn == "pos" and len(args) != 1:
            raise ParseError("pos takes exactly one argument", self.peek()[2])
        return Call(fn, tuple(args))

    def signed_number(self):
        sign = 1
        if self.peek()[1] == "-":
            self.take()
            sign = -1
        kind, text, pos = self.take()
        if kind != "num":
            raise ParseError("expected a rational exponent", pos)
        return sign * Fraction(text)

    def integer(self):
        kind, text, pos = self.take()
        if kind != "num" or not text.isdigit():
            raise ParseError("expected an integer", pos)
        return int(text)

    def pow_rational(self):
        value = self.signed_number()
        if self.peek()[1] == "/":
            pos = self.take()[2]
            if value.denominator != 1:
                raise ParseError("fraction exponents need integer numerators", pos)
            den = self.integer()
            if den == 0:
                raise ParseError("zero denominator in exponent", pos)
            value = value / den
        return value

    def caret_rational(self):
        if self.peek()[1] == "(":
            self.take()
            value = self.pow_rational()
            self.expect(")")
            return value
        return self.signed_number()


def parse_expression(text: str, dimension: int | None = None) -> LossExpression:
    """Parse without validation.  ``dimension`` defaults to the largest coordinate used."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(text)
    tree = parser.parse()
    d = parser.max_coord if dimension is None else int(dimension)
    if parser.max_coord > d:
        raise ParseError(f"coordinate x{parser.max_coord} exceeds dimension {d}", 0)
    if d < 1:
        raise ParseError("expression uses no coordinates and no dimension was given", 0)
    return LossExpression(tree, d)


def parse_loss_expr(text: str, dimension: int | None = None) -> LossExpression:
    """Parse and validate: rejected unless homogeneous and non-negative on the probe suite.

    Raises :class:`ParseError` for syntax errors and
    :class:`~implicit_extremes.geometry.LossValidationError` (carrying the
    witness) for losses that fail validation.
    """
    expression = parse_expression(text, dimension)
    expression.as_loss(validate=True)
    return expression
