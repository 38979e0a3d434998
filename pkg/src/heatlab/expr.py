"""Field expressions over chart coordinates.

Grammar (highest precedence last)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right associative
    atom   := NUMBER | COORD | FUNC "(" expr ")" | "(" expr ")"

``COORD`` is ``x1 .. xd``; ``FUNC`` is one of exp, log, sin, cos, sqrt, tanh.
So ``-x1^2`` parses as ``Neg(Pow(x1, 2))`` and ``2^-1`` is allowed.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import ArityError, ParseError

FUNCTIONS = {"exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos,
             "sqrt": np.sqrt, "tanh": np.tanh}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int          # 1-based coordinate index


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Pow, Call]


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def tokenize(source: str):
    toks, pos = [], 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos,
                             "number, coordinate, function or operator")
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(source)))
    return toks


class _Parser:
    def __init__(self, source: str, dim: int):
        self.source = source
        self.dim = dim
        self.toks = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected: str):
        t = self.tok
        what = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(f"unexpected {what}", t.pos, expected)

    def eat(self, text: str):
        if self.tok.text != text or self.tok.kind not in ("op",):
            self.fail(repr(text))
        self.i += 1

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            self.fail("operator or end of input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.i += 1
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.i += 1
            return Pow(base, self.unary())
        return base

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if t.kind == "name":
            m = re.fullmatch(r"x(\d+)", t.text)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.dim:
                    raise ArityError(f"coordinate {t.text} exceeds dimension d={self.dim}", t.pos)
                self.i += 1
                return Var(idx)
            if t.text in FUNCTIONS:
                self.i += 1
                self.eat("(")
                arg = self.expr()
                self.eat(")")
                return Call(t.text, arg)
            self.fail(f"coordinate x1..x{self.dim} or one of {', '.join(sorted(FUNCTIONS))}")
        if t.kind == "op" and t.text == "(":
            self.i += 1
            node = self.expr()
            self.eat(")")
            return node
        self.fail("number, coordinate, function or '('")


def parse(source: str, dim: int) -> Node:
    """Parse one scalar expression over coordinates ``x1..x{dim}``."""
    return _Parser(source, dim).parse()


def evaluate(node: Node, pts) -> np.ndarray:
    """Evaluate an AST on points ``(..., d)``; returns an array of shape ``pts.shape[:-1]``."""
    pts = np.asarray(pts, dtype=float)
    shape = pts.shape[:-1]
    if isinstance(node, Num):
        return np.full(shape, node.value)
    if isinstance(node, Var):
        return pts[..., node.index - 1]
    if isinstance(node, Neg):
        return -evaluate(node.operand, pts)
    if isinstance(node, Pow):
        return np.power(evaluate(node.base, pts), evaluate(node.exponent, pts))
    if isinstance(node, Call):
        return FUNCTIONS[node.name](evaluate(node.arg, pts))
    a, b = evaluate(node.left, pts), evaluate(node.right, pts)
    return {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}[node.op](a, b)


@dataclass(frozen=True)
class FieldExpression:
    """A scalar expression or an ``m x m`` matrix of complex-valued entries.

    ``ast`` holds one ``(re, im)`` node pair per entry (``im`` may be ``None``).
    """
    source: object
    ast: Tuple
    shape: Tuple[int, ...]

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        base = pts.shape[:-1]
        flat = []
        for re_node, im_node in self.ast:
            val = evaluate(re_node, pts).astype(complex)
            if im_node is not None:
                val = val + 1j * evaluate(im_node, pts)
            flat.append(val)
        out = np.stack(flat, axis=-1) if flat else np.zeros(base + (0,))
        return out.reshape(base + self.shape)


def _entry(src, dim, where):
    if isinstance(src, str):
        return parse(src, dim), None
    if isinstance(src, (int, float)):
        return Num(float(src)), None
    if isinstance(src, (list, tuple)) and len(src) == 2:
        re_part, im_part = (_entry(s, dim, where)[0] for s in src)
        return re_part, im_part
    raise ArityError(f"entry {where} must be an expression string, a number or an [re, im] pair")


def parse_field(source, dim: int, m: int = 1) -> FieldExpression:
    """Parse a scalar (``m = 1`` and a string) or an ``m x m`` nested list of entries."""
    if m == 1 and not (isinstance(source, list) and source and isinstance(source[0], list)
                       and not _is_pair(source)):
        node = _entry(source, dim, "(0, 0)")
        return FieldExpression(source, (node,), (1, 1))
    if not isinstance(source, list) or len(source) != m:
        raise ArityError(f"matrix field needs {m} rows, got "
                         f"{len(source) if isinstance(source, list) else 'a scalar'}")
    nodes = []
    for i, row in enumerate(source):
        if not isinstance(row, list) or len(row) != m:
            raise ArityError(f"row {i} of the matrix field needs {m} entries")
        for j, ent in enumerate(row):
            nodes.append(_entry(ent, dim, (i, j)))
    return FieldExpression(source, tuple(nodes), (m, m))


def _is_pair(src) -> bool:
    return (isinstance(src, list) and len(src) == 2
            and all(isinstance(s, (str, int, float)) for s in src))
