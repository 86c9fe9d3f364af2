"""Set-expression language used on the command line.

    interval(1/3, 1/2)
    levels(3, 0..3)          indices 0, 1, 2, 3 (inclusive range)
    levels(2, [0, 2])
    base(4)                  level 0 of stage 4
    pool(3)
    union(e, e)  intersect(e, e)  difference(e, e)  complement(e)

Parsing produces a tree; evaluation needs an :class:`~rankone.engine.Engine`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import ParseError, ValidationError
from .measure import IntervalSet


@dataclass(frozen=True)
class Interval:
    a: Fraction
    b: Fraction


@dataclass(frozen=True)
class Levels:
    stage: int
    indices: tuple


@dataclass(frozen=True)
class Base:
    stage: int


@dataclass(frozen=True)
class Pool:
    stage: int


@dataclass(frozen=True)
class Union:
    left: object
    right: object


@dataclass(frozen=True)
class Intersect:
    left: object
    right: object


@dataclass(frozen=True)
class Difference:
    left: object
    right: object


@dataclass(frozen=True)
class Complement:
    operand: object


_TOKENS = re.compile(r"""
    (?P<ws>\s+)
  | (?P<range>\.\.)
  | (?P<num>\d+(?:/\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[(),\[\]])
""", re.VERBOSE)


def _tokenize(text):
    pos = 0
    line, line_start = 1, 0
    out = []
    while pos < len(text):
        m = _TOKENS.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "ws":
            chunk = m.group()
            if "\n" in chunk:
                line += chunk.count("\n")
                line_start = pos + chunk.rfind("\n") + 1
        else:
            out.append((kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    out.append(("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.next()
        if tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1] or 'end of input'!r}",
                             tok[2], tok[3])
        return tok

    def integer(self):
        tok = self.next()
        if tok[0] != "num" or "/" in tok[1]:
            raise ParseError(f"expected an integer, found {tok[1]!r}", tok[2], tok[3])
        return int(tok[1])

    def rational(self):
        tok = self.next()
        if tok[0] != "num":
            raise ParseError(f"expected a rational, found {tok[1]!r}", tok[2], tok[3])
        return Fraction(tok[1])

    def expr(self):
        tok = self.next()
        if tok[0] != "name":
            raise ParseError(f"expected a set expression, found {tok[1]!r}", tok[2], tok[3])
        name = tok[1]
        self.expect("(")
        if name == "interval":
            a = self.rational()
            self.expect(",")
            b = self.rational()
            node = Interval(a, b)
        elif name == "levels":
            stage = self.integer()
            self.expect(",")
            node = Levels(stage, self.index_list())
        elif name in ("base", "pool"):
            stage = self.integer()
            node = Base(stage) if name == "base" else Pool(stage)
        elif name in ("union", "intersect", "difference"):
            left = self.expr()
            self.expect(",")
            right = self.expr()
            node = {"union": Union, "intersect": Intersect, "difference": Difference}[name](left, right)
        elif name == "complement":
            node = Complement(self.expr())
        else:
            raise ParseError(f"unknown function {name!r}", tok[2], tok[3])
        self.expect(")")
        if isinstance(node, (Levels, Base, Pool)) and node.stage < 1:
            raise ParseError("stage references start at 1", tok[2], tok[3])
        return node

    def index_list(self):
        if self.peek()[1] == "[":
            self.next()
            items = []
            if self.peek()[1] != "]":
                items.append(self.integer())
                while self.peek()[1] == ",":
                    self.next()
                    items.append(self.integer())
            self.expect("]")
            return tuple(sorted(set(items)))
        lo = self.integer()
        self.expect("..")
        hi = self.integer()
        return tuple(range(lo, hi + 1))


def parse_set_expr(text: str):
    parser = _Parser(text)
    node = parser.expr()
    tok = parser.peek()
    if tok[0] != "eof":
        raise ParseError(f"trailing input {tok[1]!r}", tok[2], tok[3])
    return node


def to_text(node) -> str:
    if isinstance(node, Interval):
        return f"interval({node.a},{node.b})"
    if isinstance(node, Levels):
        return f"levels({node.stage},[{','.join(map(str, node.indices))}])"
    if isinstance(node, Base):
        return f"base({node.stage})"
    if isinstance(node, Pool):
        return f"pool({node.stage})"
    if isinstance(node, Complement):
        return f"complement({to_text(node.operand)})"
    name = {Union: "union", Intersect: "intersect", Difference: "difference"}[type(node)]
    return f"{name}({to_text(node.left)},{to_text(node.right)})"


def evaluate(node, engine) -> IntervalSet:
    if isinstance(node, Interval):
        if not 0 <= node.a <= node.b <= 1:
            raise ValidationError(f"interval({node.a},{node.b}) is not inside [0, 1)")
        return IntervalSet([(node.a, node.b)])
    if isinstance(node, Levels):
        h = engine.height(node.stage)
        bad = [i for i in node.indices if not 0 <= i < h]
        if bad:
            raise ValidationError(f"level indices {bad} outside stage {node.stage} (height {h})")
        return engine.levels_set(node.stage, node.indices)
    if isinstance(node, Base):
        return engine.base(node.stage)
    if isinstance(node, Pool):
        return engine.pool(node.stage)
    if isinstance(node, Complement):
        return evaluate(node.operand, engine).complement()
    left, right = evaluate(node.left, engine), evaluate(node.right, engine)
    if isinstance(node, Union):
        return left.union(right)
    if isinstance(node, Intersect):
        return left.intersect(right)
    return left.difference(right)
