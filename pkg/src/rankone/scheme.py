"""Cutting-and-stacking schemes: stage rules, presets, parsing, normalization.

A scheme is a finite prefix of stage rules followed by one rule repeated
forever.  Stage ``n`` is cut into ``cuts`` equal columns, stacked left to
right, with ``spacers[i]`` fresh levels placed above column ``i``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class StageRule:
    cuts: int
    spacers: tuple

    def __post_init__(self):
        object.__setattr__(self, "spacers", tuple(int(s) for s in self.spacers))
        if not isinstance(self.cuts, int) or self.cuts < 2:
            raise ValidationError(f"cuts must be an integer >= 2, got {self.cuts!r}")
        if len(self.spacers) != self.cuts:
            raise ValidationError(
                f"spacers has {len(self.spacers)} entries, expected {self.cuts}")
        if any(s < 0 for s in self.spacers):
            raise ValidationError("spacer counts must be non-negative")

    @property
    def spacer_total(self) -> int:
        return sum(self.spacers)

    def to_text(self) -> str:
        return f"cuts={self.cuts} spacers=[{','.join(map(str, self.spacers))}]"


@dataclass(frozen=True)
class SchemeSpec:
    """Eventually constant scheme.  ``name`` is informational only.

    Prefix rules equal to the tail at the end of the prefix are dropped, so two
    specs describing the same stage sequence compare equal.
    """

    prefix: tuple
    tail: StageRule
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        prefix = list(self.prefix)
        while prefix and prefix[-1] == self.tail:
            prefix.pop()
        object.__setattr__(self, "prefix", tuple(prefix))

    def rule(self, n: int) -> StageRule:
        """Rule used to go from stage ``n`` to stage ``n + 1`` (n >= 1)."""
        if n < 1:
            raise ValueError("stages are numbered from 1")
        if n <= len(self.prefix):
            return self.prefix[n - 1]
        return self.tail


PRESETS = {
    "chacon3": SchemeSpec((), StageRule(3, (0, 1, 0)), name="chacon3"),
    "staircase4": SchemeSpec((), StageRule(4, (0, 1, 2, 3)), name="staircase4"),
    "odometer2": SchemeSpec((), StageRule(2, (0, 0)), name="odometer2"),
}

RIGID3 = StageRule(3, (0, 0, 0))
STAIRCASE4 = PRESETS["staircase4"].tail


def preset(name: str) -> SchemeSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}") from None


# -- block rules -------------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*(?:(B)|(\d+)|(\S))")


def compile_block_rule(text: str) -> SchemeSpec:
    """Compile a block rule such as ``"B B 1 B"`` into a constant scheme.

    Each ``B`` is one copy of the previous block; an integer ``k`` is ``k``
    spacer levels, attached to the slot above the preceding ``B``.
    """
    rhs_offset = 0
    line, col = 1, 1
    if "=" in text:
        rhs_offset = text.index("=") + 1
    body = text[rhs_offset:]
    spacers: list[int] = []
    pos = 0
    while pos < len(body):
        m = _TOKEN_RE.match(body, pos)
        if m is None:
            break
        if m.group(1):
            spacers.append(0)
        elif m.group(2):
            where = _locate(text, rhs_offset + m.start(2))
            k = int(m.group(2))
            if k <= 0:
                raise ParseError("spacer counts in a block rule must be positive", *where)
            if not spacers:
                raise ParseError("a block rule must start with B", *where)
            spacers[-1] += k
        else:
            raise ParseError(f"unexpected character {m.group(3)!r}",
                             *_locate(text, rhs_offset + m.start(3)))
        pos = m.end()
    if len(spacers) < 2:
        raise ValidationError("a block rule needs at least two B tokens")
    return SchemeSpec((), StageRule(len(spacers), tuple(spacers)))


def _locate(text: str, offset: int) -> tuple[int, int]:
    before = text[:offset]
    line = before.count("\n") + 1
    col = offset - (before.rfind("\n") + 1) + 1
    return line, col


# -- scheme file format ------------------------------------------------------

_RULE_RE = re.compile(r"^\s*cuts\s*=\s*(-?\d+)\s+spacers\s*=\s*\[([^\]]*)\]\s*$")


def _parse_rule(text: str, line: int, col: int) -> StageRule:
    m = _RULE_RE.match(text)
    if m is None:
        raise ParseError(f"malformed rule {text.strip()!r}", line, col)
    items = [s.strip() for s in m.group(2).split(",") if s.strip()]
    try:
        spacers = tuple(int(s) for s in items)
    except ValueError:
        raise ParseError("spacers must be integers", line, col) from None
    return StageRule(int(m.group(1)), spacers)


def parse_scheme(text: str) -> SchemeSpec:
    """Parse a preset name or a ``prefix:``/``tail:``/``block:`` scheme file."""
    lines = [(i + 1, raw.split("#", 1)[0]) for i, raw in enumerate(text.splitlines())]
    lines = [(i, s) for i, s in lines if s.strip()]
    if not lines:
        raise ParseError("empty scheme", 1, 1)
    if len(lines) == 1 and ":" not in lines[0][1]:
        name = lines[0][1].strip()
        if name in PRESETS:
            return PRESETS[name]
        raise ParseError(f"unknown preset {name!r}", lines[0][0], 1)

    prefix: list[StageRule] = []
    tail = None
    block = None
    for lineno, content in lines:
        key, sep, value = content.partition(":")
        key_col = len(content) - len(content.lstrip()) + 1
        key = key.strip()
        value_col = len(key) + key_col + 1
        if key == "prefix":
            for part in value.split(";"):
                if part.strip():
                    prefix.append(_parse_rule(part, lineno, value_col))
        elif key == "tail":
            tail = _parse_rule(value, lineno, value_col)
        elif key == "block":
            block = compile_block_rule(value)
        elif key == "cuts" or key.startswith("cuts"):
            # a bare rule line such as "cuts: 1" is a rule missing its spacers
            raise ValidationError(f"line {lineno}: bare rule; use 'tail: cuts=R spacers=[...]'")
        else:
            raise ParseError(f"unknown key {key!r}", lineno, key_col)
    if block is not None:
        if tail is not None:
            raise ParseError("'block' and 'tail' are mutually exclusive", lines[0][0], 1)
        tail = block.tail
    if tail is None:
        raise ParseError("scheme has no tail rule", lines[-1][0], 1)
    return SchemeSpec(tuple(prefix), tail)


def serialize_scheme(spec: SchemeSpec) -> str:
    if spec.name in PRESETS and PRESETS[spec.name] == spec:
        return spec.name + "\n"
    out = []
    if spec.prefix:
        out.append("prefix: " + "; ".join(r.to_text() for r in spec.prefix))
    out.append("tail: " + spec.tail.to_text())
    return "\n".join(out) + "\n"


def load_scheme(ref: str) -> SchemeSpec:
    """Resolve a CLI ``--scheme`` value: preset name, block rule, or file path."""
    if ref in PRESETS:
        return PRESETS[ref]
    if ref.startswith("block:"):
        return compile_block_rule(ref[len("block:"):])
    with open(ref, encoding="utf-8") as fh:
        return parse_scheme(fh.read())


# -- normalization -----------------------------------------------------------

def normalize(spec: SchemeSpec) -> tuple[Fraction, Fraction]:
    """Return ``(w1, total spacer mass)`` with ``w1 + total = 1``.

    Widths follow ``w_{n+1} = w_n / r_n`` and stage ``n`` adds
    ``sum(spacers_n) * w_{n+1}`` of spacer mass, so everything is linear in
    ``w1``; the tail contributes a geometric series.
    """
    coeff = Fraction(0)  # total spacer mass per unit of w1
    scale = Fraction(1)  # w_n / w1
    for rule in spec.prefix:
        scale /= rule.cuts
        coeff += rule.spacer_total * scale
    r, s = spec.tail.cuts, spec.tail.spacer_total
    # sum_{j>=1} s * scale / r^j = s * scale / (r - 1)
    coeff += s * scale / (r - 1)
    w1 = 1 / (1 + coeff)
    return w1, 1 - w1
