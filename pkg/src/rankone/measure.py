"""Exact Lebesgue measure on finite unions of half-open rational intervals.

Every set the package touches is an :class:`IntervalSet`: a canonical,
sorted list of disjoint, non-touching intervals ``[a, b)`` inside ``[0, 1)``
with :class:`fractions.Fraction` endpoints.  Canonical form is unique, so
``==`` on two sets is equality of the sets (not merely up to null sets).
"""

from __future__ import annotations

import json
import re
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

Scalar = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)

_RATIONAL_RE = re.compile(r"^-?\d+(?:/\d+)?$")


def to_scalar(value) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings to a Fraction.

    Floats are rejected: nothing in this package is allowed to round.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if not _RATIONAL_RE.match(text):
            raise ValueError(f"not a rational literal: {value!r}")
        q = Fraction(text)
        return q
    raise TypeError(f"cannot use {type(value).__name__} as an exact scalar")


def scalar_str(q: Fraction) -> str:
    """Serialize as ``"p/q"`` in lowest terms (``"0"``, ``"1"`` for integers)."""
    return str(q)


class IntervalSet:
    """Canonical finite union of disjoint half-open intervals in [0, 1)."""

    __slots__ = ("_ivs", "_hash")

    def __init__(self, intervals: Iterable[Sequence] = ()):
        pairs = []
        for pair in intervals:
            a, b = to_scalar(pair[0]), to_scalar(pair[1])
            if a < 0 or b > 1:
                raise ValueError(f"interval [{a}, {b}) leaves [0, 1)")
            if a < b:
                pairs.append((a, b))
        pairs.sort()
        self._ivs = tuple(_merge_sorted(pairs))
        self._hash = None

    @classmethod
    def _canonical(cls, ivs) -> "IntervalSet":
        # caller guarantees canonical form
        obj = cls.__new__(cls)
        obj._ivs = tuple(ivs)
        obj._hash = None
        return obj

    @classmethod
    def from_unsorted(cls, pairs) -> "IntervalSet":
        """Build from trusted in-range Fraction pairs, possibly overlapping."""
        pairs = sorted(p for p in pairs if p[0] < p[1])
        return cls._canonical(_merge_sorted(pairs))

    @classmethod
    def empty(cls) -> "IntervalSet":
        return _EMPTY

    @classmethod
    def full(cls) -> "IntervalSet":
        return _FULL

    @classmethod
    def interval(cls, a, b) -> "IntervalSet":
        return cls([(a, b)])

    @property
    def intervals(self) -> tuple:
        return self._ivs

    def __iter__(self):
        return iter(self._ivs)

    def __len__(self):
        return len(self._ivs)

    def __bool__(self):
        return bool(self._ivs)

    def __eq__(self, other):
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self._ivs == other._ivs

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._ivs)
        return self._hash

    def __repr__(self):
        if not self._ivs:
            return "IntervalSet(∅)"
        body = " ∪ ".join(f"[{a},{b})" for a, b in self._ivs)
        return f"IntervalSet({body})"

    # -- Boolean algebra -------------------------------------------------

    def union(self, other: "IntervalSet") -> "IntervalSet":
        if not other._ivs:
            return self
        if not self._ivs:
            return other
        return IntervalSet._canonical(_merge_sorted(_merge_two(self._ivs, other._ivs)))

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        xs, ys = self._ivs, other._ivs
        out = []
        i = j = 0
        while i < len(xs) and j < len(ys):
            a = max(xs[i][0], ys[j][0])
            b = min(xs[i][1], ys[j][1])
            if a < b:
                out.append((a, b))
            if xs[i][1] < ys[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet._canonical(out)

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        if not other._ivs or not self._ivs:
            return self
        ys = other._ivs
        out = []
        j = 0
        for a, b in self._ivs:
            while j < len(ys) and ys[j][1] <= a:
                j += 1
            k = j
            while k < len(ys) and ys[k][0] < b:
                if ys[k][0] > a:
                    out.append((a, ys[k][0]))
                a = max(a, ys[k][1])
                k += 1
            if a < b:
                out.append((a, b))
        return IntervalSet._canonical(out)

    def symdiff(self, other: "IntervalSet") -> "IntervalSet":
        return self.difference(other).union(other.difference(self))

    def complement(self) -> "IntervalSet":
        return _FULL.difference(self)

    __or__ = union
    __and__ = intersect
    __sub__ = difference
    __xor__ = symdiff

    def __invert__(self):
        return self.complement()

    # -- measure ---------------------------------------------------------

    def measure(self) -> Fraction:
        return sum((b - a for a, b in self._ivs), ZERO)

    def distance(self, other: "IntervalSet") -> Fraction:
        return self.symdiff(other).measure()

    def contains_point(self, x) -> bool:
        x = to_scalar(x)
        i = bisect_right(self._ivs, (x, ONE + 1)) - 1
        return i >= 0 and self._ivs[i][0] <= x < self._ivs[i][1]

    def classify(self, a, b) -> int:
        """1 if ``[a, b)`` lies inside this set, 0 if disjoint from it, -1 otherwise."""
        ivs = self._ivs
        i = bisect_right(ivs, (a, ONE + 1)) - 1
        if i >= 0 and ivs[i][1] > a:
            return 1 if b <= ivs[i][1] else -1
        nxt = i + 1
        if nxt < len(ivs) and ivs[nxt][0] < b:
            return -1
        return 0

    def issubset(self, other: "IntervalSet") -> bool:
        return not self.difference(other)

    def isdisjoint(self, other: "IntervalSet") -> bool:
        return not self.intersect(other)

    def leftmost(self, mass) -> "IntervalSet":
        """The initial segment of this set (in the order of [0,1)) of the given measure."""
        mass = to_scalar(mass)
        if mass < 0 or mass > self.measure():
            raise ValueError("requested slice exceeds the set's measure")
        out = []
        for a, b in self._ivs:
            if mass <= 0:
                break
            take = min(b - a, mass)
            out.append((a, a + take))
            mass -= take
        return IntervalSet._canonical(out)

    # -- serialization ---------------------------------------------------

    def to_list(self) -> list:
        return [[scalar_str(a), scalar_str(b)] for a, b in self._ivs]

    def to_json(self) -> str:
        return json.dumps(self.to_list(), separators=(",", ":"))

    @classmethod
    def from_list(cls, data) -> "IntervalSet":
        s = cls((to_scalar(a), to_scalar(b)) for a, b in data)
        return s

    @classmethod
    def from_json(cls, text: str) -> "IntervalSet":
        return cls.from_list(json.loads(text))


def _merge_sorted(pairs):
    out = []
    for a, b in pairs:
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return out


def _merge_two(xs, ys):
    i = j = 0
    out = []
    while i < len(xs) and j < len(ys):
        if xs[i] <= ys[j]:
            out.append(xs[i])
            i += 1
        else:
            out.append(ys[j])
            j += 1
    out.extend(xs[i:])
    out.extend(ys[j:])
    return out


_EMPTY = IntervalSet._canonical(())
_FULL = IntervalSet._canonical(((ZERO, ONE),))


def set_algebra(A: IntervalSet, B: IntervalSet, op: str) -> IntervalSet:
    ops = {
        "union": A.union,
        "intersect": A.intersect,
        "difference": A.difference,
        "symdiff": A.symdiff,
    }
    if op == "complement":
        return A.complement()
    try:
        return ops[op](B)
    except KeyError:
        raise ValueError(f"unknown set operation {op!r}") from None


def measure(A: IntervalSet) -> Fraction:
    return A.measure()


def distance(A: IntervalSet, B: IntervalSet) -> Fraction:
    """d(A, B) = measure of the symmetric difference."""
    return A.distance(B)


def union_all(sets: Iterable[IntervalSet]) -> IntervalSet:
    pairs = [iv for s in sets for iv in s.intervals]
    return IntervalSet.from_unsorted(pairs)


@dataclass(frozen=True)
class CertifiedValue:
    """Exact rational enclosure ``lo <= true value <= hi``."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if not (0 <= self.lo <= self.hi <= 1):
            raise ValueError(f"invalid enclosure [{self.lo}, {self.hi}]")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    def contains(self, q) -> bool:
        return self.lo <= to_scalar(q) <= self.hi

    def to_dict(self) -> dict:
        return {"lo": scalar_str(self.lo), "hi": scalar_str(self.hi)}
