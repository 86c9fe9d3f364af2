"""Product systems on the unit square and sweeping-out probes.

Sets in ``[0,1)^2`` are :class:`RectSet` values kept in column form: sorted,
disjoint x-strips, each carrying the fiber above it.  Adjacent strips with
equal fibers are merged, so the form is canonical and ``==`` is set equality.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .engine import DEFAULT_EPS, Engine, PartialImage
from .errors import ValidationError
from .measure import CertifiedValue, IntervalSet, scalar_str, to_scalar, union_all
from .scheme import RIGID3, STAIRCASE4, SchemeSpec


class RectSet:
    """Finite union of rectangles ``X x Y`` in ``[0,1)^2``, stored as strips."""

    __slots__ = ("_strips",)

    def __init__(self, rects=()):
        strips = []
        for X, Y in rects:
            if not Y:
                continue
            strips.extend((a, b, Y) for a, b in X)
        self._strips = _canonical(_overlay(strips, lambda fibers: union_all(fibers)))

    @classmethod
    def _from_strips(cls, strips) -> "RectSet":
        obj = cls.__new__(cls)
        obj._strips = _canonical(strips)
        return obj

    @classmethod
    def full(cls) -> "RectSet":
        return cls([(IntervalSet.full(), IntervalSet.full())])

    @property
    def strips(self) -> tuple:
        """``(a, b, fiber)`` triples with ``a < b`` sorted and disjoint."""
        return self._strips

    def rects(self) -> list:
        return [(IntervalSet._canonical(((a, b),)), Y) for a, b, Y in self._strips]

    def __eq__(self, other):
        if not isinstance(other, RectSet):
            return NotImplemented
        return self._strips == other._strips

    def __hash__(self):
        return hash(self._strips)

    def __bool__(self):
        return bool(self._strips)

    def __repr__(self):
        body = " ∪ ".join(f"[{a},{b})x{Y!r}" for a, b, Y in self._strips) or "∅"
        return f"RectSet({body})"

    def measure(self) -> Fraction:
        return sum(((b - a) * Y.measure() for a, b, Y in self._strips), Fraction(0))

    def _combine(self, other: "RectSet", op) -> "RectSet":
        cuts = sorted({Fraction(0), Fraction(1)}
                      | {p for a, b, _ in self._strips for p in (a, b)}
                      | {p for a, b, _ in other._strips for p in (a, b)})
        mine, theirs = _fibers_on(self._strips, cuts), _fibers_on(other._strips, cuts)
        out = []
        for a, b, X, Y in zip(cuts, cuts[1:], mine, theirs):
            Z = op(X, Y)
            if Z:
                out.append((a, b, Z))
        return RectSet._from_strips(out)

    def union(self, other):
        return self._combine(other, IntervalSet.union)

    def intersect(self, other):
        return self._combine(other, IntervalSet.intersect)

    def difference(self, other):
        return self._combine(other, IntervalSet.difference)

    def symdiff(self, other):
        return self._combine(other, IntervalSet.symdiff)

    def complement(self):
        return RectSet.full().difference(self)

    __or__ = union
    __and__ = intersect
    __sub__ = difference
    __xor__ = symdiff

    def distance(self, other) -> Fraction:
        return self.symdiff(other).measure()

    def fiber_measures(self) -> list:
        """``(a, b, mu(fiber))`` over the x-grid, gaps included with measure 0."""
        out, pos = [], Fraction(0)
        for a, b, Y in self._strips:
            if pos < a:
                out.append((pos, a, Fraction(0)))
            out.append((a, b, Y.measure()))
            pos = b
        if pos < 1:
            out.append((pos, Fraction(1), Fraction(0)))
        return out

    def to_list(self) -> list:
        return [{"x": [[scalar_str(a), scalar_str(b)]], "y": Y.to_list()}
                for a, b, Y in self._strips]

    def to_json(self) -> str:
        return json.dumps(self.to_list(), separators=(",", ":"))

    @classmethod
    def from_list(cls, data) -> "RectSet":
        return cls((IntervalSet.from_list(item["x"]), IntervalSet.from_list(item["y"]))
                   for item in data)

    @classmethod
    def from_json(cls, text: str) -> "RectSet":
        return cls.from_list(json.loads(text))


def _overlay(strips, merge):
    cuts = sorted({p for a, b, _ in strips for p in (a, b)})
    where = {p: i for i, p in enumerate(cuts)}
    buckets = [[] for _ in range(max(len(cuts) - 1, 0))]
    for a, b, Y in strips:
        for i in range(where[a], where[b]):
            buckets[i].append(Y)
    return [(cuts[i], cuts[i + 1], merge(fibers)) for i, fibers in enumerate(buckets) if fibers]


def _fibers_on(strips, cuts):
    """Fiber over each elementary interval ``[cuts[i], cuts[i+1])`` of a canonical strip list."""
    empty = IntervalSet.empty()
    out, j = [], 0
    for a in cuts[:-1]:
        while j < len(strips) and strips[j][1] <= a:
            j += 1
        out.append(strips[j][2] if j < len(strips) and strips[j][0] <= a else empty)
    return out


def _canonical(strips) -> tuple:
    out = []
    for a, b, Y in strips:
        if not Y or a >= b:
            continue
        if out and out[-1][1] == a and out[-1][2] == Y:
            out[-1] = (out[-1][0], b, Y)
        else:
            out.append((a, b, Y))
    return tuple(out)


# -- product system --------------------------------------------------------------

class ProductSystem:
    """``S x T`` acting coordinatewise on ``[0,1)^2``."""

    def __init__(self, X: Engine, Y: Engine):
        self.X, self.Y = X, Y

    def forward_image(self, A: RectSet, k: int, eps=DEFAULT_EPS) -> PartialImage:
        """Resolved part of ``(S x T)^k A`` as a RectSet plus unresolved mass."""
        eps = to_scalar(eps)
        strips = A.strips
        if not strips:
            return PartialImage(RectSet(), Fraction(0), IntervalSet.empty())
        delta = eps / (2 * len(strips))
        rects, lost = [], Fraction(0)
        for a, b, V in strips:
            U = IntervalSet._canonical(((a, b),))
            iu = self.X.forward_image(U, k, delta)
            iv = self.Y.forward_image(V, k, delta)
            rects.append((iu.resolved, iv.resolved))
            lost += (b - a) * V.measure() - iu.resolved.measure() * iv.resolved.measure()
        return PartialImage(RectSet(rects), lost, IntervalSet.empty())

    def correlation(self, A: RectSet, B: RectSet, k: int, eps=DEFAULT_EPS) -> CertifiedValue:
        return product_correlation(self.X, self.Y, A, B, k, eps)


def product_correlation(X: Engine, Y: Engine, A: RectSet, B: RectSet, k: int,
                        eps=DEFAULT_EPS) -> CertifiedValue:
    """Enclosure of ``mu x mu((S x T)^k A ∩ B)`` of width at most ``eps``.

    Every strip pair contributes ``[loX loY, hiX hiY]`` where ``[loX, hiX]``
    and ``[loY, hiY]`` are the one-dimensional enclosures, so for single
    rectangles the endpoints are exactly the products of the factor endpoints.
    """
    eps = to_scalar(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not A or not B:
        return CertifiedValue(Fraction(0), Fraction(0))
    delta = eps / (3 * len(A.strips) * len(B.strips))
    lo = hi = Fraction(0)
    for a, b, V in A.strips:
        iu = X.forward_image(IntervalSet._canonical(((a, b),)), k, delta)
        iv = Y.forward_image(V, k, delta)
        for c, d, W in B.strips:
            lx = iu.resolved.intersect(IntervalSet._canonical(((c, d),))).measure()
            ly = iv.resolved.intersect(W).measure()
            lo += lx * ly
            hi += (lx + iu.unresolved_mass) * (ly + iv.unresolved_mass)
    return CertifiedValue(lo, min(hi, Fraction(1)))


# -- interleaved rigid / mixing schemes --------------------------------------------

def interleaved_pair(windows) -> tuple:
    """Two schemes alternating rigid and staircase stages in opposite phase.

    Each window ``(a, b)`` gives the first scheme ``a`` rigid stages then ``b``
    staircase stages, and the second scheme the same stages mixing-first.
    Both continue with the staircase rule.
    """
    windows = list(windows)
    if not windows:
        raise ValidationError("need at least one window")
    first, second = [], []
    for a, b in windows:
        if a < 0 or b < 0 or a + b == 0:
            raise ValidationError(f"window ({a}, {b}) is empty or negative")
        first += [RIGID3] * a + [STAIRCASE4] * b
        second += [STAIRCASE4] * b + [RIGID3] * a
    return SchemeSpec(tuple(first), STAIRCASE4), SchemeSpec(tuple(second), STAIRCASE4)


def rigidity_defect(engine: Engine, L: IntervalSet, k: int, eps=DEFAULT_EPS) -> CertifiedValue:
    """Enclosure of ``d(T^k L, L)``: resolved part known, unresolved mass either way."""
    img = engine.forward_image(L, k, eps)
    known = img.resolved.symdiff(L).measure()
    u = img.unresolved_mass
    return CertifiedValue(max(Fraction(0), known - u), min(Fraction(1), known + u))


# -- sequences and probes ----------------------------------------------------------

@dataclass(frozen=True)
class SequenceSpec:
    """Finite power sequence ``k_1, ..., k_L``.

    ``kind`` is ``explicit`` (``values``), ``heights`` (``h_1..h_count`` of the
    scheme being probed), ``arithmetic`` (``start``, ``step``, ``count``) or
    ``random`` (``count`` distinct integers in ``[low, high]`` from ``seed``).
    """

    kind: str
    values: tuple = ()
    start: int = 1
    step: int = 1
    count: int = 0
    low: int = 1
    high: int = 1000
    seed: int = 0

    def generate(self, engine: Engine | None = None) -> list:
        if self.kind == "explicit":
            seq = list(self.values)
        elif self.kind == "heights":
            if engine is None:
                raise ValidationError("heights sequence needs a scheme")
            seq = [engine.height(n) for n in range(1, self.count + 1)]
        elif self.kind == "arithmetic":
            if self.step == 0:
                raise ValidationError("arithmetic step must be nonzero")
            seq = [self.start + i * self.step for i in range(self.count)]
        elif self.kind == "random":
            if self.high - self.low + 1 < self.count:
                raise ValidationError("range too small for distinct draws")
            seq = random.Random(self.seed).sample(range(self.low, self.high + 1), self.count)
        else:
            raise ValidationError(f"unknown sequence kind {self.kind!r}")
        if len(set(seq)) != len(seq):
            raise ValidationError("sequence entries must be distinct")
        return seq


def _x_engine(system):
    return system.X if isinstance(system, ProductSystem) else system


def sweep_probe(system, A, seq, eps=DEFAULT_EPS) -> list:
    """``[(L, enclosure of mu(∪_{i<=L} T^{k_i} A))]`` for every prefix length.

    ``system`` is an :class:`Engine` with IntervalSet ``A`` or a
    :class:`ProductSystem` with RectSet ``A``.
    """
    eps = to_scalar(eps)
    mass = A.measure()
    if mass <= 0:
        raise ValidationError("A must have positive measure")
    ks = seq.generate(_x_engine(system)) if isinstance(seq, SequenceSpec) else list(seq)
    if not ks:
        return []
    delta = eps / len(ks)
    covered, lost = None, Fraction(0)
    rows = []
    for L, k in enumerate(ks, start=1):
        img = system.forward_image(A, k, delta)
        covered = img.resolved if covered is None else covered | img.resolved
        lost += img.unresolved_mass
        got = covered.measure()
        lo = max(got, mass)
        hi = min(Fraction(1), got + lost, L * mass)
        rows.append((L, CertifiedValue(lo, hi)))
    return rows


@dataclass
class UsoReport:
    """Worst coverage over sampled tuples; a sample, never an exhaustive search."""

    N: int
    trials: int
    seed: int
    worst: CertifiedValue
    worst_tuple: tuple
    rows: list = field(default_factory=list)  # (trial, tuple, CertifiedValue)
    label: str = "non-exhaustive diagnostic"


def uso_probe(system, A, N: int, trials: int, seed: int, eps=DEFAULT_EPS,
              low: int = 0, high: int = 999) -> UsoReport:
    """Sample ``trials`` tuples of ``N`` distinct powers and keep the worst coverage."""
    if trials < 1 or N < 1:
        raise ValidationError("need trials >= 1 and N >= 1")
    if high - low + 1 < N:
        raise ValidationError("power range too small for distinct draws")
    rng = random.Random(seed)
    rows = []
    for trial in range(1, trials + 1):
        ks = tuple(rng.sample(range(low, high + 1), N))
        cov = sweep_probe(system, A, ks, eps)[-1][1]
        rows.append((trial, ks, cov))
    t, ks, worst = min(rows, key=lambda r: (r[2].lo, r[0]))
    return UsoReport(N, trials, seed, worst, ks, rows)


# -- residual set membership ---------------------------------------------------------

def residual_witness(A: RectSet, E: IntervalSet, n: int) -> tuple:
    """``(member, A', deficit)`` with ``A' = A ∪ (E x [0,1))``.

    ``member`` is the exact test ``mu(A △ A') < mu(E)/n`` and ``deficit`` the
    slack ``mu(E)/n - mu(A △ A')``.
    """
    if E.measure() <= 0:
        raise ValidationError("E must have positive measure")
    if n < 1:
        raise ValidationError("n must be >= 1")
    A2 = A | RectSet([(E, IntervalSet.full())])
    gap = A.distance(A2)
    bound = E.measure() / n
    return gap < bound, A2, bound - gap


def fiber_heavy_base(A: RectSet, E: IntervalSet, eps) -> IntervalSet:
    """Points of ``E`` whose fiber in ``A`` has measure strictly above ``1 - eps``."""
    eps = to_scalar(eps)
    heavy = [(a, b) for a, b, m in A.fiber_measures() if m > 1 - eps]
    return IntervalSet.from_unsorted(heavy).intersect(E)
