"""Set constructions behind the light-mixing results, built and checked exactly.

* dense family ``D_h = B_h ∪ E_h ∪ A_h`` from a height-``h`` Rohlin tower,
  and the disjoint-translates lower bound ``mu(A ∩ T^n B) >= mu(Abar)``;
* refinement of small lightly mixing pairs into a disjoint family, and the
  base-4 digit scheme that turns it into algebra generators;
* the tower-based disjoint pair ``C_h, D_h`` for mildly mixing maps, with
  first-return times into the tower base;
* the sweeping-out generators ``F_i`` and the obstruction set
  ``B = (∪_{i<=N} T^{-i} A)^c``.

Anything the proofs assert about a liminf is only checked over a finite
horizon here, and reported as such.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .engine import DEFAULT_EPS, POOL, Engine
from .errors import ResourceError, ValidationError
from .measure import CertifiedValue, IntervalSet, scalar_str, to_scalar, union_all


def _sets_dict(**sets) -> dict:
    return {name: {"set": s.to_list(), "measure": scalar_str(s.measure())}
            for name, s in sets.items()}


# -- dense collection ----------------------------------------------------------

@dataclass(frozen=True)
class DenseFamilyElement:
    h: int
    stage: int
    B: IntervalSet
    E: IntervalSet
    Abar: IntervalSet
    A: IntervalSet
    D: IntervalSet

    def to_dict(self) -> dict:
        return {"h": self.h, "stage": self.stage,
                "sets": _sets_dict(B=self.B, E=self.E, Abar=self.Abar, A=self.A, D=self.D)}


def thm1_dense_family(engine: Engine, h: int) -> DenseFamilyElement:
    """Tower base ``B`` (error ``mu(E) < 1/h``), a ``1/h`` slice ``Abar`` of it,
    ``A = ⊎_{i<h} T^i Abar`` and ``D = B ∪ E ∪ A``."""
    if h < 1:
        raise ValidationError("h must be >= 1")
    B, E, N = engine.rohlin_tower(h, Fraction(1, h))
    Abar = B.leftmost(B.measure() / h)
    layers = []
    for i in range(h):
        img = engine.forward_image(Abar, i, DEFAULT_EPS)
        if img.unresolved_mass:
            raise AssertionError("translate of Abar left the tower")
        layers.append(img.resolved)
    A = union_all(layers)
    return DenseFamilyElement(h, N, B, E, Abar, A, B | E | A)


@dataclass
class Lemma1Report:
    """Outcome of checking the disjoint-translates lower bound.

    ``rows`` holds ``(n, margin_lo, margin_hi)`` where the margins are the
    certified enclosure of ``mu(A ∩ T^n B) - mu(Abar)``.
    """

    hypotheses_ok: bool
    failures: list = field(default_factory=list)
    coverage: Fraction = Fraction(0)
    coverage_exact: bool = False
    rows: list = field(default_factory=list)

    @property
    def refutations(self) -> list:
        return [n for n, _, hi in self.rows if hi < 0]

    @property
    def undecided(self) -> list:
        """n where the enclosure straddles zero: not refuted, not certified."""
        return [n for n, lo, hi in self.rows if lo < 0 <= hi]

    @property
    def min_margin_lo(self):
        return min((lo for _, lo, _ in self.rows), default=None)


def lemma1_check(engine: Engine, Abar: IntervalSet, h: int, B: IntervalSet, n_range,
                 eps=DEFAULT_EPS) -> Lemma1Report:
    """Check the hypotheses, then bound ``mu(A ∩ T^n B) - mu(Abar)`` for each n.

    Hypotheses: ``T^i Abar`` (``0 <= i < h``) pairwise disjoint, and
    ``∪_{i<h} T^{-i} B`` of full measure up to ``eps`` (``coverage_exact``
    says whether no mass was left undecided).  A failed hypothesis is
    reported, not raised.
    """
    eps = to_scalar(eps)
    report = Lemma1Report(hypotheses_ok=True)
    layers = []
    for i in range(h):
        img = engine.forward_image(Abar, i, eps / h)
        if img.unresolved_mass:
            report.failures.append(f"T^{i} Abar not resolved exactly (unresolved {img.unresolved_mass})")
        layers.append(img.resolved)
    seen = IntervalSet.empty()
    for i, layer in enumerate(layers):
        if not seen.isdisjoint(layer):
            report.failures.append(f"T^{i} Abar overlaps an earlier translate")
        seen = seen | layer
    A = seen

    # x lies in the union of T^{-i} B (i < h) iff its orbit enters B within h steps
    returned, unresolved, late = _first_return_pieces(
        engine, IntervalSet.full(), B, eps, engine.stage_cap, 100_000, horizon=h)
    report.coverage = engine.pieces_mass(p for p, _ in returned)
    report.coverage_exact = not unresolved and not late
    if late:
        report.failures.append(
            f"mass {engine.pieces_mass(late)} misses B for {h} steps: preimages do not cover")
    elif 1 - report.coverage > eps:
        report.failures.append(
            f"preimages of B cover only {report.coverage}, short by more than eps")
    if report.failures:
        report.hypotheses_ok = False
        return report

    floor = Abar.measure()
    for n in n_range:
        c = engine.correlation(B, A, n, eps)
        report.rows.append((n, c.lo - floor, c.hi - floor))
    return report


# -- dense algebra from small mixing pairs ---------------------------------------

@dataclass(frozen=True)
class PairFamily:
    pairs: tuple  # of (C_m, D_m, eps_m)
    selected: tuple  # indices into the raw list

    def to_dict(self) -> dict:
        return {"selected": list(self.selected),
                "pairs": [{"eps": scalar_str(e), **_sets_dict(C=c, D=d)}
                          for c, d, e in self.pairs]}


def _greedy_from(masses, epss, start):
    chosen = [start]
    for j in range(start + 1, len(masses)):
        ok = True
        for pos, m in enumerate(chosen):
            tail = sum((masses[x] for x in chosen[pos + 1:]), Fraction(0)) + masses[j]
            if not tail < epss[m] / 4:
                ok = False
                break
        if ok:
            chosen.append(j)
    return chosen


def thm3_refine_pairs(raw) -> PairFamily:
    """Select a subsequence whose later pairs have total mass below ``eps_m / 4``
    and strip each selected pair of everything that comes later."""
    raw = [(C, D, to_scalar(e)) for C, D, e in raw]
    for idx, (C, D, e) in enumerate(raw):
        if e <= 0:
            raise ValidationError(f"pair {idx}: eps must be positive")
        if not C.isdisjoint(D):
            raise ValidationError(f"pair {idx}: C and D overlap")
    masses = [(C | D).measure() for C, D, _ in raw]
    epss = [e for _, _, e in raw]
    best = max((_greedy_from(masses, epss, s) for s in range(len(raw))), key=len, default=[])
    if len(best) < 2:
        raise ValidationError("no subsequence of length >= 2 satisfies the tail-mass inequality")
    pairs = []
    for pos, m in enumerate(best):
        later = union_all(raw[x][0] | raw[x][1] for x in best[pos + 1:])
        C, D, e = raw[m]
        pairs.append((C - later, D - later, e))
    return PairFamily(tuple(pairs), tuple(best))


PIECES = ("empty", "C", "D", "CD")


def pattern_digit(i: int, m: int) -> int:
    """Base-4 digit ``i`` (1 = least significant) of ``m``."""
    return (m // 4 ** (i - 1)) % 4


@dataclass(frozen=True)
class AlgebraTruncation:
    generators: tuple  # F_1..F_k
    depth: int
    range: int

    def pattern(self, i: int, m: int) -> str:
        return PIECES[pattern_digit(i, m)]

    def to_dict(self) -> dict:
        return {"depth": self.depth, "range": self.range,
                "generators": [g.to_list() for g in self.generators]}


def thm3_algebra_generators(family: PairFamily, k: int, M: int) -> AlgebraTruncation:
    """``F_i`` takes nothing, ``C_m``, ``D_m`` or both according to digit ``i`` of ``m``."""
    if len(family.pairs) < M:
        raise ValidationError(f"family has {len(family.pairs)} pairs, need {M}")
    gens = []
    for i in range(1, k + 1):
        parts = []
        for m in range(1, M + 1):
            C, D, _ = family.pairs[m - 1]
            digit = pattern_digit(i, m)
            if digit & 1:
                parts.append(C)
            if digit & 2:
                parts.append(D)
        gens.append(union_all(parts))
    return AlgebraTruncation(tuple(gens), k, M)


def pattern_occurrences(k: int, M: int) -> dict:
    """Brute-force count of each length-``k`` digit pattern over ``1 <= m <= M``."""
    counts: dict = {}
    for m in range(1, M + 1):
        key = tuple(pattern_digit(i, m) for i in range(1, k + 1))
        counts[key] = counts.get(key, 0) + 1
    return counts


# -- first return and the mildly mixing pair -------------------------------------

def _first_return_pieces(engine: Engine, E: IntervalSet, B: IntervalSet, eps, cap,
                         max_steps: int, horizon: int | None = None):
    """Track pieces of ``E`` forward until they enter ``B``.

    Returns ``(returned, unresolved, late)``: ``(piece, t)`` pairs, pieces too
    small to split further, and pieces known to miss ``B`` for ``horizon``
    steps.  ``T`` maps the top level of stage ``n`` into level 0 of stage
    ``n`` plus the stage-``n`` pool, so when ``B`` holds both, a piece about
    to leave the top returns on the next step without further refinement.
    """
    eps = to_scalar(eps)
    tau = eps / 4
    absorbs_top: dict = {}

    def top_lands_in_B(n):
        if n not in absorbs_top:
            absorbs_top[n] = (engine.base(n) | engine.pool(n)).issubset(B)
        return absorbs_top[n]

    while True:
        returned, unresolved, late = [], [], []
        work = [(p, 0) for p in engine.decompose(E)]
        steps = 0
        while work:
            steps += 1
            if steps > max_steps:
                raise ResourceError(f"no return within {max_steps} steps")
            nxt = []
            for p, t in work:
                if horizon is not None and t >= horizon:
                    late.append(p)
                    continue
                n, i = p[0], p[1]
                small = engine.piece_mass(p) <= tau or n >= cap
                where = B.classify(*engine.piece_interval(p, t))
                if where == 1:
                    returned.append((p, t))
                elif where == -1 or i == POOL:
                    if small:
                        unresolved.append(p)
                    else:
                        nxt.extend((q, t) for q in engine.refine(p))
                elif i + t + 1 < engine.stage_data(n).h:
                    nxt.append((p, t + 1))
                elif top_lands_in_B(n):
                    if horizon is not None and t + 1 >= horizon:
                        late.append(p)
                    else:
                        returned.append((p, t + 1))
                elif small:
                    unresolved.append(p)
                else:
                    nxt.extend((q, t) for q in engine.refine(p))
            work = nxt
        if engine.pieces_mass(unresolved) <= eps:
            return returned, unresolved, late
        if tau < Fraction(1, 10**40):
            raise ResourceError("first-return decomposition did not reach eps",
                                achieved=engine.pieces_mass(unresolved))
        tau /= 16


def first_return_decomposition(engine: Engine, E: IntervalSet, B: IntervalSet,
                               cap: int | None = None, eps=DEFAULT_EPS,
                               max_steps: int = 100_000):
    """Split ``E`` into pieces with constant first-entry time into ``B``.

    Returns ``(pieces, unresolved)``: ``pieces`` is a list of
    ``(IntervalSet, i)`` sorted by ``i`` (pieces with equal ``i`` merged), and
    ``unresolved`` the part of ``E`` (mass <= eps) left undecided.
    """
    if B.measure() <= 0:
        raise ValidationError("B must have positive measure")
    cap = engine.stage_cap if cap is None else cap
    returned, unresolved, _ = _first_return_pieces(engine, E, B, eps, cap, max_steps)
    by_time: dict = {}
    for p, t in returned:
        by_time.setdefault(t, []).append(p)
    pieces = [(engine.pieces_set(ps), t) for t, ps in sorted(by_time.items())]
    return pieces, engine.pieces_set(unresolved)


@dataclass(frozen=True)
class MMPair:
    h: int
    stage: int
    branch: str  # "return-times" or "slice"
    B: IntervalSet
    E: IntervalSet
    C: IntervalSet
    D: IntervalSet
    unresolved: Fraction

    def to_dict(self) -> dict:
        return {"h": self.h, "stage": self.stage, "branch": self.branch,
                "unresolved": scalar_str(self.unresolved),
                "sets": _sets_dict(B=self.B, E=self.E, C=self.C, D=self.D)}


def _small_error_tower(engine: Engine, height: int):
    for N in range(1, engine.stage_cap + 1):
        hN, w = engine.height(N), engine.width(N)
        blocks = hN // height
        if blocks == 0:
            continue
        mu_B = blocks * w
        mu_E = (hN % height) * w + engine.pool_mass(N)
        if mu_E < mu_B / (4 * height):
            return N, blocks
    raise ResourceError(f"no stage up to {engine.stage_cap} has a small enough error set")


def thm4_mm_pair(engine: Engine, h: int, eps=DEFAULT_EPS) -> MMPair:
    """Disjoint ``C_h, D_h`` of measure < 2/(h+1) from a height-(h+1) tower.

    ``C_h`` follows each point of the error set ``E`` until ``h`` steps after
    it first enters the base ``B``; when ``E`` is null a thin slice of ``B``
    and its ``h`` translates is used instead.  ``D_h`` is what remains of the
    bottom and top tower levels.
    """
    if h < 1:
        raise ValidationError("h must be >= 1")
    H = h + 1
    N, blocks = _small_error_tower(engine, H)
    B = engine.levels_set(N, range(0, blocks * H, H))
    top = engine.levels_set(N, range(h, blocks * H, H))
    E = engine.levels_set(N, range(blocks * H)).complement()
    unresolved = Fraction(0)
    if E.measure() > 0:
        branch = "return-times"
        returned, pending, _ = _first_return_pieces(engine, E, B, eps, engine.stage_cap, 100_000)
        unresolved = engine.pieces_mass(pending)
        intervals = []
        stack = list(returned)
        while stack:
            p, t = stack.pop()
            if p[1] + t + h >= engine.stage_data(p[0]).h:
                stack.extend((q, t) for q in engine.refine(p))
                continue
            intervals.extend(engine.piece_interval(p, s) for s in range(t + h + 1))
        C = IntervalSet.from_unsorted(intervals)
    else:
        branch = "slice"
        Ahat = B.leftmost(B.measure() / (8 * H))
        layers = [engine.forward_image(Ahat, i, eps) for i in range(H)]
        if any(l.unresolved_mass for l in layers):
            raise AssertionError("slice translate left the tower")
        C = union_all(l.resolved for l in layers)
    D = (B - C) | (top - C)
    return MMPair(h, N, branch, B, E, C, D, unresolved)


# -- sweeping-out generators -------------------------------------------------------

def thm5_indices(i: int, max_index: int) -> list:
    """Indices ``m 2^(i+1) + j`` (``m >= 0``, ``1 <= j <= 2^i``) up to ``max_index``."""
    period, width = 2 ** (i + 1), 2 ** i
    return [x for x in range(1, max_index + 1) if 1 <= (x - 1) % period + 1 <= width]


def thm5_generators(C_list, k: int) -> list:
    """``[(F_i, indices_i)]`` for ``i = 1..k``; ``C_list[0]`` is ``C_1``."""
    for a in range(len(C_list)):
        for b in range(a + 1, len(C_list)):
            if not C_list[a].isdisjoint(C_list[b]):
                raise ValidationError(f"C_{a + 1} and C_{b + 1} overlap")
    out = []
    for i in range(1, k + 1):
        idx = thm5_indices(i, len(C_list))
        out.append((union_all(C_list[x - 1] for x in idx), idx))
    return out


# -- obstruction to sweeping out ---------------------------------------------------

@dataclass(frozen=True)
class Obstruction:
    N: int
    A: IntervalSet
    feasible: bool
    inner: IntervalSet
    outer: IntervalSet

    @property
    def gap(self) -> Fraction:
        return self.outer.measure() - self.inner.measure()

    def to_dict(self) -> dict:
        return {"N": self.N, "feasible": self.feasible, "gap": scalar_str(self.gap),
                "sets": _sets_dict(A=self.A, B_inner=self.inner, B_outer=self.outer)}


def thm6_obstruction(engine: Engine, N: int, A: IntervalSet, eps=DEFAULT_EPS) -> Obstruction:
    """Enclose ``B = (∪_{i=0}^N T^{-i} A)^c`` between ``inner ⊆ B ⊆ outer``.

    ``inner`` intersects resolved preimages of ``A^c``; ``outer`` removes
    resolved preimages of ``A``.  Each preimage is computed to ``eps/2``, so
    ``mu(outer) - mu(inner) <= (N + 1) eps``.
    """
    eps = to_scalar(eps)
    feasible = A.measure() < Fraction(1, 2 * (N + 1))
    Ac = A.complement()
    inner, hit = IntervalSet.full(), IntervalSet.empty()
    for i in range(N + 1):
        inner = inner & engine.forward_image(Ac, -i, eps / 2).resolved
        hit = hit | engine.forward_image(A, -i, eps / 2).resolved
    return Obstruction(N, A, feasible, inner, hit.complement())


def obstruction_scan(engine: Engine, ob: Obstruction, stages, eps=DEFAULT_EPS) -> list:
    """``(n, h_n, enclosure of mu(T^{h_n} A ∩ B))`` using inner/outer ``B``."""
    rows = []
    for n in stages:
        k = engine.height(n)
        inner, outer = engine.correlations(ob.A, [ob.inner, ob.outer], k, eps)
        rows.append((n, k, CertifiedValue(inner.lo, outer.hi)))
    return rows
