"""Tower stages, exact orbits and certified correlations for rank-one maps.

Geometric realization on [0, 1): stage 1 is the single level ``[0, w1)``
and the pool ``[w1, 1)``.  Stage ``n + 1`` cuts every level into ``r_n``
equal columns, stacks them left to right and puts ``spacers_n[i]`` levels
above column ``i``; spacers are carved from the left end of the pool, which
therefore stays a single interval ``[P_n, 1)``.

Every level's left endpoint at stage ``n`` is an integer multiple of
``w_n``.  The set-level code exploits this: a *piece* is a sub-interval of
one level, stored as ``(n, i, a, b, D)`` meaning offsets ``[a/D, b/D)`` of
level ``i`` in units of ``w_n``, so refining a piece is integer arithmetic.
Pool pieces are ``(n, POOL, x, y, 0)`` with absolute Fraction endpoints.

The map ``T`` sends level ``i`` of any stage onto level ``i + 1`` by
translation; it is undefined at a finite stage on the top level and the
pool, so every set-level result is an enclosure with an unresolved mass.
"""

from __future__ import annotations

import json
import math
import threading
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ResourceError
from .measure import CertifiedValue, IntervalSet, scalar_str, to_scalar
from .scheme import SchemeSpec, normalize

POOL = -1
DEFAULT_EPS = Fraction(1, 10**6)
DEFAULT_STAGE_CAP = 40
DEFAULT_MAX_LEVELS = 2_000_000


@dataclass(frozen=True)
class Stage:
    n: int
    width: Fraction
    height: int
    levels: tuple
    pool: IntervalSet

    def level_set(self, i: int) -> IntervalSet:
        return IntervalSet._canonical((self.levels[i],))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "w": scalar_str(self.width),
            "h": self.height,
            "levels": [[scalar_str(a), scalar_str(b)] for a, b in self.levels],
            "pool": self.pool.to_list(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


@dataclass(frozen=True)
class PartialImage:
    resolved: IntervalSet
    unresolved_mass: Fraction
    source_unresolved: IntervalSet


class _StageData:
    """Per-stage combinatorics: how stage n sits inside stage n + 1."""

    __slots__ = ("n", "h", "w", "pool_start", "cuts", "starts", "spacer_index",
                 "pool_int", "segments", "seg_keys")


class Engine:
    """Stage cache and set/orbit computations for one scheme.

    The cache only grows; all computations on already-built stages are pure.
    """

    def __init__(self, spec: SchemeSpec, stage_cap: int = DEFAULT_STAGE_CAP,
                 max_levels: int = DEFAULT_MAX_LEVELS):
        self.spec = spec
        self.stage_cap = stage_cap
        self.max_levels = max_levels
        self.w1, self.total_spacer_mass = normalize(spec)
        self._lock = threading.Lock()
        self._data: list[_StageData] = []
        self._stages: dict[int, Stage] = {}
        self._ell_cache: dict = {}
        self._seg_arrays: dict = {}
        self._append_stage_one()

    # -- stage combinatorics ---------------------------------------------

    def _append_stage_one(self):
        d = _StageData()
        d.n, d.h, d.w, d.pool_start = 1, 1, self.w1, self.w1
        self._data.append(d)

    def _extend_to(self, n: int):
        with self._lock:
            while len(self._data) <= n:
                prev = self._data[-1]
                rule = self.spec.rule(prev.n)
                r = rule.cuts
                prev.cuts = r
                starts, spacer_index, segments = [], [], []
                pos = 0
                for j, s in enumerate(rule.spacers):
                    starts.append(pos)
                    segments.append((pos, j, False))
                    pos += prev.h
                    if s:
                        segments.append((pos, len(spacer_index), True))
                    spacer_index.extend(range(pos, pos + s))
                    pos += s
                prev.starts = starts
                prev.spacer_index = spacer_index
                prev.segments = segments
                prev.seg_keys = [seg[0] for seg in segments]
                d = _StageData()
                d.n = prev.n + 1
                d.h = pos
                d.w = prev.w / r
                d.pool_start = prev.pool_start + len(spacer_index) * d.w
                q = prev.pool_start / d.w
                assert q.denominator == 1
                prev.pool_int = q.numerator
                self._data.append(d)

    def stage_data(self, n: int) -> _StageData:
        if n < 1:
            raise ValueError("stages are numbered from 1")
        if n + 1 >= len(self._data):
            self._extend_to(n + 1)
        return self._data[n - 1]

    def height(self, n: int) -> int:
        return self.stage_data(n).h

    def width(self, n: int) -> Fraction:
        return self.stage_data(n).w

    def pool_mass(self, n: int) -> Fraction:
        return 1 - self.stage_data(n).pool_start

    def ell(self, n: int, idx: int) -> int:
        """Left endpoint of level ``idx`` at stage ``n`` in units of ``w_n``."""
        key = (n, idx)
        hit = self._ell_cache.get(key)
        if hit is not None:
            return hit
        self.stage_data(n)
        acc, mult, m, i = 0, 1, n, idx
        data = self._data
        while m > 1:
            prev = data[m - 2]
            k = bisect_right(prev.seg_keys, i) - 1
            start, tag, is_spacer = prev.segments[k]
            if is_spacer:
                acc += (prev.pool_int + tag + (i - start)) * mult
                break
            acc += tag * mult
            mult *= prev.cuts
            i -= start
            m -= 1
        if len(self._ell_cache) < 500_000:
            self._ell_cache[key] = acc
        return acc

    def ell_many(self, n: int, idxs) -> list:
        """:meth:`ell` for many indices of one stage at once."""
        idxs = list(idxs)
        w = self.stage_data(n).w
        if len(idxs) < 64 or w.denominator // w.numerator >= 2**62:
            return [self.ell(n, i) for i in idxs]
        i = np.asarray(idxs, dtype=np.int64)
        acc = np.zeros_like(i)
        mult = np.ones_like(i)
        live = np.ones(i.shape, dtype=bool)
        for m in range(n, 1, -1):
            keys, tags, spacer, cuts, pool_int = self._segment_arrays(m - 1)
            k = np.searchsorted(keys, i, side="right") - 1
            hit = live & spacer[k]
            acc[hit] += (pool_int + tags[k[hit]] + i[hit] - keys[k[hit]]) * mult[hit]
            live &= ~hit
            step = live
            acc[step] += tags[k[step]] * mult[step]
            i[step] -= keys[k[step]]
            mult[step] *= cuts
            if not live.any():
                break
        return acc.tolist()

    def _segment_arrays(self, m: int):
        cache = self._seg_arrays
        if m not in cache:
            d = self._data[m - 1]
            cache[m] = (np.array(d.seg_keys, dtype=np.int64),
                        np.array([seg[1] for seg in d.segments], dtype=np.int64),
                        np.array([seg[2] for seg in d.segments], dtype=bool),
                        d.cuts, d.pool_int)
        return cache[m]

    def level_interval(self, n: int, idx: int) -> tuple:
        h = self.height(n)
        if not 0 <= idx < h:
            raise IndexError(f"level {idx} outside stage {n} of height {h}")
        w = self.width(n)
        left = self.ell(n, idx) * w
        return left, left + w

    def levels_set(self, n: int, indices) -> IntervalSet:
        return IntervalSet.from_unsorted(self.level_interval(n, i) for i in indices)

    def base(self, n: int) -> IntervalSet:
        return self.levels_set(n, [0])

    def pool(self, n: int) -> IntervalSet:
        return IntervalSet._canonical(((self.stage_data(n).pool_start, Fraction(1)),)) \
            if self.pool_mass(n) > 0 else IntervalSet.empty()

    # -- literal stage construction ----------------------------------------

    def build_stage(self, n: int) -> Stage:
        """Materialize stage ``n`` by literally cutting and stacking intervals."""
        if n < 1:
            raise ValueError("stages are numbered from 1")
        if n > self.stage_cap:
            raise ResourceError(f"stage {n} exceeds the stage cap {self.stage_cap}")
        if self.height(n) > self.max_levels:
            raise ResourceError(
                f"stage {n} has {self.height(n)} levels, above the cap {self.max_levels}")
        if n in self._stages:
            return self._stages[n]
        if n == 1:
            stage = Stage(1, self.w1, 1, ((Fraction(0), self.w1),),
                          IntervalSet([(self.w1, 1)]))
        else:
            prev = self.build_stage(n - 1)
            rule = self.spec.rule(n - 1)
            w = prev.width / rule.cuts
            pool = prev.pool
            levels = []
            for j, s in enumerate(rule.spacers):
                levels.extend((a + j * w, a + (j + 1) * w) for a, _ in prev.levels)
                for _ in range(s):
                    piece = pool.leftmost(w)
                    levels.append(piece.intervals[0])
                    pool = pool.difference(piece)
            stage = Stage(n, w, len(levels), tuple(levels), pool)
        with self._lock:
            self._stages.setdefault(n, stage)
        return self._stages[n]

    # -- points --------------------------------------------------------------

    def orbit_point(self, x, k: int, stage_cap: int | None = None):
        """``T^k x`` exactly, or ``None`` if unresolved within ``stage_cap``."""
        x = to_scalar(x)
        if not 0 <= x < 1:
            raise ValueError("x must lie in [0, 1)")
        if k == 0:
            return x
        cap = self.stage_cap if stage_cap is None else stage_cap
        d = self.stage_data(1)
        if x < self.w1:
            i, off = 0, x
        else:
            i, off = POOL, x
        n = 1
        while True:
            if i != POOL and 0 <= i + k < d.h:
                return self.ell(n, i + k) * d.w + off
            if n >= cap:
                return None
            nxt = self.stage_data(n + 1)
            if i != POOL:
                j = math.floor(off / nxt.w)
                i = d.starts[j] + i
                off -= j * nxt.w
            elif off < nxt.pool_start:
                t = math.floor((off - d.pool_start) / nxt.w)
                i = d.spacer_index[t]
                off = off - d.pool_start - t * nxt.w
            n, d = n + 1, nxt

    # -- pieces --------------------------------------------------------------

    def decompose(self, A: IntervalSet) -> list:
        """Split ``A`` into stage-1 pieces."""
        w1 = self.w1
        pieces = []
        for a, b in A:
            if a < w1:
                lo, hi = a / w1, min(b, w1) / w1
                D = _lcm(lo.denominator, hi.denominator)
                pieces.append((1, 0, lo.numerator * (D // lo.denominator),
                               hi.numerator * (D // hi.denominator), D))
            if b > w1:
                pieces.append((1, POOL, max(a, w1), b, 0))
        return pieces

    def refine(self, piece) -> list:
        n, i, a, b, D = piece
        d = self.stage_data(n)
        nxt = self.stage_data(n + 1)
        if i != POOL:
            r = d.cuts
            ar, br = a * r, b * r
            out = []
            for j in range(ar // D, -(-br // D)):
                base = j * D
                out.append((n + 1, d.starts[j] + i, max(ar, base) - base,
                            min(br, base + D) - base, D))
            return out
        x, y = a, b
        out = []
        w = nxt.w
        if x < nxt.pool_start:
            t0 = math.floor((x - d.pool_start) / w)
            t1 = math.ceil((min(y, nxt.pool_start) - d.pool_start) / w)
            for t in range(t0, t1):
                left = d.pool_start + t * w
                lo = (max(x, left) - left) / w
                hi = (min(y, left + w) - left) / w
                E = _lcm(lo.denominator, hi.denominator)
                out.append((n + 1, d.spacer_index[t], lo.numerator * (E // lo.denominator),
                            hi.numerator * (E // hi.denominator), E))
        if y > nxt.pool_start:
            out.append((n + 1, POOL, max(x, nxt.pool_start), y, 0))
        return out

    def piece_mass(self, piece) -> Fraction:
        n, i, a, b, D = piece
        if i == POOL:
            return b - a
        return Fraction(b - a, D) * self._data[n - 1].w

    def pieces_mass(self, pieces) -> Fraction:
        # group by (stage, denominator) to keep Fraction work small
        groups: dict = {}
        pool = Fraction(0)
        for n, i, a, b, D in pieces:
            if i == POOL:
                pool += b - a
            else:
                key = (n, D)
                groups[key] = groups.get(key, 0) + (b - a)
        total = pool
        for (n, D), num in groups.items():
            total += Fraction(num, D) * self._data[n - 1].w
        return total

    def piece_interval(self, piece, shift: int = 0) -> tuple:
        """Interval of ``T^shift`` applied to a level piece (must stay in its stage)."""
        n, i, a, b, D = piece
        if i == POOL:
            if shift:
                raise ValueError("pool pieces cannot be translated")
            return a, b
        w = self._data[n - 1].w
        e = self.ell(n, i + shift) * D
        return Fraction(e + a, D) * w, Fraction(e + b, D) * w

    def _pieces_ints(self, pieces, shift: int = 0, extra_dens=()):
        """Merged piece intervals as integer pairs over a common denominator ``Q``."""
        level = [p for p in pieces if p[1] != POOL]
        pool = [(p[2], p[3]) for p in pieces if p[1] == POOL]
        if pool and shift:
            raise ValueError("pool pieces cannot be translated")
        units = {}
        for n, _, _, _, D in level:
            if (n, D) not in units:
                units[(n, D)] = self._data[n - 1].w / D
        Q = 1
        for u in units.values():
            Q = _lcm(Q, u.denominator)
        for x, y in pool:
            Q = _lcm(_lcm(Q, x.denominator), y.denominator)
        for den in extra_dens:
            Q = _lcm(Q, den)
        scale = {key: u.numerator * (Q // u.denominator) for key, u in units.items()}
        by_stage: dict = {}
        for p in level:
            by_stage.setdefault(p[0], []).append(p)
        ints = []
        for n, group in by_stage.items():
            ells = self.ell_many(n, [p[1] + shift for p in group])
            for (_, _, a, b, D), e in zip(group, ells):
                s = scale[(n, D)]
                e *= D
                ints.append(((e + a) * s, (e + b) * s))
        for x, y in pool:
            ints.append((x.numerator * (Q // x.denominator), y.numerator * (Q // y.denominator)))
        ints.sort()
        merged = []
        for a, b in ints:
            if merged and a <= merged[-1][1]:
                if b > merged[-1][1]:
                    merged[-1][1] = b
            else:
                merged.append([a, b])
        return merged, Q

    def pieces_set(self, pieces, shift: int = 0) -> IntervalSet:
        """Union of piece intervals (translated by ``shift``), merged in integer coordinates."""
        merged, Q = self._pieces_ints(pieces, shift)
        return IntervalSet._canonical([(Fraction(a, Q), Fraction(b, Q)) for a, b in merged])

    def pieces_overlap(self, pieces, shift: int, B: IntervalSet) -> Fraction:
        """``mu(pieces_set(pieces, shift) ∩ B)`` without building the image set."""
        dens = {q.denominator for iv in B.intervals for q in iv}
        merged, Q = self._pieces_ints(pieces, shift, dens)
        bints = [(a.numerator * (Q // a.denominator), b.numerator * (Q // b.denominator))
                 for a, b in B.intervals]
        total = i = j = 0
        while i < len(merged) and j < len(bints):
            lo = max(merged[i][0], bints[j][0])
            hi = min(merged[i][1], bints[j][1])
            if lo < hi:
                total += hi - lo
            if merged[i][1] < bints[j][1]:
                i += 1
            else:
                j += 1
        return Fraction(total, Q)

    def advance(self, A: IntervalSet, k: int, eps, stage_cap: int | None = None):
        """Core of :meth:`forward_image`.

        Returns ``(resolved, unresolved, capped)`` where ``resolved`` lists
        source pieces whose ``k``-step translate stays inside their stage and
        ``unresolved`` lists the remaining source pieces, of total mass <= eps
        unless ``capped``.
        """
        eps = to_scalar(eps)
        cap = self.stage_cap if stage_cap is None else stage_cap
        frontier = self.decompose(A)
        resolved = []
        while True:
            pending = []
            for p in frontier:
                n, i = p[0], p[1]
                if i != POOL and 0 <= i + k < self._data[n - 1].h:
                    resolved.append(p)
                else:
                    pending.append(p)
            if not pending or self.pieces_mass(pending) <= eps:
                return resolved, pending, False
            if all(p[0] >= cap for p in pending):
                return resolved, pending, True
            frontier = []
            for p in pending:
                if p[0] >= cap:
                    frontier.append(p)
                else:
                    frontier.extend(self.refine(p))

    def forward_image(self, A: IntervalSet, k: int, eps=DEFAULT_EPS,
                      stage_cap: int | None = None, strict: bool = True) -> PartialImage:
        """``T^k A`` (``k < 0`` gives a preimage) up to unresolved mass ``eps``.

        With ``strict=False`` a capped computation returns its partial image
        instead of raising :class:`ResourceError`.
        """
        if to_scalar(eps) <= 0:
            raise ValueError("eps must be positive")
        if k == 0 or not A or A == IntervalSet.full():
            # T is invertible and measure preserving, so the full space maps onto itself
            return PartialImage(A, Fraction(0), IntervalSet.empty())
        resolved, pending, capped = self.advance(A, k, eps, stage_cap)
        image = PartialImage(
            self.pieces_set(resolved, k),
            self.pieces_mass(pending),
            self.pieces_set(pending),
        )
        if capped and strict:
            raise ResourceError(
                f"unresolved mass {image.unresolved_mass} above eps at the stage cap",
                achieved=image.unresolved_mass, partial=image)
        return image

    def correlation(self, A: IntervalSet, B: IntervalSet, k: int, eps=DEFAULT_EPS,
                    stage_cap: int | None = None, strict: bool = True) -> CertifiedValue:
        """Certified enclosure of ``mu(T^k A ∩ B)``."""
        return self.correlations(A, [B], k, eps, stage_cap, strict)[0]

    def correlations(self, A: IntervalSet, Bs, k: int, eps=DEFAULT_EPS,
                     stage_cap: int | None = None, strict: bool = True) -> list:
        """:meth:`correlation` against several targets, sharing one image of ``A``."""
        if to_scalar(eps) <= 0:
            raise ValueError("eps must be positive")
        if k == 0 or not A or A == IntervalSet.full():
            return [CertifiedValue(*(2 * (A.intersect(B).measure(),))) for B in Bs]
        resolved, pending, capped = self.advance(A, k, eps, stage_cap)
        unresolved = self.pieces_mass(pending)
        if capped and strict:
            raise ResourceError(
                f"unresolved mass {unresolved} above eps at the stage cap", achieved=unresolved,
                partial=PartialImage(self.pieces_set(resolved, k), unresolved,
                                     self.pieces_set(pending)))
        out = []
        for B in Bs:
            lo = self.pieces_overlap(resolved, k, B)
            out.append(CertifiedValue(lo, lo + unresolved))
        return out

    # -- towers --------------------------------------------------------------

    def rohlin_tower(self, h: int, delta) -> tuple:
        """Base ``B`` of a height-``h`` tower with error set ``E``, ``mu(E) < delta``.

        Uses the least stage ``N`` with ``(h_N mod h) w_N + pool_N < delta``
        and takes ``B`` = levels ``0, h, 2h, ...`` that start a full block.
        """
        delta = to_scalar(delta)
        if h < 1 or delta <= 0:
            raise ValueError("need h >= 1 and delta > 0")
        for N in range(1, self.stage_cap + 1):
            hN = self.height(N)
            if (hN % h) * self.width(N) + self.pool_mass(N) < delta:
                blocks = hN // h
                B = self.levels_set(N, range(0, blocks * h, h))
                covered = self.levels_set(N, range(blocks * h))
                return B, covered.complement(), N
        raise ResourceError(f"no stage up to {self.stage_cap} gives a tower with mu(E) < {delta}")

    def grid_oracle(self, n: int) -> dict:
        """Cell permutation at stage ``n`` built from pointwise orbits of midpoints.

        Cells are the stage-``n`` levels (indices ``0..h-1``) plus the pool
        (index ``h``).  The table maps a cell to the cell containing ``T`` of
        its midpoint, for cells where that orbit resolves by stage ``n``.
        """
        stage = self.build_stage(n)
        lefts = [a for a, _ in stage.levels]
        order = sorted(range(stage.height), key=lambda i: lefts[i])
        sorted_lefts = [lefts[i] for i in order]
        table = {}
        for i, (a, b) in enumerate(stage.levels):
            y = self.orbit_point((a + b) / 2, 1, stage_cap=n)
            if y is None:
                continue
            pos = bisect_right(sorted_lefts, y) - 1
            cell = order[pos]
            lo, hi = stage.levels[cell]
            if not lo <= y < hi:
                raise AssertionError("orbit left the tower")
            table[i] = cell
        return table


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


class GridOracle:
    """Cell counting on top of :meth:`Engine.grid_oracle`, for tests and spot checks.

    Sets must be unions of stage-``n`` cells (levels or the pool).  ``lo``
    counts cells of ``A`` whose ``k``-fold table image is defined and lies in
    ``B``; every other part of ``A`` is unknown mass added to ``hi``.
    """

    def __init__(self, engine: Engine, n: int):
        self.engine = engine
        self.n = n
        self.stage = engine.build_stage(n)
        self.table = engine.grid_oracle(n)
        h = self.stage.height
        fwd = np.full(h + 1, -1, dtype=np.int64)
        for u, v in self.table.items():
            fwd[u] = v
        bwd = np.full(h + 1, -1, dtype=np.int64)
        for u, v in self.table.items():
            bwd[v] = u
        self._step = {1: fwd, -1: bwd}
        self._powers: dict = {}

    def power(self, k: int) -> np.ndarray:
        if k not in self._powers:
            h = self.stage.height
            cur = np.arange(h + 1, dtype=np.int64)
            cur[h] = -1
            step = self._step[1 if k > 0 else -1]
            for _ in range(abs(k)):
                cur = np.where(cur >= 0, step[np.maximum(cur, 0)], -1)
            self._powers[k] = cur
        return self._powers[k]

    def cells(self, S: IntervalSet) -> np.ndarray:
        mask = np.zeros(self.stage.height, dtype=bool)
        for i, lv in enumerate(self.stage.levels):
            mask[i] = IntervalSet._canonical((lv,)).issubset(S)
        return mask

    def correlation(self, A: IntervalSet, B: IntervalSet, k: int) -> CertifiedValue:
        w = self.stage.width
        in_A = self.cells(A)
        in_B = np.append(self.cells(B), False)
        img = self.power(k)[:-1]
        defined = in_A & (img >= 0)
        count = int(np.count_nonzero(defined & in_B[np.maximum(img, 0)]))
        unknown = int(np.count_nonzero(in_A & (img < 0)))
        lo = count * w
        hi = lo + unknown * w + self.stage.pool.intersect(A).measure()
        return CertifiedValue(lo, hi)
