"""Scans, joining checks and construction demos behind the command line.

Every report separates exact facts from finite-horizon surrogates: a
minimum over ``n <= n_max`` says nothing certified about a liminf, and rows
carry a ``status`` column saying which kind of statement they are.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction

from . import __version__
from .constructions import (
    lemma1_check,
    obstruction_scan,
    pattern_occurrences,
    thm1_dense_family,
    thm3_refine_pairs,
    thm4_mm_pair,
    thm5_generators,
    thm6_obstruction,
)
from .engine import DEFAULT_EPS, Engine
from .errors import ValidationError
from .measure import CertifiedValue, IntervalSet, scalar_str, to_scalar
from .products import ProductSystem, RectSet, SequenceSpec, interleaved_pair, residual_witness, sweep_probe
from .scheme import serialize_scheme
from .setexpr import evaluate, parse_set_expr, to_text

FORMAT = "rankone-report"
FORMAT_VERSION = 1
SURROGATE = "finite-horizon minimum, not a liminf certificate"


def header(kind: str) -> str:
    return f"# {FORMAT} v{FORMAT_VERSION} {kind}"


def _status(c: CertifiedValue) -> str:
    return "exact" if c.exact else "enclosure"


def scheme_label(engine: Engine) -> str:
    return serialize_scheme(engine.spec).strip().replace("\n", "; ")


def resolve_set(engine: Engine, expr) -> tuple:
    """``(text, IntervalSet)`` from a set expression or an IntervalSet."""
    if isinstance(expr, IntervalSet):
        return expr.to_json(), expr
    node = parse_set_expr(expr)
    return to_text(node), evaluate(node, engine)


# -- correlation scans ---------------------------------------------------------

@dataclass
class ScanReport:
    metadata: dict
    rows: list  # (n, CertifiedValue)
    achieved_eps: Fraction = Fraction(0)

    @property
    def min_lo(self):
        return min((c.lo for _, c in self.rows), default=None)

    @property
    def max_hi(self):
        return max((c.hi for _, c in self.rows), default=None)

    def summary(self) -> dict:
        out = {"min_lo": _opt(self.min_lo), "max_hi": _opt(self.max_hi),
               "achieved_eps": scalar_str(self.achieved_eps), "horizon": SURROGATE}
        return out

    def to_json(self) -> str:
        return _dump({"format": FORMAT, "version": FORMAT_VERSION, "kind": "scan",
                      "metadata": self.metadata,
                      "rows": [{"n": n, **c.to_dict(), "status": _status(c)} for n, c in self.rows],
                      "summary": self.summary()})

    def to_csv(self) -> str:
        lines = [header("scan"), _meta_line(self.metadata)]
        body = _csv(["n", "lo", "hi", "status"],
                    [[n, scalar_str(c.lo), scalar_str(c.hi), _status(c)] for n, c in self.rows])
        tail = "# " + " ".join(f"{k}={v}" for k, v in self.summary().items() if k != "horizon")
        return "\n".join(lines) + "\n" + body + tail + f"  ({SURROGATE})\n"


def _opt(q):
    return None if q is None else scalar_str(q)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _meta_line(meta: dict) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in meta.items())


def run_scan(engine: Engine, A, B, n_from: int, n_to: int, eps=DEFAULT_EPS) -> ScanReport:
    """Certified ``mu(T^n A ∩ B)`` for ``n_from <= n <= n_to``."""
    if n_from > n_to:
        raise ValidationError("n-from must not exceed n-to")
    eps = to_scalar(eps)
    a_text, A = resolve_set(engine, A)
    b_text, B = resolve_set(engine, B)
    rows = [(n, engine.correlation(A, B, n, eps)) for n in range(n_from, n_to + 1)]
    meta = {"scheme": scheme_label(engine), "A": a_text, "B": b_text, "eps": scalar_str(eps),
            "n_from": n_from, "n_to": n_to, "version": __version__}
    achieved = max((c.width for _, c in rows), default=Fraction(0))
    return ScanReport(meta, rows, achieved)


def liminf_horizon(engine: Engine, A, B, n_from: int, n_to: int, eps=DEFAULT_EPS) -> dict:
    """Smallest certified lower bound over the range, labeled as a surrogate."""
    rep = run_scan(engine, A, B, n_from, n_to, eps)
    return {"value": rep.min_lo, "label": SURROGATE, "metadata": rep.metadata}


# -- limit joinings ------------------------------------------------------------------

@dataclass(frozen=True)
class JoiningTarget:
    """``nu(A x B) = sum_i a_i mu(T^{-i} A ∩ B)`` for ``i = 0..N``."""

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(to_scalar(a) for a in self.coefficients)
        if not coeffs:
            raise ValidationError("a joining target needs at least one coefficient")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def N(self) -> int:
        return len(self.coefficients) - 1

    @classmethod
    def parse(cls, text: str) -> "JoiningTarget":
        return cls(tuple(to_scalar(t) for t in text.split(",") if t.strip()))


@dataclass
class JoiningRow:
    n: int
    k: int
    lhs: CertifiedValue
    rhs_lo: Fraction
    rhs_hi: Fraction

    @property
    def gap_lo(self) -> Fraction:
        """Distance between the two enclosures (0 when they overlap)."""
        return max(Fraction(0), self.lhs.lo - self.rhs_hi, self.rhs_lo - self.lhs.hi)

    @property
    def gap_hi(self) -> Fraction:
        """Largest possible distance between the true values."""
        return max(self.lhs.hi - self.rhs_lo, self.rhs_hi - self.lhs.lo)


def run_joining_check(engine: Engine, A, B, target: JoiningTarget, n_from: int, n_to: int,
                      eps=DEFAULT_EPS) -> tuple:
    """Compare ``mu(T^{h_n} A ∩ B)`` with the target combination, along the heights."""
    if n_from > n_to or n_from < 1:
        raise ValidationError("need 1 <= n-from <= n-to")
    eps = to_scalar(eps)
    a_text, A = resolve_set(engine, A)
    b_text, B = resolve_set(engine, B)
    rlo = rhi = Fraction(0)
    for i, a in enumerate(target.coefficients):
        c = engine.correlation(A, B, -i, eps)
        rlo += a * c.lo
        rhi += a * c.hi
    rows = []
    for n in range(n_from, n_to + 1):
        k = engine.height(n)
        rows.append(JoiningRow(n, k, engine.correlation(A, B, k, eps), rlo, rhi))
    meta = {"scheme": scheme_label(engine), "A": a_text, "B": b_text, "eps": scalar_str(eps),
            "target": ",".join(scalar_str(a) for a in target.coefficients),
            "n_from": n_from, "n_to": n_to, "version": __version__}
    return meta, rows


def joining_to_csv(meta, rows) -> str:
    body = _csv(["n", "k", "lo", "hi", "rhs_lo", "rhs_hi", "gap_lo", "gap_hi", "status"],
                [[r.n, r.k, scalar_str(r.lhs.lo), scalar_str(r.lhs.hi), scalar_str(r.rhs_lo),
                  scalar_str(r.rhs_hi), scalar_str(r.gap_lo), scalar_str(r.gap_hi),
                  "finite-horizon surrogate"] for r in rows])
    return header("joining") + "\n" + _meta_line(meta) + "\n" + body


def joining_to_json(meta, rows) -> str:
    return _dump({"format": FORMAT, "version": FORMAT_VERSION, "kind": "joining", "metadata": meta,
                  "rows": [{"n": r.n, "k": r.k, "lhs": r.lhs.to_dict(),
                            "rhs": {"lo": scalar_str(r.rhs_lo), "hi": scalar_str(r.rhs_hi)},
                            "gap_lo": scalar_str(r.gap_lo), "gap_hi": scalar_str(r.gap_hi),
                            "status": "finite-horizon surrogate"} for r in rows]})


# -- demos ---------------------------------------------------------------------------

@dataclass
class DemoResult:
    name: str
    artifact: dict
    summary: list = field(default_factory=list)
    refuted: list = field(default_factory=list)

    def to_json(self) -> str:
        return _dump({"format": FORMAT, "version": FORMAT_VERSION, "kind": f"demo:{self.name}",
                      "refuted": self.refuted, **self.artifact})

    def text(self) -> str:
        lines = [header(f"demo:{self.name}")] + self.summary
        lines += [f"REFUTED: {r}" for r in self.refuted] or ["exact checks: all passed"]
        return "\n".join(lines) + "\n"


def _cv_rows(rows):
    return [{"n": n, **c.to_dict(), "status": _status(c)} for n, c in rows]


def _demo_thm1(engine, p):
    h = int(p.get("h", 4))
    n_from, n_to = int(p.get("n_from", 1)), int(p.get("n_to", 100))
    eps = to_scalar(p.get("eps", DEFAULT_EPS))
    fam = thm1_dense_family(engine, h)
    rep = lemma1_check(engine, fam.Abar, h, fam.B | fam.E, range(n_from, n_to + 1), eps)
    refuted = [f"lemma hypothesis: {f}" for f in rep.failures]
    refuted += [f"margin upper bound negative at n={n}" for n in rep.refutations]
    rows = [{"n": n, "margin_lo": scalar_str(lo), "margin_hi": scalar_str(hi),
             "status": "certified" if lo >= 0 else ("refuted" if hi < 0 else "undecided")}
            for n, lo, hi in rep.rows]
    art = {"params": {"h": h, "n_from": n_from, "n_to": n_to, "eps": scalar_str(eps)},
           "family": fam.to_dict(),
           "hypotheses": {"ok": rep.hypotheses_ok, "coverage": scalar_str(rep.coverage),
                          "coverage_exact": rep.coverage_exact},
           "margins": rows}
    summary = [f"h={h} stage={fam.stage} mu(Abar)={fam.Abar.measure()} mu(D)={fam.D.measure()}",
               f"hypotheses ok={rep.hypotheses_ok} coverage={rep.coverage}",
               f"margins: {len(rep.rows)} rows, min lo={_opt(rep.min_margin_lo)}, "
               f"undecided={len(rep.undecided)}, refuted={len(rep.refutations)}"]
    return art, summary, refuted


def _demo_thm3(engine, p):
    k, M = int(p.get("k", 2)), int(p.get("M", 1024))
    hs = [int(x) for x in str(p.get("hs", "4,8,16")).split(",")]
    horizon = int(p.get("n_to", 40))
    counts = pattern_occurrences(k, M)
    raw, pairs = [], []
    for h in hs:
        pair = thm4_mm_pair(engine, h)
        e = min(engine.correlation(pair.C, pair.D, n).lo for n in range(1, horizon + 1))
        raw.append((pair.C, pair.D, e))
        pairs.append({"h": h, "mass": scalar_str((pair.C | pair.D).measure()), "eps": scalar_str(e)})
    try:
        fam = thm3_refine_pairs(raw)
        refinement = {"feasible": True, **fam.to_dict()}
    except ValidationError as exc:
        refinement = {"feasible": False, "reason": str(exc)}
    missing = 4 ** k - len(counts)
    rare = sum(1 for c in counts.values() if c < 2)
    art = {"params": {"k": k, "M": M, "hs": hs, "horizon": horizon},
           "patterns": {"distinct": len(counts), "min_count": min(counts.values()), "missing": missing},
           "pairs": pairs, "refinement": refinement}
    summary = [f"depth {k} patterns over m<={M}: {len(counts)} of {4 ** k}, min count {min(counts.values())}",
               f"tower pairs h={hs}: refinement feasible={refinement['feasible']}"]
    refuted = [f"{missing} patterns never occur"] if missing else []
    refuted += [f"{rare} patterns occur fewer than twice"] if rare else []
    return art, summary, refuted


def _demo_thm4(engine, p):
    h = int(p.get("h", 4))
    n_from, n_to = int(p.get("n_from", 1)), int(p.get("n_to", 100))
    pair = thm4_mm_pair(engine, h)
    rows = [(n, engine.correlation(pair.C, pair.D, n)) for n in range(n_from, n_to + 1)]
    bound = Fraction(2, h + 1)
    refuted = []
    if not pair.C.isdisjoint(pair.D):
        refuted.append("C and D intersect")
    if not pair.C.measure() < bound:
        refuted.append("mu(C) >= 2/(h+1)")
    if not pair.D.measure() < bound:
        refuted.append("mu(D) >= 2/(h+1)")
    min_lo = min(c.lo for _, c in rows)
    art = {"params": {"h": h, "n_from": n_from, "n_to": n_to}, "pair": pair.to_dict(),
           "rows": _cv_rows(rows), "min_lo": scalar_str(min_lo), "horizon": SURROGATE}
    summary = [f"h={h} stage={pair.stage} branch={pair.branch}",
               f"mu(C)={pair.C.measure()} mu(D)={pair.D.measure()} bound={bound}",
               f"min lo over n in [{n_from},{n_to}] = {min_lo} ({SURROGATE})"]
    return art, summary, refuted


def _demo_thm5(engine, p):
    k, M = int(p.get("k", 2)), int(p.get("M", 8))
    C = [IntervalSet._canonical(((Fraction(m - 1, M), Fraction(m, M)),)) for m in range(1, M + 1)]
    gens = thm5_generators(C, k)
    art = {"params": {"k": k, "M": M},
           "generators": [{"i": i, "indices": idx, "set": gen.to_list()}
                          for i, (gen, idx) in enumerate(gens, start=1)]}
    summary = [f"F_{i}: indices {idx}" for i, (_, idx) in enumerate(gens, start=1)]
    return art, summary, []


def _demo_thm6(engine, p):
    N = int(p.get("N", 1))
    a_text, A = resolve_set(engine, p.get("A", "interval(0,1/5)"))
    n_from, n_to = int(p.get("n_from", 4)), int(p.get("n_to", 12))
    eps = to_scalar(p.get("eps", DEFAULT_EPS))
    ob = thm6_obstruction(engine, N, A, eps)
    if not ob.feasible:
        raise ValidationError(f"mu(A) = {A.measure()} is not below 1/(2(N+1)) = {Fraction(1, 2 * (N + 1))}")
    rows = obstruction_scan(engine, ob, range(n_from, n_to + 1), eps)
    art = {"params": {"N": N, "A": a_text, "n_from": n_from, "n_to": n_to, "eps": scalar_str(eps)},
           "obstruction": ob.to_dict(),
           "rows": [{"n": n, "k": k, **c.to_dict(), "status": _status(c)} for n, k, c in rows],
           "horizon": "finite-horizon surrogate for a vanishing limit"}
    summary = [f"N={N} A={a_text} feasible={ob.feasible}",
               f"mu(B) in [{ob.inner.measure()}, {ob.outer.measure()}]",
               f"max hi over n in [{n_from},{n_to}] = {max(c.hi for _, _, c in rows)}"]
    return art, summary, []


def _demo_ex3_sweep(engine, p):
    windows = [tuple(int(x) for x in w.split(":")) for w in str(p.get("windows", "2:2,2:2")).split(",")]
    count = int(p.get("count", 5))
    eps = to_scalar(p.get("eps", DEFAULT_EPS))
    s1, s2 = interleaved_pair(windows)
    X, Y = Engine(s1), Engine(s2)
    A = RectSet([(X.base(2), Y.base(2))])
    seq = SequenceSpec("heights", count=count)
    rows = sweep_probe(ProductSystem(X, Y), A, seq, eps)
    refuted = [] if all(a[1].lo <= b[1].lo for a, b in zip(rows, rows[1:])) else ["coverage lo decreased"]
    art = {"params": {"windows": [list(w) for w in windows], "count": count, "eps": scalar_str(eps)},
           "schemes": [serialize_scheme(s1).strip(), serialize_scheme(s2).strip()],
           "A": A.to_list(), "sequence": seq.generate(X),
           "rows": [{"L": L, **c.to_dict()} for L, c in rows],
           "status": "heuristic diagnostic; mixing of the factors is not certified"}
    summary = [f"windows={windows} final coverage in [{rows[-1][1].lo}, {rows[-1][1].hi}]"]
    return art, summary, refuted


def _demo_residual(engine, p):
    n = int(p.get("n", 4))
    E = IntervalSet.from_list([s.split(":") for s in str(p.get("E", "0:1/2")).split(",")])
    strip = Fraction(p.get("strip", "0"))
    A = RectSet([(E, IntervalSet([(strip, 1)]))]) if strip < 1 else RectSet()
    member, A2, deficit = residual_witness(A, E, n)
    art = {"params": {"n": n, "E": E.to_list(), "strip": scalar_str(strip)},
           "A": A.to_list(), "A_prime": A2.to_list(), "member": member, "deficit": scalar_str(deficit)}
    return art, [f"member={member} deficit={deficit}"], []


DEMOS = {
    "thm1": _demo_thm1,
    "thm3": _demo_thm3,
    "thm4": _demo_thm4,
    "thm5": _demo_thm5,
    "thm6": _demo_thm6,
    "ex3-sweep": _demo_ex3_sweep,
    "residual": _demo_residual,
}


def run_demo(name: str, engine: Engine, params: dict | None = None) -> DemoResult:
    if name not in DEMOS:
        raise ValidationError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}")
    art, summary, refuted = DEMOS[name](engine, dict(params or {}))
    art = {"scheme": scheme_label(engine), **art}
    return DemoResult(name, art, summary, refuted)
