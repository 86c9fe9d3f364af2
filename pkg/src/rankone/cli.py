"""``rankone`` command line.

Exit codes: 0 ok, 1 usage or parse error, 2 an exact invariant was
refuted, 3 a resource cap was hit.
"""

from __future__ import annotations

import argparse
import json
import sys

from .engine import DEFAULT_EPS, DEFAULT_STAGE_CAP, Engine
from .errors import ParseError, ResourceError, ValidationError
from .experiments import (
    SURROGATE,
    JoiningTarget,
    header,
    joining_to_csv,
    joining_to_json,
    liminf_horizon,
    resolve_set,
    run_demo,
    run_joining_check,
    run_scan,
    scheme_label,
)
from .measure import scalar_str, to_scalar
from .products import SequenceSpec, sweep_probe, uso_probe
from .scheme import load_scheme, normalize, serialize_scheme

EXIT_OK, EXIT_USAGE, EXIT_REFUTED, EXIT_RESOURCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rational(text):
    try:
        return to_scalar(text)
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common(p, sets=True):
    p.add_argument("--scheme", default="chacon3", help="preset name, block:<rule> or scheme file")
    p.add_argument("--eps", type=_rational, default=DEFAULT_EPS, help="unresolved-mass budget p/q")
    p.add_argument("--stage-cap", type=int, default=DEFAULT_STAGE_CAP)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="write the report here instead of stdout")
    if sets:
        p.add_argument("--A", dest="A", default="base(2)", help="set expression")
        p.add_argument("--B", dest="B", default="base(2)", help="set expression")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rankone", description="Exact experiments on rank-one transformations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    scheme = sub.add_parser("scheme", help="scheme utilities")
    scheme_sub = scheme.add_subparsers(dest="action", required=True, parser_class=_Parser)
    sp = scheme_sub.add_parser("parse", help="parse and normalize a scheme")
    sp.add_argument("--scheme", required=True)
    sp.add_argument("--out")

    tower = sub.add_parser("tower", help="tower utilities")
    tower_sub = tower.add_subparsers(dest="action", required=True, parser_class=_Parser)
    ts = tower_sub.add_parser("show", help="print one stage of the tower")
    _common(ts, sets=False)
    ts.add_argument("--stage", type=int, required=True)

    for name in ("scan", "liminf"):
        p = sub.add_parser(name, help=f"{name} over a range of powers")
        _common(p)
        p.add_argument("--from", dest="n_from", type=int, default=0)
        p.add_argument("--to", dest="n_to", type=int, default=20)

    j = sub.add_parser("joining", help="compare correlations along heights with a joining target")
    _common(j)
    j.add_argument("--target", default="1/2,1/2", help="coefficients a_0,...,a_N")
    j.add_argument("--from", dest="n_from", type=int, default=4)
    j.add_argument("--to", dest="n_to", type=int, default=12)

    d = sub.add_parser("demo", help="run a construction and its checks")
    d.add_argument("name")
    _common(d, sets=False)
    d.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    d.add_argument("--A", dest="A")
    d.add_argument("--from", dest="n_from", type=int)
    d.add_argument("--to", dest="n_to", type=int)
    for opt in ("h", "k", "M", "N", "n"):
        d.add_argument(f"--{opt}", dest=opt, type=int)

    s = sub.add_parser("sweep", help="coverage of unions of translates")
    _common(s, sets=False)
    s.add_argument("--A", dest="A", default="base(2)")
    s.add_argument("--seq", default="heights:8",
                   help="heights:L | arith:start,step,count | explicit:k1,k2,... | random:count,low,high")
    s.add_argument("--seed", type=int, default=0)

    u = sub.add_parser("uso", help="worst sampled coverage by N translates (non-exhaustive)")
    _common(u, sets=False)
    u.add_argument("--A", dest="A", default="base(2)")
    u.add_argument("--N", dest="N", type=int, default=4)
    u.add_argument("--trials", type=int, default=16)
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--low", type=int, default=0)
    u.add_argument("--high", type=int, default=999)
    return parser


def _parse_seq(text: str, seed: int) -> SequenceSpec:
    kind, _, body = text.partition(":")
    nums = [int(x) for x in body.split(",") if x.strip()]
    if kind == "heights" and len(nums) == 1:
        return SequenceSpec("heights", count=nums[0])
    if kind == "arith" and len(nums) == 3:
        return SequenceSpec("arithmetic", start=nums[0], step=nums[1], count=nums[2])
    if kind == "explicit" and nums:
        return SequenceSpec("explicit", values=tuple(nums))
    if kind == "random" and len(nums) == 3:
        return SequenceSpec("random", count=nums[0], low=nums[1], high=nums[2], seed=seed)
    raise ValidationError(f"bad sequence {text!r}")


def _coverage_report(kind, meta, rows, fmt, label_col="L") -> str:
    if fmt == "json":
        return json.dumps({"format": "rankone-report", "version": 1, "kind": kind, "metadata": meta,
                           "rows": [{label_col: L, **c.to_dict()} for L, c in rows]},
                          indent=2) + "\n"
    lines = [header(kind), "# " + " ".join(f"{k}={v}" for k, v in meta.items()), f"{label_col},lo,hi"]
    lines += [f"{L},{scalar_str(c.lo)},{scalar_str(c.hi)}" for L, c in rows]
    return "\n".join(lines) + "\n"


def _engine(args) -> Engine:
    return Engine(load_scheme(args.scheme), stage_cap=args.stage_cap)


def _run(args) -> tuple:
    """Return ``(text, exit_code)``."""
    if args.command == "scheme":
        spec = load_scheme(args.scheme)
        w1, spacer = normalize(spec)
        text = (header("scheme") + "\n" + serialize_scheme(spec)
                + f"# w1={scalar_str(w1)} spacer_mass={scalar_str(spacer)}\n")
        return text, EXIT_OK

    if args.command == "tower":
        engine = _engine(args)
        stage = engine.build_stage(args.stage)
        if args.format == "json":
            return json.dumps({"format": "rankone-report", "version": 1, "kind": "tower",
                               "scheme": scheme_label(engine), "stage": stage.to_dict()},
                              indent=2) + "\n", EXIT_OK
        lines = [header("tower"), f"# scheme={scheme_label(engine)} n={stage.n} "
                 f"h={stage.height} w={scalar_str(stage.width)}", "level,a,b"]
        lines += [f"{i},{scalar_str(a)},{scalar_str(b)}" for i, (a, b) in enumerate(stage.levels)]
        lines += [f"pool,{scalar_str(a)},{scalar_str(b)}" for a, b in stage.pool]
        return "\n".join(lines) + "\n", EXIT_OK

    if args.command == "scan":
        rep = run_scan(_engine(args), args.A, args.B, args.n_from, args.n_to, args.eps)
        return (rep.to_json() if args.format == "json" else rep.to_csv()), EXIT_OK

    if args.command == "liminf":
        res = liminf_horizon(_engine(args), args.A, args.B, args.n_from, args.n_to, args.eps)
        value = None if res["value"] is None else scalar_str(res["value"])
        if args.format == "json":
            return json.dumps({"format": "rankone-report", "version": 1, "kind": "liminf",
                               "metadata": res["metadata"], "value": value,
                               "label": SURROGATE}, indent=2) + "\n", EXIT_OK
        return f"{header('liminf')}\nvalue,label\n{value},\"{SURROGATE}\"\n", EXIT_OK

    if args.command == "joining":
        meta, rows = run_joining_check(_engine(args), args.A, args.B,
                                       JoiningTarget.parse(args.target), args.n_from, args.n_to,
                                       args.eps)
        return (joining_to_json(meta, rows) if args.format == "json"
                else joining_to_csv(meta, rows)), EXIT_OK

    if args.command == "demo":
        params = {}
        for item in args.param:
            key, sep, value = item.partition("=")
            if not sep:
                raise ValidationError(f"--param expects KEY=VALUE, got {item!r}")
            params[key] = value
        for key in ("A", "n_from", "n_to", "h", "k", "M", "N", "n"):
            if getattr(args, key) is not None:
                params[key] = getattr(args, key)
        params.setdefault("eps", args.eps)
        res = run_demo(args.name, _engine(args), params)
        code = EXIT_REFUTED if res.refuted else EXIT_OK
        if args.out:
            # the artifact goes to the file, the summary to the terminal
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(res.to_json())
            args.out = None
            return res.text(), code
        return (res.to_json() if args.format == "json" else res.text()), code

    if args.command == "sweep":
        engine = _engine(args)
        a_text, A = resolve_set(engine, args.A)
        seq = _parse_seq(args.seq, args.seed)
        rows = sweep_probe(engine, A, seq, args.eps)
        meta = {"scheme": scheme_label(engine), "A": a_text, "seq": args.seq, "seed": args.seed,
                "eps": scalar_str(args.eps)}
        los = [c.lo for _, c in rows]
        code = EXIT_OK if los == sorted(los) else EXIT_REFUTED
        return _coverage_report("sweep", meta, rows, args.format), code

    if args.command == "uso":
        engine = _engine(args)
        a_text, A = resolve_set(engine, args.A)
        rep = uso_probe(engine, A, args.N, args.trials, args.seed, args.eps, args.low, args.high)
        meta = {"scheme": scheme_label(engine), "A": a_text, "N": args.N, "trials": args.trials,
                "seed": args.seed, "worst": scalar_str(rep.worst.lo),
                "worst_tuple": " ".join(map(str, rep.worst_tuple)), "label": rep.label}
        rows = [(t, c) for t, _, c in rep.rows]
        return _coverage_report("uso", meta, rows, args.format, label_col="trial"), EXIT_OK

    raise ValidationError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text, code = _run(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceError as exc:
        achieved = "" if exc.achieved is None else f" (achieved {scalar_str(exc.achieved)})"
        print(f"resource cap: {exc}{achieved}", file=sys.stderr)
        return EXIT_RESOURCE
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
