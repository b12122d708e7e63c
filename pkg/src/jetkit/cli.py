"""Command-line driver: jetkit verify|riccati|gauge|soliton|search|render."""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .expr import render
from .forms import FormError, gauge_transform, riccati_covering
from .jet import render_rule
from .parser import ParseError, Scope, load_problem, parse_expr, parse_matrix, render_any, render_problem

SCHEMA = 1
EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_UNDECIDABLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def corpus_dir() -> Path:
    return Path(str(resources.files("jetkit") / "corpus"))


def resolve(path: str) -> Path:
    """Existing paths win; 'corpus/NAME' otherwise means the packaged corpus."""
    p = Path(path)
    if p.exists():
        return p
    parts = p.parts
    if parts and parts[0] == "corpus":
        q = corpus_dir().joinpath(*parts[1:])
        if q.exists():
            return q
        if q.with_suffix(".prob").exists():
            return q.with_suffix(".prob")
    raise UsageError(f"no such file: {path}")


def _load(path: str, seed: int = 0):
    return load_problem(resolve(path), seed=seed)


def _dump(obj, out: str | None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ---------------------------------------------------------------------------
# verify

def exit_code(verdicts, strict: bool) -> int:
    vs = set(verdicts)
    if strict and "undecidable" in vs:
        return EXIT_UNDECIDABLE
    if "fail" in vs or "undecidable" in vs:
        return EXIT_FAIL
    if strict and "probabilistic-pass" in vs:
        return EXIT_FAIL
    return EXIT_PASS


def cmd_verify(args) -> int:
    from .runner import run_problem

    if args.list:
        root = resolve(args.files[0]) if args.files else corpus_dir()
        files = sorted(root.glob("*.prob")) if root.is_dir() else [root]
        for f in files:
            print(f.name)
        return EXIT_PASS
    if not args.files:
        raise UsageError("verify needs at least one problem file")
    records, codes = [], []
    for path in args.files:
        p = _load(path, args.seed)
        outs = run_problem(p, jobs=args.jobs)
        code = exit_code([o.verdict for o in outs], args.strict_symbolic)
        codes.append(code)
        if not args.quiet and args.json != "-":
            print(f"== {p.name}  ({path})")
            for o in outs:
                print(f"  {o.verdict:<18} {o.assertion.text}   [{o.seconds:.2f}s]")
                if o.verdict == "probabilistic-pass" and not args.strict_symbolic:
                    print("      warning: numeric zero test only")
                if not o.report.ok or args.verbose:
                    for c in o.report.checks:
                        if args.verbose or not c.ok:
                            print(f"      [{c.verdict}] {c.name}" + (f": {c.detail}" if c.detail else ""))
            n_ok = sum(o.report.ok and not (args.strict_symbolic and o.verdict == "probabilistic-pass")
                       for o in outs)
            print(f"  {n_ok}/{len(outs)} assertions pass")
        rec = {"file": str(path), "problem": p.name, "exit": code,
               "assertions": [o.to_dict() for o in outs]}
        if not args.timings:
            for a in rec["assertions"]:
                a.pop("wall_time")
        records.append(rec)
    if args.json:
        _dump({"schema": SCHEMA, "seed": args.seed, "strict_symbolic": args.strict_symbolic,
               "problems": records}, args.json)
    worst = max(codes) if codes else EXIT_PASS
    return EXIT_UNDECIDABLE if EXIT_UNDECIDABLE in codes else worst


# ---------------------------------------------------------------------------
# riccati / gauge

def _matrix_form(p, name: str | None):
    forms = [f for f in p.forms.values() if f.is_matrix]
    if name:
        if name not in p.forms:
            raise UsageError(f"no form named {name}")
        return p.forms[name]
    if not forms:
        raise UsageError("the problem declares no matrix form")
    return forms[0]


def cmd_riccati(args) -> int:
    p = _load(args.file, args.seed)
    alpha = _matrix_form(p, args.form)
    if not 1 <= args.pivot <= alpha.size:
        raise UsageError(f"pivot {args.pivot} out of range 1..{alpha.size}")
    names = args.names.split(",") if args.names else None
    if names is None and len(p.nonlocal_) == alpha.size - 1:
        names = list(p.nonlocal_)
    cov, mu = riccati_covering(alpha, args.pivot, p.base, names)
    S = cov.merge()
    lines = [f"# Riccati covering of {alpha.name}, pivot {args.pivot}", "[vars]",
             f"nonlocal = {' '.join(cov.nonlocal_)}", "", "[covering]"]
    lines += [render_rule(S, r) for r in cov.rules]
    lines += ["", "[forms]", f"form {args.mu_name}"]
    lines += [f"  d{l}: {render(c)}" for l, c in zip(S.letters, mu.components)]
    print("\n".join(lines))
    return EXIT_PASS


def cmd_gauge(args) -> int:
    p = _load(args.file, args.seed)
    alpha = _matrix_form(p, args.form)
    M = parse_matrix(args.matrix, alpha.size, Scope(p.system))
    beta = gauge_transform(alpha, M, p.system)
    print(f"form {args.out_name} matrix {alpha.size}x{alpha.size}")
    for l, comp in zip(p.system.letters, beta.components):
        rows = "; ".join(", ".join(render(comp[i, j]) for j in range(alpha.size))
                         for i in range(alpha.size))
        print(f"  d{l}: [{rows}]")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# soliton

def _pair(text: str) -> tuple[float, float]:
    a, _, b = text.partition(",")
    try:
        return float(a), float(b)
    except ValueError as exc:
        raise UsageError(f"expected 'a,b', got {text!r}") from exc


def cmd_soliton(args) -> int:
    from dataclasses import replace

    from .numeric import Grid, NumericError, grid_of, soliton_report

    p = _load(args.file, args.seed)
    if p.numeric is None:
        raise UsageError(f"{p.name} has no [numeric] section")
    spec = replace(p.numeric, params=dict(p.numeric.params))
    p.numeric = spec
    for kv in args.param or ():
        k, _, v = kv.partition("=")
        if k not in p.params:
            raise UsageError(f"unknown parameter {k}")
        spec.params[k] = float(v)
    g = grid_of(spec)
    if args.x:
        g = replace(g, x=_pair(args.x))
    if args.t:
        g = replace(g, t=_pair(args.t))
    if args.h:
        g = replace(g, hx=args.h, ht=args.h)
    if args.steps is not None:
        if args.steps < 0:
            raise UsageError("--steps must be non-negative")
        if args.steps == 0:
            g = Grid((g.origin[0],) * 2, (g.origin[1],) * 2, g.hx, g.ht, g.origin)
        else:
            g = replace(g, hx=(g.x[1] - g.x[0]) / args.steps, ht=(g.t[1] - g.t[0]) / args.steps)
    try:
        rep, src, img = soliton_report(p, g, args.residual_bound)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(rep)
    field = img if img is not None else src
    if args.out:
        field.to_csv(args.out)
        print(f"wrote {field.shape[0] * field.shape[1]} rows to {args.out}")
    if args.json:
        _dump({"schema": SCHEMA, "problem": p.name, "verdict": rep.verdict,
               "grid": {"x": list(g.x), "t": list(g.t), "hx": g.hx, "ht": g.ht},
               "checks": [c.to_dict() for c in rep.checks]}, args.json)
    return EXIT_PASS if rep.ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# search / render

def cmd_search(args) -> int:
    import sympy as sp

    from .search import Ansatz, hunt_relations, search_pseudosymmetry

    p = _load(args.file, args.seed)
    names = [args.name] if args.name else list(p.searches) + list(p.hunts)
    if not names:
        raise UsageError("the problem declares no [search] entries")
    for n in names:
        if n in p.searches:
            s = p.searches[n]
            form = p.forms[s.form] if s.form else None
            cs = tuple(sp.Rational(c) for c in args.c.split(",")) if args.c else (
                tuple(s.c_values) or (s.c,))
            res = search_pseudosymmetry(Ansatz(p.system, form, tuple(s.monomials),
                                               tuple(s.components), cs, s.name))
            print(f"search {n}: dimension {res.dim}")
            for c, fields in res.by_c.items():
                print(f"  c = {c}: {len(fields)}")
                for Y in fields:
                    print(f"    {Y!r}")
        elif n in p.hunts:
            h = p.hunts[n]
            Y = p.fields[h.field_name] if h.field_name else None
            res = hunt_relations(p.morphisms[h.invariants], h.basis, Y)
            print(f"hunt {n}: {len(res.relations)} relation(s)")
            for r in res.relations:
                print(f"  {render(r)} = 0")
        else:
            raise UsageError(f"no search or hunt named {n}")
    return EXIT_PASS


def cmd_render(args) -> int:
    p = _load(args.file, args.seed)
    if args.expr:
        S = p.system
        e = parse_expr(args.expr, Scope(S))
        print(render(S.reduce(e)))
    elif args.object:
        for table in (p.forms, p.fields, p.morphisms):
            if args.object in table:
                print(render_any(table[args.object]) if table is p.forms else repr(table[args.object]))
                return EXIT_PASS
        raise UsageError(f"nothing named {args.object}")
    else:
        print(render_problem(p))
    return EXIT_PASS


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for numeric zero tests (default 0)")
    ap = argparse.ArgumentParser(prog="jetkit", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    v = sub.add_parser("verify", parents=[common], help="run the [assert] lines of problem files")
    v.add_argument("files", nargs="*")
    v.add_argument("--json", metavar="OUT", help="write a machine report ('-' for stdout)")
    v.add_argument("--list", action="store_true", help="list problem files in a directory")
    v.add_argument("--strict-symbolic", action="store_true",
                   help="treat numeric-only zero tests as failures")
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--timings", action="store_true", help="include wall times in JSON")
    v.add_argument("-v", "--verbose", action="store_true")
    v.add_argument("-q", "--quiet", action="store_true")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("riccati", parents=[common], help="emit the Riccati covering of a matrix ZCR")
    r.add_argument("file")
    r.add_argument("--form")
    r.add_argument("--pivot", type=int, default=1)
    r.add_argument("--names", help="comma-separated nonlocal names")
    r.add_argument("--mu-name", default="mu")
    r.set_defaults(func=cmd_riccati)

    g = sub.add_parser("gauge", parents=[common], help="gauge-transform a matrix form")
    g.add_argument("file")
    g.add_argument("--form")
    g.add_argument("--matrix", required=True, help="e.g. '[1, 0; z, 1]'")
    g.add_argument("--out-name", default="beta")
    g.set_defaults(func=cmd_gauge)

    s = sub.add_parser("soliton", parents=[common], help="integrate the covering and apply the [numeric] morphism")
    s.add_argument("file")
    s.add_argument("--steps", type=int, help="steps per axis (0 gives the origin only)")
    s.add_argument("--h", type=float, help="grid step in both directions")
    s.add_argument("--x", help="x range as a,b")
    s.add_argument("--t", help="t range as a,b")
    s.add_argument("--param", action="append", metavar="NAME=VALUE")
    s.add_argument("--residual-bound", type=float)
    s.add_argument("--out", help="CSV output path")
    s.add_argument("--json", metavar="OUT")
    s.set_defaults(func=cmd_soliton)

    q = sub.add_parser("search", parents=[common], help="run [search] ansatzes and relation hunts")
    q.add_argument("file")
    q.add_argument("--name")
    q.add_argument("--c", help="comma-separated values of c")
    q.set_defaults(func=cmd_search)

    d = sub.add_parser("render", parents=[common], help="print a problem in canonical form")
    d.add_argument("file")
    d.add_argument("--expr", help="reduce an expression modulo the system")
    d.add_argument("--object", help="render one form, field or morphism")
    d.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except (UsageError, ParseError, FormError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
