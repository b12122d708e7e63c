"""Execution of [assert] lines against a parsed problem."""
from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import sympy as sp

from .expr import is_zero, normalize, render
from .forms import FormError, is_conservation_law, is_flat, is_zcr, is_zcr_wedge, riccati_covering
from .jet import JetError
from .morphism import MorphismError, check_regularity, factor_check, verify_morphism
from .parser import Assertion, ParseError, Problem, Scope, parse_expr
from .pseudosym import FieldError, check_pseudosymmetry, check_r_pseudosymmetry, is_invariant
from .report import Check, Report


class AssertionSyntaxError(ParseError):
    pass


@dataclass
class Outcome:
    assertion: Assertion
    report: Report
    seconds: float

    @property
    def verdict(self) -> str:
        return self.report.verdict

    def to_dict(self) -> dict:
        a = self.assertion
        return {
            "name": a.text,
            "kind": a.kind,
            "line": a.line,
            "verdict": self.verdict,
            "details": [c.to_dict() for c in self.report.checks],
            "wall_time": round(self.seconds, 3),
        }


def _match(pattern: str, a: Assertion):
    m = re.fullmatch(pattern, a.args.strip())
    if not m:
        raise AssertionSyntaxError(f"cannot read arguments of '{a.kind}': {a.args!r}", a.line, 1)
    return m


def _expr_after_colon(a: Assertion, scope) -> sp.Expr:
    head, colon, tail = a.args.partition(":")
    if not colon:
        raise AssertionSyntaxError(f"'{a.kind}' needs ': expression'", a.line, 1)
    return parse_expr(tail.strip(), scope, a.line, 1)


def _exact(rep: Report, name: str, e, S):
    """Term-by-term comparison: the difference must normalize to 0."""
    v = is_zero(S.reduce(e), S.domain)
    rep.add(Check(name, "pass" if v.method == "symbolic" else "fail",
                  "" if v.method == "symbolic" else f"difference: {render(v.residual)}"))


def _riccati(p: Problem, a: Assertion) -> Report:
    m = _match(r"(\w+)\s+pivot\s+(\d+)(?:\s+matches\s+covering(?:\s+(\w+))?)?", a)
    alpha = p.forms[m.group(1)]
    h = int(m.group(2))
    names = list(p.nonlocal_) if len(p.nonlocal_) == alpha.size - 1 else None
    cov, mu = riccati_covering(alpha, h, p.base, names)
    rep = Report(f"Riccati covering of {alpha.name}, pivot {h}")
    S = p.system
    if m.group(3) is None and "matches" not in a.args:
        from .covering import validate_covering
        rep.extend(validate_covering(cov))
        return rep
    given = {r.lead: r for r in p.covering}
    for r in cov.rules:
        name = S.name_of(r.lead)
        if r.lead not in given:
            rep.add(Check(f"rule {name}", "fail", "not present in [covering]"))
            continue
        _exact(rep, f"rule {name}", r.rhs - given[r.lead].rhs, S)
    if m.group(3):
        target = p.forms[m.group(3)]
        for i, (c1, c2) in enumerate(zip(mu.components, target.components)):
            _exact(rep, f"conservation law d{S.letters[i]}", c1 - c2, S)
    return rep


def _target(p: Problem, name: str | None, default):
    if name is None:
        return default
    return p.targets[name]


def _search(p: Problem, a: Assertion) -> Report:
    from .search import Ansatz, DEFAULT_C, proportional, search_pseudosymmetry

    m = _match(r"(\w+)\s+dim\s+(\d+)(?:\s+matches\s+(\w+))?", a)
    spec = p.searches[m.group(1)]
    form = p.forms[spec.form] if spec.form else None
    cs = tuple(spec.c_values) or ((spec.c,) if form is not None else (sp.Integer(0),))
    A = Ansatz(p.system, form, tuple(spec.monomials), tuple(spec.components), cs, spec.name)
    res = search_pseudosymmetry(A)
    rep = Report(f"search {spec.name}")
    want = int(m.group(2))
    dims = ", ".join(f"c={c}: {len(v)}" for c, v in res.by_c.items())
    rep.add(Check("dimension", "pass" if res.dim == want else "fail",
                  f"found {res.dim} ({dims}), expected {want}"))
    for c, reps in res.checks.items():
        for i, r in enumerate(reps):
            rep.extend(r, f"c={c} basis {i + 1}: ")
    if m.group(3):
        Y = p.fields[m.group(3)]
        hit = any(proportional(f, Y) for f in res.basis)
        rep.add(Check(f"spans {Y.name}", "pass" if hit else "fail",
                      "" if hit else "no basis element is a multiple of the field"))
    return rep


def _hunt(p: Problem, a: Assertion) -> Report:
    from .search import hunt_relations

    m = _match(r"(\w+)\s+(covers\s+target\.(\w+)|finds\s*:\s*(.+))", a)
    spec = p.hunts[m.group(1)]
    inv = p.morphisms[spec.invariants]
    Y = p.fields[spec.field_name] if spec.field_name else None
    res = hunt_relations(inv, spec.basis, Y)
    rep = Report(f"hunt {spec.name}")
    rel = "; ".join(render(r) for r in res.relations) or "none"
    rep.add(Check("relations", "pass", f"{len(res.relations)} found: {rel}"))
    T = inv.target
    if m.group(3):
        Q = p.targets[m.group(3)]
        for r in Q.rules:
            e = Q.symbol(r.lead.var, r.lead.sigma) - r.rhs
            ok = res.covers(e)
            rep.add(Check(f"recovers {Q.name_of(r.lead)} rule", "pass" if ok else "fail",
                          "" if ok else "not in the span of the relations found"))
    else:
        e = parse_expr(m.group(4), Scope(T), a.line, 1)
        ok = res.covers(e)
        rep.add(Check(f"recovers {render(e)}", "pass" if ok else "fail",
                      "" if ok else "not in the span of the relations found"))
    return rep


def _soliton(p: Problem, a: Assertion) -> Report:
    from .numeric import soliton_report

    m = _match(r"(?:residual\s*<\s*(\S+))?", a)
    bound = float(m.group(1)) if m.group(1) else None
    return soliton_report(p, residual_bound=bound)[0]


def _run(p: Problem, a: Assertion) -> Report:
    S = p.system
    k = a.kind
    if k == "solved_form":
        return p.validation
    if k == "conservation_law":
        return is_conservation_law(p.forms[_match(r"(\w+)", a).group(1)], S)
    if k == "zcr":
        return is_zcr(p.forms[_match(r"(\w+)", a).group(1)], p.base if not p.nonlocal_ else S)
    if k == "zcr_wedge":
        return is_zcr_wedge(p.forms[_match(r"(\w+)", a).group(1)], S)
    if k == "zero_curvature":
        return is_flat(p.forms[_match(r"(\w+)", a).group(1)], S)
    if k == "riccati":
        return _riccati(p, a)
    if k == "pseudosymmetry":
        return check_pseudosymmetry(p.fields[_match(r"(\w+)", a).group(1)])
    if k == "r_pseudosymmetry":
        return check_r_pseudosymmetry(p.fields[_match(r"(\w+)", a).group(1)])
    if k == "invariant":
        name = _match(r"(\w+)\s*:.*", a).group(1)
        return is_invariant(p.fields[name], _expr_after_colon(a, Scope(S)))
    if k == "invariants":
        m = _match(r"(\w+)\s+(\w+)", a)
        Y, B = p.fields[m.group(1)], p.morphisms[m.group(2)]
        rep = Report(f"invariants of {Y.name} in {B.name}")
        comps = [(f"x'{i + 1}", e) for i, e in enumerate(B.xi)] + list(B.nu.items())
        for label, e in comps:
            rep.extend(is_invariant(Y, e), f"{label}: ")
        return rep
    if k == "regular":
        B = p.morphisms[_match(r"(\w+)", a).group(1)]
        rep = Report(f"regularity of {B.name}")
        rep.add(check_regularity(B))
        return rep
    if k == "morphism":
        m = _match(r"(\w+)(?:\s*->\s*target\.(\w+))?", a)
        B = p.morphisms[m.group(1)]
        return verify_morphism(B, _target(p, m.group(2), B.target))
    if k == "factor":
        m = _match(r"(\w+)\s+(\w+)(?:\s*->\s*target\.(\w+))?", a)
        B = p.morphisms[m.group(2)]
        return factor_check(p.fields[m.group(1)], B, _target(p, m.group(3), B.target))
    if k == "search":
        return _search(p, a)
    if k == "hunt":
        return _hunt(p, a)
    if k == "identity":
        e = _expr_after_colon(a, Scope(S))
        rep = Report("identity")
        rep.add(Check.from_zero(render(e), is_zero(S.reduce(e), S.domain)))
        return rep
    if k == "pullback":
        name = _match(r"(\w+)\s*:.*", a).group(1)
        B = p.morphisms[name]
        e = _expr_after_colon(a, Scope(B.target))
        rep = Report(f"pullback by {B.name}")
        rep.add(Check.from_zero(render(e), is_zero(B.pullback(e), S.domain)))
        return rep
    if k == "soliton":
        return _soliton(p, a)
    raise AssertionSyntaxError(f"unknown assertion kind {k!r}", a.line, 1)


def run_assertion(p: Problem, a: Assertion) -> Outcome:
    t0 = time.perf_counter()
    try:
        rep = _run(p, a)
    except AssertionSyntaxError:
        raise
    except (FormError, FieldError, MorphismError, JetError, ValueError, ZeroDivisionError) as exc:
        rep = Report(a.text)
        rep.add(Check("evaluation", "fail", f"{type(exc).__name__}: {exc}"))
    if a.negate:
        inner = rep.verdict
        neg = Report(f"not ({rep.title})", list(rep.checks))
        detail = f"inner verdict {inner}"
        verdict = "pass" if inner == "fail" else ("undecidable" if inner == "undecidable" else "fail")
        neg.checks = [Check("negation", verdict, detail)] + [
            Check("  " + c.name, "pass" if verdict == "pass" else c.verdict, c.detail)
            for c in rep.checks]
        rep = neg
    return Outcome(a, rep, time.perf_counter() - t0)


def run_problem(p: Problem, jobs: int = 1) -> list[Outcome]:
    """Run every assertion; results come back in declaration order."""
    if jobs <= 1 or len(p.assertions) <= 1:
        return [run_assertion(p, a) for a in p.assertions]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(lambda a: run_assertion(p, a), p.assertions))
