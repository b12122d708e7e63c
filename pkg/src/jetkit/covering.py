"""Differentiable coverings: nonlocal variables with prescribed first derivatives."""
from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .jet import EqSystem, JetCoord, JetError, Rule, validate_solved_form
from .report import Check, Report


@dataclass(frozen=True)
class Covering:
    base: EqSystem
    nonlocal_: tuple
    rules: tuple
    params: tuple = ()
    distinct: tuple = ()
    _merged: list = field(default_factory=list, compare=False, repr=False)

    def merge(self) -> EqSystem:
        if not self._merged:
            b = self.base
            params = b.params + tuple(p for p in self.params if p not in b.params)
            self._merged.append(EqSystem(
                b.indep, b.local, b.nonlocal_ + tuple(self.nonlocal_), params,
                b.rules + tuple(self.rules), b.ranking, b.distinct + tuple(self.distinct),
                name=b.name, seed=b.seed))
        return self._merged[0]

    @staticmethod
    def from_system(S: EqSystem) -> "Covering":
        """Split a merged system into base (local rules) and nonlocal rules."""
        loc = tuple(r for r in S.rules if r.lead.var in S.local)
        nl = tuple(r for r in S.rules if r.lead.var in S.nonlocal_)
        base = EqSystem(S.indep, S.local, (), S.params, loc, S.ranking, S.distinct, S.name, S.seed)
        return Covering(base, S.nonlocal_, nl)


def merge(c: Covering) -> EqSystem:
    return c.merge()


def double(c: Covering, rename: dict) -> Covering:
    """Add a renamed copy of the nonlocal rules (e.g. lambda -> lambdahat, rho -> rhohat)."""
    S = c.merge()
    missing = [v for v in c.nonlocal_ if v not in rename]
    if missing:
        raise JetError(f"doubling needs new names for {missing}")
    taken = set(S.indep) | set(S.dependent) | set(S.params)
    for old, new in rename.items():
        if new in taken:
            raise JetError(f"name collision: {new!r} already declared")
        if old not in taken:
            raise JetError(f"cannot rename undeclared {old!r}")
    subs = {sp.Symbol(o): sp.Symbol(n) for o, n in rename.items()}
    new_rules = tuple(Rule(JetCoord(rename[r.lead.var], r.lead.sigma), r.rhs.xreplace(subs))
                      for r in c.rules)
    new_params = tuple(rename[p] for p in S.params if p in rename)
    pairs = tuple((p, rename[p]) for p in S.params if p in rename)
    return Covering(c.base, tuple(c.nonlocal_) + tuple(rename[v] for v in c.nonlocal_),
                    tuple(c.rules) + new_rules, tuple(c.params) + new_params,
                    tuple(c.distinct) + pairs)


def project(c: Covering, keep) -> Covering:
    """Drop the nonlocals not in keep (inverse of double on the unhatted copy)."""
    keep = tuple(v for v in c.nonlocal_ if v in keep)
    rules = tuple(r for r in c.rules if r.lead.var in keep)
    return Covering(c.base, keep, rules)


def validate_covering(c: Covering) -> Report:
    return validate_solved_form(c.merge())


def project_solution_check(c: Covering, g, tol: float = 1e-6) -> Report:
    """Base equations on the local components of a numeric covering solution."""
    from .numeric import residual

    rep = Report("projected solution")
    if not c.base.rules:
        rep.add(Check("base residual", "pass", "no base rules"))
        return rep
    try:
        r = residual(c.base, g)
    except ValueError as exc:
        rep.add(Check("base residual", "undecidable", str(exc)))
        return rep
    rep.add(Check("base residual", "pass" if r < tol else "fail", f"max residual {r:.3e}"))
    return rep
