"""Jet coordinates, ranked solved forms and reduction modulo the prolonged equation."""
from __future__ import annotations

import threading
from dataclasses import dataclass

import sympy as sp

from .expr import Expr, SamplingDomain, ZeroVerdict, is_zero, normalize, render
from .report import Check, Report

MultiIndex = tuple  # tuple[int, ...]


class JetError(ValueError):
    pass


class RankingError(JetError):
    pass


def order(sigma: MultiIndex) -> int:
    return sum(sigma)


def unit(n: int, i: int) -> MultiIndex:
    return tuple(1 if k == i else 0 for k in range(n))


def add(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x + y for x, y in zip(a, b))


def sub(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x - y for x, y in zip(a, b))


def leq(a: MultiIndex, b: MultiIndex) -> bool:
    return all(x <= y for x, y in zip(a, b))


def letter(indep_name: str) -> str:
    return indep_name.rstrip("'")


@dataclass(frozen=True)
class JetCoord:
    var: str
    sigma: MultiIndex

    def shift(self, i: int) -> "JetCoord":
        s = list(self.sigma)
        s[i] += 1
        return JetCoord(self.var, tuple(s))


@dataclass(frozen=True)
class Rule:
    lead: JetCoord
    rhs: Expr


@dataclass(frozen=True)
class Ranking:
    """Weighted order, then reverse-lex on sigma (t-count first when n = 2)."""
    weights: tuple | None = None

    def key(self, sigma: MultiIndex):
        w = self.weights or (1,) * len(sigma)
        return (sum(a * b for a, b in zip(w, sigma)),) + tuple(reversed(sigma))


class EqSystem:
    """An equation or merged covering in ranked solved form.

    Nonlocal variables only have order-0 coordinates; their derivatives are
    given by rules with first-order leads, one per independent variable.
    """

    def __init__(self, indep, local, nonlocal_=(), params=(), rules=(), ranking=None,
                 distinct=(), name: str = "", seed: int = 0):
        self.indep = tuple(indep)
        self.local = tuple(local)
        self.nonlocal_ = tuple(nonlocal_)
        self.params = tuple(params)
        self.ranking = ranking or Ranking()
        self.distinct = tuple(tuple(p) for p in distinct)
        self.name = name
        self.seed = seed
        self.n = len(self.indep)
        self.letters = tuple(letter(v) for v in self.indep)
        if len(set(self.letters)) != self.n:
            raise JetError("independent variables must have distinct letters")
        names = list(self.indep) + list(self.local) + list(self.nonlocal_) + list(self.params)
        dup = {v for v in names if names.count(v) > 1}
        if dup:
            raise JetError(f"duplicate names: {sorted(dup)}")
        for v in self.local + self.nonlocal_:
            if "_" in v or "@" in v:
                raise JetError(f"dependent variable name {v!r} may not contain '_' or '@'")
        self.indep_symbols = tuple(sp.Symbol(v) for v in self.indep)
        self._coord_cache: dict = {}
        self._sym_cache: dict = {}
        self.rules: tuple[Rule, ...] = ()
        self._by_var: dict[str, list[Rule]] = {}
        for r in rules:
            self._add_rule(r)
        self._memo: dict[JetCoord, Expr] = {}
        self._dmemo: dict = {}
        self._lock = threading.RLock()
        self._active: list[JetCoord] = []

    # -- construction -----------------------------------------------------
    def _add_rule(self, r: Rule):
        v = r.lead.var
        if v not in self.local and v not in self.nonlocal_:
            raise JetError(f"rule lead {self.name_of(r.lead)} has an undeclared variable")
        if len(r.lead.sigma) != self.n:
            raise JetError("multi-index length does not match the independent variables")
        if order(r.lead.sigma) == 0:
            raise JetError(f"algebraic rule for {v} (lead of order 0) is not supported")
        if v in self.nonlocal_ and order(r.lead.sigma) != 1:
            raise JetError(f"nonlocal {v} needs first-order leads")
        for other in self._by_var.get(v, []):
            if other.lead == r.lead:
                raise JetError(f"duplicate rule for {self.name_of(r.lead)}")
        rhs = sp.sympify(r.rhs)
        for s in rhs.free_symbols:
            if not self.is_declared(s):
                raise JetError(f"undeclared symbol {s.name!r} in rule for {self.name_of(r.lead)}")
        r = Rule(r.lead, rhs)
        self.rules = self.rules + (r,)
        self._by_var.setdefault(v, []).append(r)

    def with_rules(self, extra=(), **overrides) -> "EqSystem":
        kw = dict(indep=self.indep, local=self.local, nonlocal_=self.nonlocal_,
                  params=self.params, rules=self.rules + tuple(extra), ranking=self.ranking,
                  distinct=self.distinct, name=self.name, seed=self.seed)
        kw.update(overrides)
        return EqSystem(**kw)

    @property
    def dependent(self) -> tuple[str, ...]:
        return self.local + self.nonlocal_

    @property
    def domain(self) -> SamplingDomain:
        return SamplingDomain(self.distinct, self.seed)

    def rules_for(self, var: str) -> list[Rule]:
        return list(self._by_var.get(var, []))

    # -- coordinates ------------------------------------------------------
    def name_of(self, jc: JetCoord) -> str:
        if order(jc.sigma) == 0:
            return jc.var
        return jc.var + "_" + "".join(l * k for l, k in zip(self.letters, jc.sigma))

    def symbol(self, var: str, sigma: MultiIndex | None = None) -> sp.Symbol:
        sigma = tuple(sigma) if sigma is not None else (0,) * self.n
        key = (var, sigma)
        s = self._sym_cache.get(key)
        if s is None:
            s = sp.Symbol(self.name_of(JetCoord(var, sigma)))
            self._sym_cache[key] = s
        return s

    def parse_coord_name(self, name: str) -> JetCoord | None:
        if name in self.local or name in self.nonlocal_:
            return JetCoord(name, (0,) * self.n)
        if "_" not in name:
            return None
        var, _, lets = name.partition("_")
        if var not in self.local and var not in self.nonlocal_:
            return None
        sigma = [0] * self.n
        for ch in lets:
            if ch not in self.letters:
                return None
            sigma[self.letters.index(ch)] += 1
        return JetCoord(var, tuple(sigma))

    def coord_of(self, s: sp.Symbol) -> JetCoord | None:
        try:
            return self._coord_cache[s]
        except KeyError:
            jc = self.parse_coord_name(s.name)
            self._coord_cache[s] = jc
            return jc

    def is_declared(self, s: sp.Symbol) -> bool:
        return s.name in self.indep or s.name in self.params or self.coord_of(s) is not None

    def coords_in(self, e: Expr) -> list[tuple[sp.Symbol, JetCoord]]:
        out = []
        for s in sp.sympify(e).free_symbols:
            jc = self.coord_of(s)
            if jc is not None:
                out.append((s, jc))
        return sorted(out, key=lambda p: p[0].name)

    # -- reduction ----------------------------------------------------------
    def _dividing_rule(self, jc: JetCoord) -> Rule | None:
        best = None
        for r in self._by_var.get(jc.var, ()):
            if leq(r.lead.sigma, jc.sigma):
                if best is None or self.ranking.key(r.lead.sigma) > self.ranking.key(best.lead.sigma):
                    best = r
        return best

    def is_reducible(self, jc: JetCoord) -> bool:
        if jc.var in self.nonlocal_ and order(jc.sigma) > 0:
            return True
        return self._dividing_rule(jc) is not None

    def coord_value(self, jc: JetCoord) -> Expr:
        """Reduced value of a coordinate (the symbol itself when irreducible)."""
        hit = self._memo.get(jc)
        if hit is not None:
            return hit
        with self._lock:
            hit = self._memo.get(jc)
            if hit is not None:
                return hit
            if jc in self._active:
                chain = " -> ".join(self.name_of(c) for c in self._active + [jc])
                raise RankingError(f"reduction cycle: {chain}")
            self._active.append(jc)
            try:
                val = self._compute(jc)
            finally:
                self._active.pop()
            self._memo[jc] = val
            return val

    def _compute(self, jc: JetCoord) -> Expr:
        rule = self._dividing_rule(jc)
        if rule is None:
            if jc.var in self.nonlocal_ and order(jc.sigma) > 0:
                raise JetError(f"nonlocal {jc.var} has no rule reaching {self.name_of(jc)}")
            return self.symbol(jc.var, jc.sigma)
        if rule.lead.sigma == jc.sigma:
            return self.reduce(rule.rhs)
        gap = sub(jc.sigma, rule.lead.sigma)
        i = max(k for k in range(self.n) if gap[k] > 0)
        lower = JetCoord(jc.var, tuple(s - (1 if k == i else 0) for k, s in enumerate(jc.sigma)))
        return self.total_derivative(self.coord_value(lower), i)

    def reduce(self, e) -> Expr:
        e = sp.sympify(e)
        subs = {}
        for s in e.free_symbols:
            jc = self.coord_of(s)
            if jc is not None and self.is_reducible(jc):
                subs[s] = self.coord_value(jc)
        if subs:
            e = e.xreplace(subs)
        return normalize(e)

    def direction(self, i) -> int:
        if isinstance(i, (int, sp.Integer)):
            return int(i)
        if i in self.indep:
            return self.indep.index(i)
        if i in self.letters:
            return self.letters.index(i)
        raise JetError(f"unknown direction {i!r}")

    def d_symbol(self, s: sp.Symbol, i: int) -> Expr:
        if s in self.indep_symbols:
            return sp.Integer(1) if self.indep_symbols.index(s) == i else sp.Integer(0)
        jc = self.coord_of(s)
        if jc is None:
            return sp.Integer(0)
        return self.coord_value(jc.shift(i))

    def total_derivative(self, e, i) -> Expr:
        i = self.direction(i)
        e = sp.sympify(e)
        key = (e, i)
        hit = self._dmemo.get(key)
        if hit is not None:
            return hit
        terms = []
        for s in sorted(e.free_symbols, key=lambda q: q.name):
            ds = self.d_symbol(s, i)
            if ds != 0:
                terms.append(sp.diff(e, s) * ds)
        out = self.reduce(sp.Add(*terms))
        with self._lock:
            if len(self._dmemo) > 100_000:
                self._dmemo.clear()
            self._dmemo[key] = out
        return out

    def d_sigma(self, e, sigma: MultiIndex) -> Expr:
        """Apply D^sigma, x-factors first."""
        out = self.reduce(e)
        for i, k in enumerate(sigma):
            for _ in range(k):
                out = self.total_derivative(out, i)
        return out

    def is_zero(self, e) -> ZeroVerdict:
        return is_zero(self.reduce(e), self.domain)

    def __repr__(self):
        return f"EqSystem({self.name or '?'}: {len(self.rules)} rules over {self.dependent})"


def total_derivative(e, i, S: EqSystem) -> Expr:
    return S.total_derivative(e, i)


def reduce(e, S: EqSystem) -> Expr:
    return S.reduce(e)


def validate_solved_form(S: EqSystem) -> Report:
    rep = Report(f"solved form {S.name}".strip())
    rk = S.ranking
    for r in S.rules:
        lead = S.name_of(r.lead)
        bad = []
        for s, jc in S.coords_in(r.rhs):
            if jc.var in S.nonlocal_ and order(jc.sigma) > 0:
                bad.append(s.name)
            elif r.lead.var in S.nonlocal_ and jc.var in S.nonlocal_ and order(jc.sigma) > 0:
                bad.append(s.name)
            elif jc.var == r.lead.var and rk.key(jc.sigma) >= rk.key(r.lead.sigma):
                bad.append(s.name)
        rep.add(Check(f"ranking {lead}", "fail" if bad else "pass",
                      f"rhs contains {', '.join(bad)} ranked >= lead" if bad else ""))
    for v in S.nonlocal_:
        dirs = sorted(r.lead.sigma.index(1) for r in S.rules_for(v))
        ok = dirs == list(range(S.n))
        rep.add(Check(f"nonlocal {v} rules", "pass" if ok else "fail",
                      "" if ok else f"directions present: {[S.indep[d] for d in dirs]}"))
    for v in S.dependent:
        rs = S.rules_for(v)
        for a in range(len(rs)):
            for b in range(a + 1, len(rs)):
                r1, r2 = rs[a], rs[b]
                n1, n2 = S.name_of(r1.lead), S.name_of(r2.lead)
                if leq(r1.lead.sigma, r2.lead.sigma) or leq(r2.lead.sigma, r1.lead.sigma):
                    rep.add(Check(f"disjoint leads {n1}, {n2}", "fail", "one lead divides the other"))
                    continue
                tau = tuple(max(p, q) for p, q in zip(r1.lead.sigma, r2.lead.sigma))
                try:
                    lhs = S.d_sigma(r1.rhs, sub(tau, r1.lead.sigma))
                    rhs = S.d_sigma(r2.rhs, sub(tau, r2.lead.sigma))
                    v_ = is_zero(S.reduce(lhs - rhs), S.domain)
                    rep.add(Check.from_zero(f"compatibility {n1}/{n2} at {S.name_of(JetCoord(v, tau))}", v_))
                except RankingError as exc:
                    rep.add(Check(f"compatibility {n1}/{n2}", "fail", str(exc)))
    return rep


def render_rule(S: EqSystem, r: Rule) -> str:
    return f"{S.name_of(r.lead)} = {render(r.rhs)}"


def horizontal_jacobian(S: EqSystem, xi) -> tuple[sp.Matrix, Expr]:
    """M[s][i] = D_s xi^i, reduced, and its reduced determinant."""
    M = sp.Matrix([[S.total_derivative(xi[i], s) for i in range(len(xi))] for s in range(S.n)])
    return M, S.reduce(M.det(method="berkowitz"))


def exact_inverse(M: sp.Matrix, det: Expr, S: EqSystem) -> sp.Matrix:
    """Adjugate over determinant with every entry reduced."""
    adj = M.adjugate(method="berkowitz")
    return adj.applyfunc(lambda e: S.reduce(e / det))
