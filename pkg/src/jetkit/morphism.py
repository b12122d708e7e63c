"""C-morphisms given by lower components, their prolongation, regularity and verification."""
from __future__ import annotations

import threading

import sympy as sp

from .expr import Expr, is_zero, render
from .jet import EqSystem, JetCoord, exact_inverse, horizontal_jacobian, order
from .report import Check, Report


class MorphismError(ValueError):
    pass


class Morphism:
    """x'_i = xi^i, u'^j = nu^j, from a source system to a target system."""

    def __init__(self, source: EqSystem, target: EqSystem, xi, nu: dict, name: str = ""):
        if len(xi) != target.n or target.n != source.n:
            raise MorphismError("xi needs one component per independent variable")
        missing = [v for v in target.dependent if v not in nu]
        if missing:
            raise MorphismError(f"no component given for target variables {missing}")
        self.source = source
        self.target = target
        self.name = name
        self.xi = tuple(source.reduce(e) for e in xi)
        self.nu = {v: source.reduce(nu[v]) for v in target.dependent}
        self._jac = None
        self._memo: dict = {}
        self._lock = threading.RLock()

    @classmethod
    def identity(cls, S: EqSystem, target: EqSystem | None = None) -> "Morphism":
        target = target or S
        xi = [sp.Symbol(v) for v in S.indep]
        nu = {t: S.symbol(s) for t, s in zip(target.dependent, S.dependent)}
        return cls(S, target, xi, nu, "id")

    def jacobian(self):
        if self._jac is None:
            with self._lock:
                if self._jac is None:
                    S = self.source
                    M, det = horizontal_jacobian(S, self.xi)
                    inv = None if is_zero(det, S.domain) else exact_inverse(M, det, S)
                    self._jac = (M, det, inv)
        return self._jac

    def prolong(self, var: str, sigma) -> Expr:
        """nu^var_sigma via [nu_{sigma+1_i}] = [D_s xi^i]^{-1} [D_s nu_sigma]."""
        sigma = tuple(sigma)
        key = (var, sigma)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        with self._lock:
            hit = self._memo.get(key)
            if hit is not None:
                return hit
            if order(sigma) == 0:
                val = self.nu[var]
            else:
                _, det, inv = self.jacobian()
                if inv is None:
                    raise MorphismError(f"morphism {self.name} is not regular: det = {render(det)}")
                S = self.source
                k = max(i for i in range(S.n) if sigma[i] > 0)
                prev = list(sigma)
                prev[k] -= 1
                lower = self.prolong(var, tuple(prev))
                ds = [S.total_derivative(lower, s) for s in range(S.n)]
                val = S.reduce(sum((inv[k, s] * ds[s] for s in range(S.n)), sp.Integer(0)))
            self._memo[key] = val
            return val

    def pullback(self, e) -> Expr:
        T, S = self.target, self.source
        e = sp.sympify(e)
        subs = {}
        for s in e.free_symbols:
            if s.name in T.indep:
                subs[s] = self.xi[T.indep.index(s.name)]
                continue
            jc = T.coord_of(s)
            if jc is not None:
                subs[s] = self.prolong(jc.var, jc.sigma)
        return S.reduce(e.xreplace(subs))

    def __repr__(self):
        return f"Morphism({self.name or '?'}: {self.source.name} -> {self.target.name})"


def prolong(B: Morphism, var: str, sigma) -> Expr:
    return B.prolong(var, sigma)


def pullback(B: Morphism, e) -> Expr:
    return B.pullback(e)


def check_regularity(B: Morphism) -> Check:
    _, det, inv = B.jacobian()
    if inv is None:
        return Check("regularity", "fail", f"det = {render(det)}")
    return Check("regularity", "pass", f"det = {render(det)}")


def verify_morphism(B: Morphism, target: EqSystem | None = None) -> Report:
    T = target or B.target
    if T is not B.target:
        B = Morphism(B.source, T, B.xi, B.nu, B.name)
    rep = Report(f"morphism {B.name} -> {T.name}".strip())
    reg = rep.add(check_regularity(B))
    if not reg.ok:
        return rep
    for r in T.rules:
        lead = T.symbol(r.lead.var, r.lead.sigma)
        e = B.pullback(lead - r.rhs)
        rep.add(Check.from_zero(f"pullback of {T.name_of(r.lead)} rule", is_zero(e, B.source.domain)))
    return rep


def factor_check(Y, inv: Morphism, Q: EqSystem | None = None) -> Report:
    """Invariance of every component of inv under Y, then inv as a morphism onto Q."""
    from .pseudosym import is_invariant

    rep = Report(f"factorization by {getattr(Y, 'name', '')} via {inv.name}".strip())
    comps = [(f"x'{i + 1}", e) for i, e in enumerate(inv.xi)] + list(inv.nu.items())
    for label, e in comps:
        r = is_invariant(Y, e)
        for c in r.checks:
            rep.add(Check(f"invariant {label}: {c.name}", c.verdict, c.detail))
    rep.extend(verify_morphism(inv, Q))
    return rep
