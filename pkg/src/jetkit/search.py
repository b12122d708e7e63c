"""Linear ansatz searches: pseudosymmetries with unknown constant coefficients
and polynomial relations among prolonged invariants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce as _fold

import sympy as sp
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from .expr import Expr, encoded_fraction, is_zero, normalize, render
from .forms import HForm
from .jet import EqSystem
from .morphism import Morphism
from .pseudosym import PseudoField, check_pseudosymmetry
from .report import Report

DEFAULT_C = tuple(sp.Rational(c) for c in ("0", "1", "-1", "2", "-2", "4", "-4", "1/2", "-1/2"))
_UNKNOWN = "\x01k"


class SearchError(ValueError):
    pass


class NonlinearAnsatz(SearchError):
    pass


def _unknowns(n: int) -> list[sp.Symbol]:
    return [sp.Symbol(f"{_UNKNOWN}{i}") for i in range(n)]


def linear_system(exprs, unknowns) -> list[list[sp.Rational]]:
    """Rows of the homogeneous system forcing every expression to vanish
    identically in all symbols other than the unknowns."""
    uset = set(unknowns)
    rows, seen = [], set()
    for e in exprs:
        p, q, enc = encoded_fraction(e)
        if p == 0:
            continue
        if q.free_symbols & uset:
            raise NonlinearAnsatz(f"unknowns appear in a denominator: {render(enc.decode(q))}")
        gens = sorted(p.free_symbols - uset, key=sp.default_sort_key)
        terms = sp.Poly(p, *gens).terms() if gens else [((), p)]
        for _, coeff in terms:
            coeff = sp.expand(coeff)
            lin = sp.Poly(coeff, *unknowns)
            for mon, _ in lin.terms():
                if sum(mon) > 1:
                    bad = sp.Mul(*[u**k for u, k in zip(unknowns, mon)])
                    raise NonlinearAnsatz(f"unknowns enter nonlinearly: {bad}")
            row = [sp.Rational(lin.coeff_monomial(u)) for u in unknowns]
            if sp.Poly(coeff, *unknowns).coeff_monomial(1) != 0:
                raise SearchError("inhomogeneous term in a homogeneous ansatz")
            key = _row_key(row)
            if key is not None and key not in seen:
                seen.add(key)
                rows.append(row)
    return rows


def _row_key(row):
    piv = next((x for x in row if x != 0), None)
    if piv is None:
        return None
    return tuple(x / piv for x in row)


def nullspace(rows, n: int) -> list[list[sp.Rational]]:
    """Exact basis of {k : rows . k = 0} over QQ, scaled to integer vectors."""
    if n == 0:
        return []
    if not rows:
        return [[sp.Integer(int(i == j)) for j in range(n)] for i in range(n)]
    M = DomainMatrix([[QQ(int(x.p), int(x.q)) for x in r] for r in rows], (len(rows), n), QQ)
    out = []
    for vec in M.nullspace().to_Matrix().tolist():
        v = [sp.Rational(x) for x in vec]
        den = sp.ilcm(*[x.q for x in v])
        v = [x * den for x in v]
        g = _fold(math.gcd, [int(x) for x in v if x != 0])
        v = [x / g for x in v]
        if next(x for x in v if x != 0) < 0:
            v = [-x for x in v]
        out.append(v)
    return out


def in_span(vectors, w) -> bool:
    if all(x == 0 for x in w):
        return True
    if not vectors:
        return False
    A = sp.Matrix(vectors)
    return A.rank() == A.col_join(sp.Matrix([w])).rank()


# ---------------------------------------------------------------------------
# pseudosymmetries

@dataclass
class Ansatz:
    """Components listed in `components` are sum_k c_k m_k over `monomials`."""
    system: EqSystem
    form: HForm | None
    monomials: tuple
    components: tuple
    c_values: tuple = (sp.Integer(2),)
    name: str = ""

    def template(self, c) -> tuple[PseudoField, list[sp.Symbol]]:
        S = self.system
        comps = list(self.components) or list(S.indep) + list(S.dependent)
        ks = _unknowns(len(comps) * len(self.monomials))
        it = iter(ks)
        vals = {v: sum((next(it) * sp.sympify(m) for m in self.monomials), sp.Integer(0))
                for v in comps}
        return self._field(vals, c), ks

    def _field(self, vals: dict, c) -> PseudoField:
        S = self.system
        return PseudoField.scalar(S, {v: vals.get(v, 0) for v in S.indep},
                                  {v: vals.get(v, 0) for v in S.dependent},
                                  self.form, c, self.name)

    def instantiate(self, vec, c) -> PseudoField:
        S = self.system
        comps = list(self.components) or list(S.indep) + list(S.dependent)
        it = iter(vec)
        vals = {v: normalize(sum((next(it) * sp.sympify(m) for m in self.monomials), sp.Integer(0)))
                for v in comps}
        return self._field(vals, c)


@dataclass
class SearchResult:
    ansatz: Ansatz
    by_c: dict = field(default_factory=dict)        # c -> [PseudoField]
    checks: dict = field(default_factory=dict)      # c -> [Report]

    @property
    def dim(self) -> int:
        return sum(len(v) for v in self.by_c.values())

    @property
    def basis(self) -> list[PseudoField]:
        return [f for v in self.by_c.values() for f in v]


def tangency_residuals(Y: PseudoField) -> list[Expr]:
    S = Y.system
    out = []
    for r in S.rules:
        out.extend(Y.vertical(S.symbol(r.lead.var, r.lead.sigma) - r.rhs))
    return out


def search_pseudosymmetry(A: Ansatz, S: EqSystem | None = None, verify: bool = True) -> SearchResult:
    if S is not None and S is not A.system:
        raise SearchError("ansatz was built over a different system")
    if A.form is not None:
        from .forms import is_conservation_law
        rep = is_conservation_law(A.form, A.system)
        if not rep.ok:
            raise SearchError(f"form {A.form.name} is not a conservation law:\n{rep}")
    res = SearchResult(A)
    for c in A.c_values:
        Y, ks = A.template(c)
        rows = linear_system(tangency_residuals(Y), ks)
        fields = [A.instantiate(v, c) for v in nullspace(rows, len(ks))]
        res.by_c[c] = fields
        if verify:
            res.checks[c] = [check_pseudosymmetry(f) for f in fields]
    return res


def proportional(Y1: PseudoField, Y2: PseudoField) -> bool:
    """Y1 = k Y2 for a nonzero rational k (base and generating components)."""
    S = Y1.system
    a = [e for row in Y1.a for e in row] + [e for row in Y1.phi for e in row]
    b = [e for row in Y2.a for e in row] + [e for row in Y2.phi for e in row]
    if len(a) != len(b):
        return False
    k = None
    for x, y in zip(a, b):
        if y != 0 and not is_zero(y, S.domain).zero:
            k = normalize(x / y)
            break
    if k is None or k == 0 or k.free_symbols:
        return False
    return all(is_zero(S.reduce(x - k * y), S.domain).zero for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# relations among invariants

@dataclass
class HuntResult:
    basis: tuple
    vectors: list
    relations: list

    def covers(self, expr) -> bool:
        w = coefficients_in_basis(expr, self.basis)
        return w is not None and in_span(self.vectors, w)


def coefficients_in_basis(expr, basis):
    """w with sum w_k basis_k == expr identically, or None."""
    ks = _unknowns(len(basis))
    e = sp.sympify(expr) - sum((k * sp.sympify(m) for k, m in zip(ks, basis)), sp.Integer(0))
    p, q, _ = encoded_fraction(e)
    gens = sorted(p.free_symbols - set(ks), key=sp.default_sort_key)
    eqs = [c for _, c in (sp.Poly(p, *gens).terms() if gens else [((), p)])]
    sol = sp.solve(eqs, ks, dict=True)
    if not sol:
        return None
    s = sol[0]
    return [sp.Rational(s.get(k, 0).subs({kk: 0 for kk in ks})) for k in ks]


def hunt_relations(inv: Morphism, basis, Y: PseudoField | None = None) -> HuntResult:
    """Linear relations sum v_k m_k = 0 among basis monomials in the target
    coordinates, holding after pullback by the invariant map."""
    basis = tuple(sp.sympify(m) for m in basis)
    if Y is not None:
        from .pseudosym import is_invariant
        for e in list(inv.xi) + list(inv.nu.values()):
            if not is_invariant(Y, e).ok:
                raise SearchError(f"{render(e)} is not an invariant of {Y.name}")
    pulled = [inv.pullback(m) for m in basis]
    ks = _unknowns(len(basis))
    total = normalize(sum((k * p for k, p in zip(ks, pulled)), sp.Integer(0)))
    rows = linear_system([total], ks)
    vecs = nullspace(rows, len(basis))
    rels = [normalize(sum((c * m for c, m in zip(v, basis)), sp.Integer(0))) for v in vecs]
    return HuntResult(basis, vecs, rels)


def search_report(res: SearchResult) -> Report:
    rep = Report(f"search {res.ansatz.name}".strip())
    for c, reps in res.checks.items():
        for i, r in enumerate(reps):
            rep.extend(r, f"c={c} basis {i + 1}: ")
    return rep
