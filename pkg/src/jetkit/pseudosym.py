"""Pseudo-prolonged vector fields relative to a conservation law or a matrix form."""
from __future__ import annotations

import threading

import sympy as sp

from .expr import Expr, is_zero, render
from .forms import HForm, is_flat
from .jet import EqSystem, JetCoord, exact_inverse, horizontal_jacobian, order, unit
from .report import Check, Report


class FieldError(ValueError):
    pass


class PseudoField:
    """Y = A D + sum (D + U)_sigma(Phi) d/du_sigma, of rank r.

    a: r rows of n base components; phi: r rows of generating components,
    one per dependent variable of the host system (local then nonlocal);
    U: r x r matrices, one per independent variable.
    """

    def __init__(self, S: EqSystem, a, phi, U: HForm, name: str = "", c=None, form_name: str = ""):
        self.system = S
        self.a = tuple(tuple(S.reduce(e) for e in row) for row in a)
        self.phi = tuple(tuple(S.reduce(e) for e in row) for row in phi)
        self.rank = len(self.phi)
        if any(len(row) != S.n for row in self.a) or len(self.a) != self.rank:
            raise FieldError("base components must be r rows of n entries")
        if any(len(row) != len(S.dependent) for row in self.phi):
            raise FieldError("generating components must cover every dependent variable")
        if U.size != self.rank:
            raise FieldError(f"rank mismatch: field rank {self.rank}, form size {U.size}")
        self.U = U
        self.Umats = U.as_matrices()
        self.name = name
        self.c = c
        self.form_name = form_name
        self._memo: dict = {}
        self._lock = threading.RLock()

    # -- construction ------------------------------------------------------
    @classmethod
    def from_components(cls, S: EqSystem, a_rows, b_rows, U: HForm, name="", c=None,
                        form_name="", phi_rows=None) -> "PseudoField":
        """Build from d/dx_i coefficients a and d/du^j coefficients b.

        The generating function is phi^j = b^j - sum_i a_i u^j_{1_i} (reduced),
        unless given explicitly in phi_rows (entries None fall back to b).
        """
        phi = []
        for h, (arow, brow) in enumerate(zip(a_rows, b_rows)):
            row = []
            for j, v in enumerate(S.dependent):
                given = phi_rows[h][j] if phi_rows is not None else None
                if given is not None:
                    row.append(sp.sympify(given))
                    continue
                e = sp.sympify(brow[j])
                for i in range(S.n):
                    e -= sp.sympify(arow[i]) * S.coord_value(JetCoord(v, unit(S.n, i)))
                row.append(e)
            phi.append(row)
        return cls(S, a_rows, phi, U, name, c, form_name)

    @classmethod
    def scalar(cls, S: EqSystem, a: dict, b: dict, mu: HForm | None = None, c=1, name="",
               phi: dict | None = None) -> "PseudoField":
        c = sp.Rational(c)
        U = HForm.zero(S.n) if mu is None else mu.scaled(c)
        arow = [sp.sympify(a.get(v, 0)) for v in S.indep]
        brow = [sp.sympify(b.get(v, 0)) for v in S.dependent]
        prow = None
        if phi:
            prow = [[phi.get(v) for v in S.dependent]]
        return cls.from_components(S, [arow], [brow], U, name, c, getattr(mu, "name", ""), prow)

    # -- prolongation -------------------------------------------------------
    def pseudo_prolong(self, var, sigma) -> tuple[Expr, ...]:
        """(D + U)_sigma applied to the column Phi^j; x-factors are applied first."""
        S = self.system
        j = var if isinstance(var, int) else S.dependent.index(var)
        sigma = tuple(sigma)
        key = (j, sigma)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        with self._lock:
            hit = self._memo.get(key)
            if hit is not None:
                return hit
            if order(sigma) == 0:
                val = tuple(row[j] for row in self.phi)
            else:
                k = max(i for i in range(S.n) if sigma[i] > 0)
                prev = list(sigma)
                prev[k] -= 1
                val = self.step(self.pseudo_prolong(j, tuple(prev)), k)
            self._memo[key] = val
            return val

    def step(self, vec, k: int) -> tuple[Expr, ...]:
        """(D_k + U_k) on an r-column."""
        S = self.system
        U = self.Umats[k]
        out = []
        for h in range(self.rank):
            e = S.total_derivative(vec[h], k)
            for s in range(self.rank):
                if U[h, s] != 0:
                    e += U[h, s] * vec[s]
            out.append(S.reduce(e))
        return tuple(out)

    def vertical(self, F) -> tuple[Expr, ...]:
        """sum (D+U)_sigma(phi^j) dF/du^j_sigma over the coordinates present in F."""
        S = self.system
        F = sp.sympify(F)
        out = [sp.Integer(0)] * self.rank
        for s, jc in S.coords_in(F):
            dF = sp.diff(F, s)
            pp = self.pseudo_prolong(jc.var, jc.sigma)
            for h in range(self.rank):
                out[h] += pp[h] * dF
        return tuple(S.reduce(e) for e in out)

    def apply(self, G) -> tuple[Expr, ...]:
        S = self.system
        G = S.reduce(G)
        vert = self.vertical(G)
        out = []
        for h in range(self.rank):
            e = vert[h]
            for i in range(S.n):
                if self.a[h][i] != 0:
                    e += self.a[h][i] * S.total_derivative(G, i)
            out.append(S.reduce(e))
        return tuple(out)

    def __repr__(self):
        return f"PseudoField({self.name or '?'}, rank {self.rank})"


def pseudo_prolong(Y: PseudoField, var, sigma) -> tuple[Expr, ...]:
    return Y.pseudo_prolong(var, sigma)


def apply_field(Y: PseudoField, G) -> tuple[Expr, ...]:
    return Y.apply(G)


def _tangency(Y: PseudoField, rep: Report):
    S = Y.system
    for r in S.rules:
        lead = S.symbol(r.lead.var, r.lead.sigma)
        vals = Y.vertical(lead - r.rhs)
        for h, e in enumerate(vals):
            row = f" row {h + 1}" if Y.rank > 1 else ""
            rep.add(Check.from_zero(f"tangency {S.name_of(r.lead)}{row}", is_zero(e, S.domain)))


def check_pseudosymmetry(Y: PseudoField, S: EqSystem | None = None) -> Report:
    if S is not None and S is not Y.system:
        raise FieldError("field was built over a different system")
    rep = Report(f"pseudosymmetry {Y.name}".strip())
    form = is_flat(Y.U, Y.system)
    label = "conservation law" if Y.rank == 1 else "zero curvature"
    rep.extend(form, f"{label}: ")
    _tangency(Y, rep)
    return rep


def check_r_pseudosymmetry(Y: PseudoField, S: EqSystem | None = None) -> Report:
    rep = check_pseudosymmetry(Y, S)
    rep.title = f"{Y.rank}-pseudosymmetry {Y.name}".strip()
    return rep


def is_invariant(Y: PseudoField, I) -> Report:
    S = Y.system
    rep = Report(f"invariant {render(I)}")
    for h, e in enumerate(Y.apply(I)):
        rep.add(Check.from_zero(f"Y(I) row {h + 1}", is_zero(e, S.domain)))
    return rep


def derived_invariants(Y: PseudoField | None, xi, nu, S: EqSystem) -> list[list[Expr]]:
    """table[j][i] = nu^j_i, from [nu^j_i] = [D_s xi^i]^{-1} [D_s nu^j]."""
    M, det = horizontal_jacobian(S, xi)
    if is_zero(det, S.domain):
        raise FieldError(f"singular Jacobian: det = {render(det)}")
    inv = exact_inverse(M, det, S)
    table = []
    for v in nu:
        col = sp.Matrix([S.total_derivative(v, s) for s in range(S.n)])
        table.append([S.reduce(e) for e in inv * col])
    return table
