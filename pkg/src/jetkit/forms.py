"""Horizontal 1-forms: conservation laws, zero-curvature representations,
gauge transformations and the Riccati covering of a ZCR."""
from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

from .covering import Covering
from .expr import Expr, is_zero, render
from .jet import EqSystem, JetCoord, Rule, exact_inverse, unit
from .report import Check, Report

STANDARD = "standard"  # D_t X - D_x T + [X, T]
FLIPPED = "flipped"


class FormError(ValueError):
    pass


@dataclass(frozen=True)
class HForm:
    """U_1 dx^1 + ... + U_n dx^n; components are Exprs or square matrices."""
    components: tuple
    name: str = ""

    def __post_init__(self):
        comps = tuple(sp.ImmutableMatrix(c) if isinstance(c, (sp.MatrixBase, list)) else sp.sympify(c)
                      for c in self.components)
        shapes = {c.shape if isinstance(c, sp.MatrixBase) else None for c in comps}
        if len(shapes) != 1:
            raise FormError("components of a form must share one shape")
        shape = shapes.pop()
        if shape is not None and shape[0] != shape[1]:
            raise FormError(f"matrix components must be square, got {shape[0]}x{shape[1]}")
        object.__setattr__(self, "components", comps)

    @property
    def is_matrix(self) -> bool:
        return isinstance(self.components[0], sp.MatrixBase)

    @property
    def size(self) -> int:
        return self.components[0].shape[0] if self.is_matrix else 1

    def as_matrices(self) -> tuple[sp.ImmutableMatrix, ...]:
        if self.is_matrix:
            return self.components
        return tuple(sp.ImmutableMatrix([[c]]) for c in self.components)

    def scaled(self, c) -> "HForm":
        c = sp.sympify(c)
        return HForm(tuple(c * u for u in self.components), self.name)

    def reduced(self, S: EqSystem) -> "HForm":
        return HForm(tuple(_map(u, S.reduce) for u in self.components), self.name)

    @staticmethod
    def zero(n: int, size: int = 1) -> "HForm":
        if size == 1:
            return HForm((sp.Integer(0),) * n, "0")
        return HForm((sp.zeros(size, size),) * n, "0")


def _map(u, f):
    return u.applyfunc(f) if isinstance(u, sp.MatrixBase) else f(u)


def _dmat(S: EqSystem, M: sp.MatrixBase, i: int) -> sp.Matrix:
    return M.applyfunc(lambda e: S.total_derivative(e, i))


def _pairs(n: int):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _cell_checks(rep: Report, S: EqSystem, M: sp.MatrixBase, label: str):
    for a in range(M.shape[0]):
        for b in range(M.shape[1]):
            v = is_zero(S.reduce(M[a, b]), S.domain)
            rep.add(Check.from_zero(f"{label} cell ({a + 1},{b + 1})", v))


def is_conservation_law(mu: HForm, S: EqSystem) -> Report:
    if mu.is_matrix:
        raise FormError("a conservation law has scalar components")
    if len(mu.components) != S.n:
        raise FormError("form has the wrong number of components")
    rep = Report(f"conservation law {mu.name}".strip())
    U = mu.components
    for i, j in _pairs(S.n):
        e = S.total_derivative(U[i], j) - S.total_derivative(U[j], i)
        rep.add(Check.from_zero(f"D_{S.indep[j]} U_{S.indep[i]} - D_{S.indep[i]} U_{S.indep[j]}",
                                is_zero(S.reduce(e), S.domain)))
    return rep


def zcr_defect(alpha: HForm, S: EqSystem, i: int, j: int, convention: str = STANDARD) -> sp.Matrix:
    """D_j A_i - D_i A_j + s[A_i, A_j] (s = +1 in the default convention)."""
    A = alpha.as_matrices()
    s = 1 if convention == STANDARD else -1
    return _dmat(S, A[i], j) - _dmat(S, A[j], i) + s * (A[i] * A[j] - A[j] * A[i])


def is_zcr(alpha: HForm, S: EqSystem, convention: str = STANDARD) -> Report:
    if not alpha.is_matrix:
        raise FormError("a ZCR has matrix components")
    rep = Report(f"ZCR {alpha.name}".strip())
    for i, j in _pairs(S.n):
        _cell_checks(rep, S, zcr_defect(alpha, S, i, j, convention), f"[{S.indep[i]},{S.indep[j]}]")
    return rep


def wedge_defect(alpha: HForm, S: EqSystem, i: int, j: int) -> sp.Matrix:
    """dx^i ^ dx^j coefficient of d_H(alpha) - alpha ^ alpha."""
    A = alpha.as_matrices()
    d_h = _dmat(S, A[j], i) - _dmat(S, A[i], j)
    wedge = A[i] * A[j] - A[j] * A[i]
    return d_h - wedge


def is_zcr_wedge(alpha: HForm, S: EqSystem) -> Report:
    """Independent check through d_H alpha - alpha ^ alpha = 0."""
    rep = Report(f"ZCR (wedge form) {alpha.name}".strip())
    for i, j in _pairs(S.n):
        _cell_checks(rep, S, wedge_defect(alpha, S, i, j), f"[{S.indep[i]},{S.indep[j]}]")
    return rep


def flatness_defect(U: HForm, S: EqSystem, i: int, j: int) -> sp.Matrix:
    """D_i U_j - D_j U_i + [U_i, U_j]: the curvature of D + U."""
    A = U.as_matrices()
    return _dmat(S, A[j], i) - _dmat(S, A[i], j) + A[i] * A[j] - A[j] * A[i]


def is_flat(U: HForm, S: EqSystem) -> Report:
    """[D_i + U_i, D_j + U_j] = 0 mod the equation."""
    rep = Report(f"zero curvature {U.name}".strip())
    for i, j in _pairs(S.n):
        _cell_checks(rep, S, flatness_defect(U, S, i, j), f"[{S.indep[i]},{S.indep[j]}]")
    return rep


def gauge_transform(alpha: HForm, Sm, S: EqSystem) -> HForm:
    Sm = sp.Matrix(Sm)
    if Sm.shape != (alpha.size, alpha.size):
        raise FormError("gauge matrix has the wrong shape")
    det = S.reduce(Sm.det(method="berkowitz"))
    if is_zero(det, S.domain):
        raise FormError(f"singular gauge: det = {render(det)}")
    inv = exact_inverse(Sm, det, S)
    comps = []
    for i, A in enumerate(alpha.as_matrices()):
        B = _dmat(S, Sm, i) * inv + Sm * A * inv
        comps.append(B.applyfunc(S.reduce))
    return HForm(tuple(comps), f"{alpha.name}^S" if alpha.name else "")


def default_riccati_names(size: int) -> list[str]:
    return ["rho"] if size == 2 else [f"rho{k}" for k in range(1, size)]


def riccati_covering(alpha: HForm, h: int, S: EqSystem, names=None, check: bool = True):
    """Riccati covering in rho^k = v^j / v^h (h is 1-based) and its conservation law mu."""
    if not alpha.is_matrix:
        raise FormError("Riccati construction needs a matrix form")
    size = alpha.size
    if not 1 <= h <= size:
        raise FormError(f"pivot {h} out of range 1..{size}")
    if check:
        z = is_zcr(alpha, S)
        if not z.ok:
            raise FormError(f"form {alpha.name} is not a ZCR:\n{z}")
    names = list(names or default_riccati_names(size))
    if len(names) != size - 1:
        raise FormError("wrong number of nonlocal names")
    piv = h - 1
    others = [j for j in range(size) if j != piv]
    V = [None] * size
    V[piv] = sp.Integer(1)
    for k, j in enumerate(others):
        V[j] = sp.Symbol(names[k])
    rules, mu = [], []
    for i, A in enumerate(alpha.as_matrices()):
        lam = sum((A[piv, s] * V[s] for s in range(size)), sp.Integer(0))
        mu.append(S.reduce(lam))
        for k, j in enumerate(others):
            row = sum((A[j, s] * V[s] for s in range(size)), sp.Integer(0))
            rules.append(Rule(JetCoord(names[k], unit(S.n, i)), row - lam * V[j]))
    cov = Covering(S, tuple(names), tuple(rules))
    merged = cov.merge()
    rules = tuple(Rule(r.lead, merged.reduce(r.rhs)) for r in rules)
    cov = Covering(S, tuple(names), rules)
    return cov, HForm(tuple(mu), "mu")
