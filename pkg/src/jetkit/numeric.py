"""Numeric back-end: Riccati-type coverings integrated by fixed-step RK4 over a
rectangular grid, pointwise morphisms, and finite-difference residuals."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from scipy.interpolate import PchipInterpolator

from .jet import EqSystem, JetCoord, letter
from .report import Check, Report

BLOWUP = 1e8
EDGE = 2  # source cells kept between resampled targets and a line end


class NumericError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    x: tuple = (-2.0, 2.0)
    t: tuple = (-2.0, 2.0)
    hx: float = 1 / 64
    ht: float = 1 / 64
    origin: tuple = (0.0, 0.0)

    def axis(self, k: int) -> np.ndarray:
        lo, hi = (self.x, self.t)[k]
        h = (self.hx, self.ht)[k]
        o = self.origin[k]
        if hi < lo or not lo <= o <= hi:
            raise NumericError("origin must lie inside the grid")
        if hi == lo:
            return np.array([float(lo)])
        # the origin is always a node; the range is covered outward from it
        left = int(math.floor((o - lo) / h + 1e-9))
        right = int(math.floor((hi - o) / h + 1e-9))
        return o + h * np.arange(-left, right + 1)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.x, self.t, self.hx / factor, self.ht / factor, self.origin)


@dataclass
class GridField:
    """Samples on a tensor grid; arrays are indexed [t, x]."""
    x: np.ndarray
    t: np.ndarray
    values: dict
    params: dict = field(default_factory=dict)
    mask: np.ndarray | None = None           # True marks an invalid cell
    seed: dict = field(default_factory=dict)  # closed-form local solution, if any
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (len(self.t), len(self.x))
        for k, a in (("x", self.x), ("t", self.t)):
            if len(a) > 1 and not np.all(np.diff(a) > 0):
                raise NumericError(f"{k} grid is not strictly increasing")
        if self.mask is None:
            self.mask = np.zeros(shape, bool)
        for v, a in self.values.items():
            if a.shape != shape:
                raise NumericError(f"samples of {v} have shape {a.shape}, expected {shape}")
            self.mask |= ~np.isfinite(a)
        for a in self.values.values():
            a[self.mask] = np.nan
            a.setflags(write=False)
        self.mask.setflags(write=False)

    @property
    def shape(self):
        return self.mask.shape

    @property
    def hx(self) -> float:
        return float(self.x[1] - self.x[0]) if len(self.x) > 1 else 0.0

    @property
    def ht(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def mesh(self):
        return np.meshgrid(self.x, self.t)

    def to_csv(self, out=None) -> str:
        """Rows of x, t and every variable; masked cells are written as nan."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.values)
        w.writerow(["x", "t", *names])
        X, T = self.mesh()
        for idx in np.ndindex(self.shape):
            w.writerow([repr(float(X[idx])), repr(float(T[idx]))]
                       + [repr(float(self.values[v][idx])) for v in names])
        text = buf.getvalue()
        if out is not None:
            with open(out, "w", newline="") as fh:
                fh.write(text)
        return text


# ---------------------------------------------------------------------------
# evaluation helpers

def _lambdify(args, exprs):
    return sp.lambdify(args, exprs, modules="numpy", dummify=True)


def _broadcast(v, shape):
    return np.broadcast_to(np.asarray(v, dtype=float), shape).astype(float)


class _SeedJets:
    """Jets of a closed-form local solution, as numpy callables of (x, t)."""

    def __init__(self, S: EqSystem, seed: dict, params: dict):
        self.S = S
        self.x, self.t = (sp.Symbol(v) for v in S.indep)
        self.subs = {sp.Symbol(k): sp.nsimplify(v, rational=True) if isinstance(v, float) else v
                     for k, v in params.items()}
        missing = [v for v in S.local if v not in seed]
        if missing:
            raise NumericError(f"no seed given for {', '.join(missing)}")
        self.seed = {v: sp.sympify(e).subs(self.subs) for v, e in seed.items()}
        self._cache = {}

    def expr(self, jc: JetCoord):
        e = self.seed[jc.var]
        for i, k in enumerate(jc.sigma):
            if k:
                e = sp.diff(e, (self.x, self.t)[i], k)
        return e

    def __call__(self, jc: JetCoord):
        if jc not in self._cache:
            self._cache[jc] = _lambdify([self.x, self.t], self.expr(jc))
        return self._cache[jc]


def _rule_residual_symbolic(S: EqSystem, jets: _SeedJets, points) -> float:
    """Largest |lead - rhs| of the base rules at the given (x, t) points."""
    worst = 0.0
    for r in S.rules:
        if r.lead.var not in S.local:
            continue
        e = jets.expr(r.lead) - r.rhs
        sub = {s: jets.expr(jc) for s, jc in S.coords_in(r.rhs)}
        e = (e.subs(sub)).subs(jets.subs)
        f = _lambdify([jets.x, jets.t], e)
        for px, pt in points:
            worst = max(worst, abs(complex(f(px, pt))))
    return worst


class _CoveringRHS:
    """rho_i = F_i(x, t, rho) for the nonlocal rules along direction i."""

    def __init__(self, S: EqSystem, jets: _SeedJets, params: dict):
        self.names = list(S.nonlocal_)
        n = S.n
        self.funcs = []
        rho = [sp.Symbol(v) for v in self.names]
        pvals = {sp.Symbol(k): v for k, v in params.items()}
        for i in range(n):
            rhs = []
            for v in self.names:
                jc = JetCoord(v, tuple(int(k == i) for k in range(n)))
                r = S._dividing_rule(jc)
                if r is None or r.lead != jc:
                    raise NumericError(f"no rule for {S.name_of(jc)}")
                e = r.rhs.subs(pvals)
                locs = [(s, c) for s, c in S.coords_in(e) if c.var in S.local]
                bad = [s for s, c in S.coords_in(e) if c.var in S.nonlocal_ and any(c.sigma)]
                if bad:
                    raise NumericError(f"rule for {S.name_of(jc)} involves derivatives of nonlocals")
                loose = e.free_symbols - set(rho) - {s for s, _ in locs} - {jets.x, jets.t}
                if loose:
                    raise NumericError(f"unset parameters: {', '.join(sorted(map(str, loose)))}")
                rhs.append((e, locs))
            args = [jets.x, jets.t] + rho + sorted({s for _, ls in rhs for s, _ in ls}, key=str)
            locs = args[2 + len(rho):]
            coords = [dict(ls) for _, ls in rhs]
            cmap = {s: c for d in coords for s, c in d.items()}
            f = _lambdify(args, [e for e, _ in rhs])
            self.funcs.append((f, [jets(cmap[s]) for s in locs]))

    def __call__(self, i: int, x, t, rho):
        f, loc = self.funcs[i]
        shape = np.shape(rho[0])
        vals = [_broadcast(g(x, t), shape) for g in loc]
        out = f(x, t, *rho, *vals)
        return [_broadcast(o, shape) for o in out]


def _rk4_line(F, i: int, s0, fixed, state, h: float, steps: int):
    """March `steps` RK4 steps of size h in direction i from coordinate s0.
    `fixed` is the other coordinate (scalar or array matching the state).
    Returns a list of states, the first being the input; blown-up entries
    become nan and stay nan."""
    out = [state]
    y = [np.array(c, float) for c in state]
    s = s0

    def call(s, y):
        return F(i, s, fixed, y) if i == 0 else F(i, fixed, s, y)

    for _ in range(steps):
        with np.errstate(all="ignore"):
            k1 = call(s, y)
            k2 = call(s + h / 2, [a + h / 2 * b for a, b in zip(y, k1)])
            k3 = call(s + h / 2, [a + h / 2 * b for a, b in zip(y, k2)])
            k4 = call(s + h, [a + h * b for a, b in zip(y, k3)])
            y = [a + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        bad = np.zeros(np.shape(y[0]), bool)
        for a in y:
            bad |= ~np.isfinite(a) | (np.abs(a) > BLOWUP)
        for a in y:
            a[bad] = np.nan
        s = s + h
        out.append([a.copy() for a in y])
    return out


def _march(F, i, axis, o_idx, fixed, state):
    """Both directions from node o_idx; returns states indexed like axis."""
    h = float(axis[1] - axis[0]) if len(axis) > 1 else 0.0
    fwd = _rk4_line(F, i, axis[o_idx], fixed, state, h, len(axis) - 1 - o_idx)
    bwd = _rk4_line(F, i, axis[o_idx], fixed, state, -h, o_idx)
    return bwd[::-1] + fwd[1:]


def integrate_covering(S: EqSystem, seed: dict, params: dict, grid: Grid, ic: dict,
                       probes: int = 5, seed_tol: float = 1e-6) -> GridField:
    """Solve the nonlocal rules of a covering over the seed: along t at the
    origin column first, then along x on every t-line (all lines at once)."""
    if S.n != 2:
        raise NumericError("numeric integration is implemented for two independent variables")
    jets = _SeedJets(S, seed, params)
    xs, ts = grid.axis(0), grid.axis(1)
    ox = int(np.argmin(np.abs(xs - grid.origin[0])))
    ot = int(np.argmin(np.abs(ts - grid.origin[1])))

    rng = np.random.default_rng(0)
    pts = list(zip(rng.uniform(xs[0], xs[-1], 3), rng.uniform(ts[0], ts[-1], 3)))
    bad = _rule_residual_symbolic(S, jets, pts)
    if bad > seed_tol:
        raise NumericError(f"seed does not solve the base equations (residual {bad:.2e})")

    names = list(S.nonlocal_)
    missing = [v for v in names if v not in ic]
    if missing:
        raise NumericError(f"no initial value for {', '.join(missing)}")
    F = _CoveringRHS(S, jets, params)

    start = [np.array([float(ic[v])]) for v in names]
    column = _march(F, 1, ts, ot, xs[ox], start)             # list over t
    init = [np.array([c[k][0] for c in column]) for k in range(len(names))]
    rows = _march(F, 0, xs, ox, ts, init)                    # list over x of arrays over t
    values = {v: np.array([r[k] for r in rows]).T for k, v in enumerate(names)}

    Xg, Tg = np.meshgrid(xs, ts)
    for v in S.local:
        values[v] = _broadcast(jets(JetCoord(v, (0, 0)))(Xg, Tg), Xg.shape)
    mask = np.zeros(Xg.shape, bool)
    for v in names:
        mask |= np.isnan(values[v])
    # a blow-up poisons the rest of its line outward from the origin column
    for j in range(len(ts)):
        for rng_ in (range(ox, len(xs)), range(ox, -1, -1)):
            hit = False
            for k in rng_:
                hit = hit or mask[j, k]
                mask[j, k] = hit
    g = GridField(xs, ts, {v: values[v] for v in list(S.local) + names},
                  dict(params), mask, dict(jets.seed))
    g.meta["cross_check"] = _cross_check(F, g, ox, ot, names, probes)
    return g


def _cross_check(F, g: GridField, ox, ot, names, probes: int) -> float:
    """Integrate x-first-then-t to a few grid nodes and compare with g."""
    xs, ts = g.x, g.t
    if len(xs) == 1 and len(ts) == 1:
        return 0.0
    rng = np.random.default_rng(1)
    worst = 0.0
    start = [np.array([g.values[v][ot, ox]]) for v in names]
    row = _march(F, 0, xs, ox, ts[ot], start)
    for _ in range(probes):
        j, k = int(rng.integers(len(ts))), int(rng.integers(len(xs)))
        if g.mask[j, k]:
            continue
        col = _march(F, 1, ts, ot, xs[k], row[k])
        for n, v in enumerate(names):
            d = abs(float(col[j][n][0]) - float(g.values[v][j, k]))
            if np.isfinite(d):
                worst = max(worst, d)
    return worst


# ---------------------------------------------------------------------------
# morphisms

def _fd_weights(k: int, accuracy: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Central stencil for the k-th derivative, exact to O(h^accuracy)."""
    p = (k + 1) // 2 - 1 + accuracy // 2
    offs = np.arange(-p, p + 1)
    A = np.array([[o**m for o in offs] for m in range(len(offs))], float)
    b = np.zeros(len(offs))
    b[k] = math.factorial(k)
    return offs, np.linalg.solve(A, b)


def _fd(a: np.ndarray, k: int, h: float, axis: int, accuracy: int = 2) -> np.ndarray:
    if k == 0:
        return a
    offs, w = _fd_weights(k, accuracy)
    p = int(offs[-1])
    n = a.shape[axis]
    out = np.full(a.shape, np.nan)
    if n <= 2 * p:
        return out
    acc = np.zeros(np.take(a, range(p, n - p), axis=axis).shape)
    for o, c in zip(offs, w):
        acc = acc + c * np.take(a, range(p + o, n - p + o), axis=axis)
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(p, n - p)
    out[tuple(idx)] = acc / h**k
    return out


def _jet_on_grid(S: EqSystem, g: GridField, jc: JetCoord, accuracy: int = 2) -> np.ndarray:
    """Exact seed derivatives when a closed form is known, else finite differences."""
    var = jc.var
    if var in g.seed and any(jc.sigma):
        jets = _SeedJets.__new__(_SeedJets)
        jets.x, jets.t = sp.Symbol(S.indep[0]), sp.Symbol(S.indep[1])
        jets.seed, jets._cache = g.seed, {}
        X, T = g.mesh()
        return _broadcast(jets(jc)(X, T), g.shape)
    if var not in g.values:
        raise NumericError(f"no samples for {var}")
    a = np.asarray(g.values[var], float)
    a = _fd(a, jc.sigma[0], g.hx, 1, accuracy)
    return _fd(a, jc.sigma[1], g.ht, 0, accuracy)


def _eval_on_grid(S: EqSystem, g: GridField, e, accuracy: int = 2) -> np.ndarray:
    e = sp.sympify(e).subs({sp.Symbol(k): v for k, v in g.params.items()})
    coords = S.coords_in(e)
    x, t = sp.Symbol(S.indep[0]), sp.Symbol(S.indep[1])
    args = [x, t] + [s for s, _ in coords]
    loose = e.free_symbols - set(args)
    if loose:
        raise NumericError(f"unset symbols: {', '.join(sorted(map(str, loose)))}")
    X, T = g.mesh()
    vals = [_jet_on_grid(S, g, jc, accuracy) for _, jc in coords]
    with np.errstate(all="ignore"):
        return _broadcast(_lambdify(args, e)(X, T, *vals), g.shape)


def apply_morphism_numeric(B, g: GridField) -> GridField:
    """Target samples of a morphism applied to a source GridField."""
    S, T = B.source, B.target
    if T.n != 2:
        raise NumericError("numeric morphisms need two independent variables")
    new = {v: _eval_on_grid(S, g, B.nu[v]) for v in T.dependent}
    Xp = _eval_on_grid(S, g, B.xi[0])
    Tp = _eval_on_grid(S, g, B.xi[1])
    X, Tm = g.mesh()
    ident = np.allclose(Xp, X, equal_nan=True) and np.allclose(Tp, Tm, equal_nan=True)
    mask = np.array(g.mask)
    for a in new.values():
        mask |= ~np.isfinite(a)
    if ident:
        out = GridField(g.x.copy(), g.t.copy(), new, dict(g.params), mask)
        out.meta["image"] = "identity"
        return out
    return _resample(Xp, Tp, new, mask, g)


def _resample(Xp, Tp, vals, mask, g: GridField) -> GridField:
    """Image samples lie on curves t' = const; pchip back onto a regular x' grid."""
    nt, nx = g.shape
    tline = np.nanmean(np.where(mask, np.nan, Tp), axis=1)
    spread = np.nanmax(np.abs(np.where(mask, np.nan, Tp) - tline[:, None]))
    if spread > 1e-9:
        raise NumericError("image of a grid line is not a line t' = const")
    order = np.argsort(tline)
    tline = tline[order]
    if len(tline) > 1 and not np.all(np.diff(tline) > 0):
        raise NumericError("image t' is not strictly monotone in t")
    lo, hi = -np.inf, np.inf
    for j in range(nt):
        ok = ~mask[j]
        xp = Xp[j, ok]
        if len(xp) < 2:
            continue
        d = np.diff(xp)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise NumericError(f"x' is not strictly monotone along the line t={g.t[j]:.6g}")
        # keep targets clear of the one-sided end conditions of the interpolant
        xs_ = np.sort(xp)
        lo, hi = max(lo, xs_[min(EDGE, len(xs_) - 1)]), min(hi, xs_[max(-1 - EDGE, -len(xs_))])
    if not lo < hi:
        raise NumericError("image lines have no common x' range")
    xnew = np.linspace(lo, hi, nx)
    out = {v: np.full((nt, nx), np.nan) for v in vals}
    newmask = np.ones((nt, nx), bool)
    for jj, j in enumerate(order):
        xp = Xp[j]
        rev = xp[-1] < xp[0]
        sl = slice(None, None, -1) if rev else slice(None)
        xp, m = xp[sl], mask[j][sl]
        # valid x' interval: the longest unmasked run containing the line's start
        good = np.flatnonzero(~m)
        if len(good) < 2:
            continue
        inside = (xnew >= xp[good].min()) & (xnew <= xp[good].max())
        # a masked source cell between two targets invalidates them
        hole = np.interp(xnew, xp, m.astype(float)) > 0
        cells = inside & ~hole
        for v, a in vals.items():
            f = PchipInterpolator(xp[good], a[j][sl][good], extrapolate=False)
            out[v][jj, cells] = f(xnew[cells])
        newmask[jj] = ~cells
    res = GridField(xnew, tline, out, dict(g.params), newmask)
    res.meta["image"] = "resampled"
    return res


# ---------------------------------------------------------------------------
# residuals

def residual_field(S: EqSystem, g: GridField, accuracy: int = 2) -> np.ndarray:
    """Max over rules of |lead - rhs| per cell (nan where no stencil fits)."""
    h = _without_seed(g)
    worst = None
    for r in S.rules:
        if r.lead.var not in g.values:
            continue
        d = np.abs(_jet_on_grid(S, h, r.lead, accuracy) - _eval_on_grid(S, h, r.rhs, accuracy))
        worst = d if worst is None else np.where(np.isnan(d) | np.isnan(worst), np.nan,
                                                 np.maximum(d, worst))
    if worst is None:
        raise NumericError("no rules with sampled leads")
    return np.where(g.mask, np.nan, worst)


def _without_seed(g: GridField) -> GridField:
    h = GridField.__new__(GridField)
    h.__dict__.update(g.__dict__)
    h.seed = {}
    return h


def residual(S: EqSystem, g: GridField, accuracy: int = 2) -> float:
    """Max |lead - rhs| over interior unmasked cells, by central differences."""
    if g.shape == (1, 1):
        raise NumericError("a single point carries no derivative information")
    r = residual_field(S, g, accuracy)
    if np.all(np.isnan(r)):
        raise NumericError("grid too coarse for the stencils of these rules")
    return float(np.nanmax(r))


def oracle_error(S: EqSystem, g: GridField, oracle: dict) -> float:
    X, T = g.mesh()
    x, t = sp.Symbol(S.indep[0]), sp.Symbol(S.indep[1])
    worst = 0.0
    for v, e in oracle.items():
        if v not in g.values:
            raise NumericError(f"oracle for unknown variable {v}")
        e = sp.sympify(e).subs({sp.Symbol(k): val for k, val in g.params.items()})
        # oracles may be written with unprimed coordinates
        e = e.subs({sp.Symbol(letter(s.name)): s for s in (x, t)})
        ref = _broadcast(_lambdify([x, t], e)(X, T), g.shape)
        d = np.abs(g.values[v] - ref)
        d = d[~g.mask]
        if d.size:
            worst = max(worst, float(np.nanmax(d)))
    return worst


# ---------------------------------------------------------------------------
# problem-level pipeline

def grid_of(spec) -> Grid:
    return Grid(tuple(spec.x), tuple(spec.t), spec.hx, spec.ht, tuple(spec.origin))


def soliton(problem, grid: Grid | None = None):
    """Source GridField and image GridField for the problem's [numeric] recipe."""
    spec = problem.numeric
    if spec is None:
        raise NumericError(f"{problem.name} has no [numeric] section")
    grid = grid or grid_of(spec)
    g = integrate_covering(problem.system, spec.seed, spec.params, grid, spec.ic)
    if spec.morphism is None:
        return g, None
    B = problem.morphisms[spec.morphism]
    return g, apply_morphism_numeric(B, g)


def soliton_report(problem, grid: Grid | None = None, residual_bound: float | None = None):
    spec = problem.numeric
    rep = Report(f"numeric solution of {problem.name}")
    g, img = soliton(problem, grid)
    cc = g.meta["cross_check"]
    rep.add(Check("covering flatness cross-check", "pass" if cc < 1e-5 else "fail",
                  f"max discrepancy {cc:.2e} over 5 probes"))
    masked = int(g.mask.sum())
    if masked:
        rep.add(Check("masked cells", "pass", f"{masked} of {g.mask.size} cells past a pole"))
    if img is None:
        return rep, g, img
    B = problem.morphisms[spec.morphism]
    if spec.oracle:
        err = oracle_error(B.target, img, spec.oracle)
        rep.add(Check("oracle deviation", "pass" if err < spec.tol else "fail",
                      f"max {err:.3e}, tolerance {spec.tol:g}"))
    if img.shape == (1, 1):
        return rep, g, img
    try:
        r = residual(B.target, img)
        ok = residual_bound is None or r < residual_bound
        bound = "" if residual_bound is None else f", bound {residual_bound:g}"
        rep.add(Check("target residual", "pass" if ok else "fail", f"max {r:.3e}{bound}"))
    except NumericError as exc:
        rep.add(Check("target residual", "undecidable", str(exc)))
    return rep, g, img
