"""Symbolic expressions over jet coordinates, parameters and a fixed kernel set.

Expressions are sympy objects.  This module adds the canonical form used
throughout the package (a rational function in symbols and kernel
applications, with the side relations sin^2 + cos^2 = 1, exp-exponent
merging, ln(exp(w)) = w, arctan multiple-angle expansion and sqrt(p)^2 = p)
and a zero test with a seeded high-precision numeric fallback.
"""
from __future__ import annotations

import hashlib
import math
import os
import random
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce as _fold

import mpmath
import sympy as sp

Expr = sp.Expr

KERNELS = {
    "exp": sp.exp,
    "ln": sp.log,
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "arctan": sp.atan,
    "sqrt": sp.sqrt,
}
_KERNEL_TYPES = (sp.exp, sp.log, sp.sin, sp.cos, sp.tan, sp.atan)

K_SAMPLES = 24
MAX_DRAWS = 200
ZERO_THRESHOLD = mpmath.mpf("1e-30")


class ExprError(ValueError):
    pass


def precision() -> int:
    """Digits used by the numeric oracle (env JETKIT_PRECISION, default 50)."""
    try:
        return max(50, int(os.environ.get("JETKIT_PRECISION", "50")))
    except ValueError:
        return 50


def sym(name: str) -> sp.Symbol:
    return sp.Symbol(name)


def num(value) -> sp.Rational:
    if isinstance(value, float):
        raise ExprError("floating point literals are not allowed inside expressions")
    return sp.Rational(value)


def make(kind: str, *children) -> Expr:
    """Build a node and return it normalized."""
    kids = [sp.sympify(c) if not isinstance(c, str) else sp.Symbol(c) for c in children]
    if kind == "num":
        (a,) = children
        if isinstance(a, tuple):
            p, q = a
            if q == 0:
                raise ExprError("zero denominator literal")
            return sp.Rational(p, q)
        return num(a)
    if kind == "sym":
        return sp.Symbol(children[0])
    if kind == "sum":
        return normalize(sp.Add(*kids))
    if kind == "prod":
        return normalize(sp.Mul(*kids))
    if kind == "pow":
        base, ex = kids
        if not ex.is_Rational:
            raise ExprError("exponents must be rational")
        if base == 0 and ex < 0:
            raise ExprError("zero denominator literal")
        return normalize(sp.Pow(base, ex))
    if kind in KERNELS:
        if len(kids) != 1:
            raise ExprError(f"kernel {kind} takes one argument")
        return normalize(KERNELS[kind](kids[0]))
    raise ExprError(f"unknown kernel or node kind {kind!r}")


def diff(e: Expr, s: sp.Symbol) -> Expr:
    return normalize(sp.diff(sp.sympify(e), s))


def substitute(e: Expr, bindings: dict) -> Expr:
    e = sp.sympify(e)
    if not bindings:
        return normalize(e)
    b = {sp.Symbol(k) if isinstance(k, str) else k: sp.sympify(v) for k, v in bindings.items()}
    return normalize(e.xreplace(b))


# ---------------------------------------------------------------------------
# canonical form

def _rewrite(e: Expr) -> Expr:
    """Bottom-up kernel rewrites applied before the rational canonicalization."""
    if e.is_Atom:
        return e
    args = [_rewrite(a) for a in e.args]
    if isinstance(e, sp.log):
        (w,) = args
        if isinstance(w, sp.exp):
            return w.args[0]
        return sp.log(w)
    if isinstance(e, (sp.sin, sp.cos)):
        (w,) = args
        w = sp.expand(w)
        if _trig_expandable(w):
            out = sp.expand_trig(type(e)(w))
            if out != type(e)(w):
                return _rewrite(out)
        return type(e)(w)
    if isinstance(e, sp.exp):
        return sp.exp(sp.expand(args[0]))
    if isinstance(e, (sp.tan, sp.atan)):
        return type(e)(args[0])
    return e.func(*args)


def _trig_expandable(w: Expr) -> bool:
    if w.is_Add:
        return True
    c, rest = w.as_coeff_Mul()
    if c.is_Integer and abs(c) > 1:
        return True
    return isinstance(rest, sp.atan)


class _Encoder:
    """Maps kernel applications and radicals to placeholder symbols."""

    def __init__(self):
        self.back: dict[sp.Symbol, Expr] = {}
        self.fwd: dict[Expr, sp.Symbol] = {}
        self.exp_unit: dict[Expr, sp.Rational] = {}
        self.trig_pairs: list[tuple[sp.Symbol, sp.Symbol]] = []
        self.radicals: list[tuple[sp.Symbol, int, Expr]] = []
        self._n = 0

    def _fresh(self, target: Expr) -> sp.Symbol:
        if target in self.fwd:
            return self.fwd[target]
        s = sp.Symbol(f"\x00{render(target)}")
        self.fwd[target] = s
        self.back[s] = target
        return s

    def scan_exp(self, e: Expr):
        for node in sp.preorder_traversal(e):
            if isinstance(node, sp.exp):
                for term, coeff in _exp_terms(node.args[0]):
                    g = self.exp_unit.get(term)
                    self.exp_unit[term] = abs(coeff) if g is None else _rat_gcd(g, coeff)

    def encode(self, e: Expr) -> Expr:
        if e.is_Atom:
            return e
        if isinstance(e, sp.exp):
            out = sp.Integer(1)
            for term, coeff in _exp_terms(e.args[0]):
                unit = self.exp_unit[term]
                ph = self._fresh(sp.exp(unit * term))
                out *= ph ** int(coeff / unit)
            return out
        if isinstance(e, (sp.sin, sp.cos)):
            w = self._encoded_arg(e.args[0])
            s = self._fresh(sp.sin(w))
            c = self._fresh(sp.cos(w))
            if (c, s) not in self.trig_pairs:
                self.trig_pairs.append((c, s))
            return s if isinstance(e, sp.sin) else c
        if isinstance(e, (sp.tan, sp.atan, sp.log)):
            return self._fresh(type(e)(self._encoded_arg(e.args[0])))
        if e.is_Pow:
            b, x = e.args
            if x.is_Rational and not x.is_Integer:
                nb = normalize(b)
                q = int(x.q)
                root = self._fresh(sp.Pow(nb, sp.Rational(1, q)))
                if not any(r[0] == root for r in self.radicals):
                    self.radicals.append((root, q, nb))
                return root ** int(x.p)
            return self.encode(b) ** x
        return e.func(*[self.encode(a) for a in e.args])

    def _encoded_arg(self, w: Expr) -> Expr:
        return normalize(w)

    def decode(self, e: Expr) -> Expr:
        if not self.back:
            return e
        return e.xreplace(self.back)


def _rat_gcd(a, b) -> sp.Rational:
    a, b = Fraction(int(sp.Rational(a).p), int(sp.Rational(a).q)), Fraction(
        int(sp.Rational(b).p), int(sp.Rational(b).q))
    num_ = math.gcd(a.numerator, b.numerator)
    den = a.denominator * b.denominator // math.gcd(a.denominator, b.denominator)
    return sp.Rational(num_, den)


def _exp_terms(arg: Expr):
    """Split an exp argument into (monomial, rational coefficient) pairs."""
    arg = sp.expand(arg)
    out = []
    for term, coeff in arg.as_coefficients_dict().items():
        c = sp.Rational(coeff) if sp.sympify(coeff).is_Rational else None
        if c is None:
            out.append((term * coeff, sp.Integer(1)))
        else:
            out.append((term, c))
    return sorted(out, key=lambda p: sp.default_sort_key(p[0]))


def _reduce_relations(poly: Expr, enc: _Encoder) -> Expr:
    if not enc.trig_pairs and not enc.radicals:
        return poly
    poly = sp.expand(poly)
    for c, s in enc.trig_pairs:
        if poly.has(c):
            poly = sp.expand(sp.rem(poly, c**2 + s**2 - 1, c))
    for root, q, base in enc.radicals:
        if poly.has(root):
            pb, qb = sp.fraction(base)
            if qb == 1:
                poly = sp.expand(sp.rem(poly, root**q - pb, root))
    return poly


_NORM_CACHE: dict = {}
_NORM_LOCK = threading.Lock()
_NORM_CACHE_MAX = 200_000


def normalize(e) -> Expr:
    """Canonical rational form over symbols and kernels (idempotent)."""
    e = sp.sympify(e)
    if e.is_Atom:
        return e
    with _NORM_LOCK:
        hit = _NORM_CACHE.get(e)
    if hit is not None:
        return hit
    out = _normalize(e)
    with _NORM_LOCK:
        if len(_NORM_CACHE) > _NORM_CACHE_MAX:
            _NORM_CACHE.clear()
        _NORM_CACHE[e] = out
        _NORM_CACHE.setdefault(out, out)
    return out


def _normalize(e: Expr) -> Expr:
    e = _rewrite(e)
    enc = _Encoder()
    enc.scan_exp(e)
    coded = enc.encode(e)
    coded = sp.cancel(sp.together(coded))
    p, q = sp.fraction(coded)
    p2, q2 = _reduce_relations(p, enc), _reduce_relations(q, enc)
    if (p2, q2) != (p, q):
        coded = sp.cancel(p2 / q2)
        p, q = sp.fraction(coded)
    p, q = sp.expand(p), sp.expand(q)
    if p == 0:
        return sp.Integer(0)
    p, q = _fix_sign(p, q)
    return enc.decode(p) / enc.decode(q)


def encoded_fraction(e) -> tuple[Expr, Expr, "_Encoder"]:
    """Numerator and denominator of the canonical form with kernels and radicals
    replaced by placeholder symbols, so that coefficients can be read off."""
    e = _rewrite(normalize(e))
    enc = _Encoder()
    enc.scan_exp(e)
    p, q = sp.fraction(sp.cancel(sp.together(enc.encode(e))))
    return _reduce_relations(sp.expand(p), enc), sp.expand(q), enc


def _fix_sign(p: Expr, q: Expr):
    if q.is_Number:
        return sp.expand(p / q), sp.Integer(1)
    lead = sp.Poly(q, *sorted(q.free_symbols, key=sp.default_sort_key)).LC()
    if lead < 0:
        return -p, -q
    return p, q


# ---------------------------------------------------------------------------
# zero test

@dataclass(frozen=True)
class SamplingDomain:
    """Constraints for the numeric oracle: pairs of symbols that must differ."""
    distinct: tuple = ()
    seed: int = 0


@dataclass
class ZeroVerdict:
    zero: bool
    method: str  # symbolic | probabilistic | numeric-witness | canonical | undecidable
    residual: Expr = field(default=sp.Integer(0))

    @property
    def verdict(self) -> str:
        if self.method == "undecidable":
            return "undecidable"
        if not self.zero:
            return "fail"
        return "pass" if self.method == "symbolic" else "probabilistic-pass"

    def __bool__(self):
        return self.zero


def _has_kernels(e: Expr) -> bool:
    for node in sp.preorder_traversal(e):
        if isinstance(node, _KERNEL_TYPES):
            return True
        if node.is_Pow and node.args[1].is_Rational and not node.args[1].is_Integer:
            return True
    return False


def _draw(rng: random.Random) -> Fraction:
    while True:
        a, b = rng.randint(1, 99), rng.randint(1, 99)
        v = Fraction(a, b)
        if Fraction(1, 4) <= v <= 4:
            return v if rng.random() < 0.5 else -v


def _rng_for(e: Expr, seed: int) -> random.Random:
    h = hashlib.sha256(f"{seed}:{sp.srepr(e)}".encode()).hexdigest()
    return random.Random(int(h[:16], 16))


def evaluate(e: Expr, assignment: dict, digits: int | None = None):
    """Evaluate at an assignment {symbol or name: rational/float} with mpmath."""
    e = sp.sympify(e)
    digits = digits or precision()
    vals = {}
    for k, v in assignment.items():
        s = sp.Symbol(k) if isinstance(k, str) else k
        vals[s] = v
    syms = sorted(e.free_symbols, key=sp.default_sort_key)
    missing = [s for s in syms if s not in vals]
    if missing:
        raise ExprError(f"assignment is missing {missing}")
    with mpmath.workdps(digits + 10):
        f = sp.lambdify(syms, e, modules="mpmath")
        args = [mpmath.mpf(v.numerator) / v.denominator if isinstance(v, Fraction) else mpmath.mpf(v)
                for v in (vals[s] for s in syms)]
        return f(*args)


def _lambdified(e: Expr, syms):
    return sp.lambdify(syms, e, modules="mpmath")


def is_zero(e, domain: SamplingDomain | None = None) -> ZeroVerdict:
    domain = domain or SamplingDomain()
    n = normalize(e)
    if n == 0:
        return ZeroVerdict(True, "symbolic", n)
    if not n.free_symbols or not _has_kernels(n):
        return ZeroVerdict(False, "canonical", n)
    num_, den = sp.fraction(n)
    syms = sorted(n.free_symbols, key=sp.default_sort_key)
    digits = precision()
    rng = _rng_for(n, domain.seed)
    pairs = [(sp.Symbol(a) if isinstance(a, str) else a, sp.Symbol(b) if isinstance(b, str) else b)
             for a, b in domain.distinct]
    good = 0
    with mpmath.workdps(digits):
        fn, fd = _lambdified(num_, syms), _lambdified(den, syms)
        for _ in range(MAX_DRAWS):
            point = {s: _draw(rng) for s in syms}
            if any(a in point and b in point and abs(point[a] - point[b]) < Fraction(1, 1000)
                   for a, b in pairs):
                continue
            args = [mpmath.mpf(v.numerator) / v.denominator for v in (point[s] for s in syms)]
            try:
                d = fd(*args)
                if not mpmath.isfinite(d) or abs(d) < mpmath.mpf("1e-3"):
                    continue
                v = fn(*args) / d
                if not mpmath.isfinite(v):
                    continue
            except (ZeroDivisionError, ValueError, OverflowError, TypeError):
                continue
            if abs(v) > ZERO_THRESHOLD:
                return ZeroVerdict(False, "numeric-witness", n)
            good += 1
            if good >= K_SAMPLES:
                return ZeroVerdict(True, "probabilistic", n)
    return ZeroVerdict(False, "undecidable", n)


# ---------------------------------------------------------------------------
# rendering

_FN_NAMES = {"log": "ln", "atan": "arctan"}


class _Printer(sp.printing.str.StrPrinter):
    def _print_Pow(self, expr, rational=False):
        b, e = expr.args
        if e == sp.Rational(1, 2):
            return f"sqrt({self._print(b)})"
        if e == -1:
            return f"1/{self.parenthesize(b, sp.printing.precedence.PRECEDENCE['Pow'])}"
        bs = self.parenthesize(b, sp.printing.precedence.PRECEDENCE["Pow"], strict=True)
        if e.is_Rational and not e.is_Integer:
            es = f"({e.p}/{e.q})"
        elif e.is_Number and e < 0:
            es = f"({self._print(e)})"
        else:
            es = self.parenthesize(e, sp.printing.precedence.PRECEDENCE["Pow"], strict=True)
        return f"{bs}^{es}"

    def _print_Function(self, expr):
        name = _FN_NAMES.get(expr.func.__name__, expr.func.__name__)
        return f"{name}({', '.join(self._print(a) for a in expr.args)})"

    _print_log = _print_Function
    _print_atan = _print_Function
    _print_exp = _print_Function
    _print_sin = _print_Function
    _print_cos = _print_Function
    _print_tan = _print_Function

    def _print_Exp1(self, expr):
        return "exp(1)"

    def _print_Rational(self, expr):
        return f"{expr.p}/{expr.q}"

    def _print_Symbol(self, expr):
        return expr.name


_PRINTER = _Printer({"order": "lex"})


def render(e) -> str:
    return _PRINTER.doprint(sp.sympify(e))


def free_names(e) -> set[str]:
    return {s.name for s in sp.sympify(e).free_symbols}


def fold_sum(items) -> Expr:
    return _fold(lambda a, b: a + b, items, sp.Integer(0))
