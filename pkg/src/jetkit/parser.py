"""Infix expression parser and the sectioned problem-file format."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import sympy as sp

from .covering import Covering
from .expr import KERNELS, Expr, normalize, render
from .forms import HForm
from .jet import EqSystem, JetCoord, JetError, Ranking, Rule, validate_solved_form
from .morphism import Morphism, MorphismError
from .pseudosym import FieldError, PseudoField
from .report import Report


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.msg, self.line, self.col = msg, line, col
        super().__init__(f"line {line}, column {col}: {msg}" if line else msg)


# ---------------------------------------------------------------------------
# expressions

_ALIASES = {"log": "ln", "atan": "arctan"}
_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<name>[^\W\d_]\w*'*(?:_[^\W\d_]+)?)
  | (?P<op>\*\*|[-+*/^(),@\[\]])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(text: str, line: int, col0: int) -> list[_Tok]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        kind = m.lastgroup
        if kind != "ws":
            t = m.group()
            out.append(_Tok(kind, "^" if t == "**" else t, col0 + pos))
        pos = m.end()
    out.append(_Tok("end", "", col0 + len(text)))
    return out


class Scope:
    """Declared names for parsing; jet sugar is resolved through an EqSystem."""

    def __init__(self, system: EqSystem | None = None, extra=()):
        self.system = system
        self.extra = set(extra)

    def resolve(self, name: str, sigma, line: int, col: int) -> sp.Symbol:
        S = self.system
        if S is None:
            if sigma is not None:
                raise ParseError("explicit multi-index needs a declaration context", line, col)
            return sp.pi if name == "pi" else sp.Symbol(name)
        if sigma is not None:
            if name not in S.dependent:
                raise ParseError(f"undeclared dependent variable {name!r}", line, col)
            if len(sigma) != S.n:
                raise ParseError(f"multi-index must have {S.n} entries", line, col)
            return S.symbol(name, tuple(sigma))
        if name in S.indep or name in S.params or name in self.extra:
            return sp.Symbol(name)
        jc = S.parse_coord_name(name)
        if jc is None and name == "pi":
            return sp.pi
        if jc is None:
            raise ParseError(f"undeclared symbol {name!r}", line, col)
        return S.symbol(jc.var, jc.sigma)


class _ExprParser:
    def __init__(self, text: str, scope: Scope | None, line: int, col0: int):
        self.toks = _tokenize(text, line, col0)
        self.i = 0
        self.scope = scope or Scope()
        self.line = line

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self, text: str | None = None) -> _Tok:
        t = self.toks[self.i]
        if text is not None and t.text != text:
            found = t.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", self.line, t.col)
        self.i += 1
        return t

    def parse(self) -> Expr:
        e = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ParseError(f"unexpected {t.text!r}", self.line, t.col)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            r = self.term()
            e = e + r if op == "+" else e - r
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek().text in ("*", "/"):
            t = self.take()
            r = self.unary()
            if t.text == "*":
                e = e * r
            else:
                if r == 0:
                    raise ParseError("division by zero", self.line, t.col)
                e = e / r
        return e

    def unary(self) -> Expr:
        t = self.peek()
        if t.text == "-":
            self.take()
            return -self.unary()
        if t.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().text == "^":
            t = self.take()
            ex = normalize(self.unary())
            if not ex.is_Rational:
                raise ParseError("exponent must be a rational constant (use exp for others)",
                                 self.line, t.col)
            if base == 0 and ex < 0:
                raise ParseError("division by zero", self.line, t.col)
            return sp.Pow(base, ex)
        return base

    def atom(self) -> Expr:
        t = self.take()
        if t.kind == "num":
            return sp.Rational(t.text)
        if t.text == "(":
            e = self.expr()
            self.take(")")
            return e
        if t.kind == "name":
            fname = _ALIASES.get(t.text, t.text)
            if self.peek().text == "(" and fname in KERNELS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return KERNELS[fname](arg)
            if self.peek().text == "(":
                raise ParseError(f"unknown function {t.text!r}", self.line, t.col)
            sigma = None
            if self.peek().text == "@":
                self.take("@")
                self.take("[")
                sigma = []
                while True:
                    n = self.take()
                    if n.kind != "num" or "." in n.text:
                        raise ParseError("multi-index entries must be integers", self.line, n.col)
                    sigma.append(int(n.text))
                    if self.peek().text == ",":
                        self.take()
                        continue
                    self.take("]")
                    break
            return self.scope.resolve(t.text, sigma, self.line, t.col)
        found = t.text or "end of input"
        raise ParseError(f"unexpected {found!r}", self.line, t.col)


def parse_expr(text: str, scope: Scope | EqSystem | None = None, line: int = 1, col: int = 1) -> Expr:
    if isinstance(scope, EqSystem):
        scope = Scope(scope)
    return normalize(_ExprParser(text, scope, line, col).parse())


# ---------------------------------------------------------------------------
# problem files

def parse_matrix(text: str, size: int, scope: Scope | EqSystem | None = None,
                 no: int = 1, col: int = 1) -> sp.Matrix:
    """A square matrix written [a, b; c, d]."""
    if isinstance(scope, EqSystem):
        scope = Scope(scope)
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ParseError("matrix entries must be written [a, b; c, d]", no, col)
    rows = _split_top(text[1:-1], ";")
    if len(rows) != size:
        raise ParseError(f"expected {size} rows, found {len(rows)}", no, col)
    M = []
    for row in rows:
        ents = _split_top(row, ",")
        if len(ents) != size:
            raise ParseError(f"expected {size} entries per row, found {len(ents)}", no, col)
        M.append([parse_expr(e.strip(), scope, no, col) for e in ents])
    return sp.Matrix(M)


@dataclass
class FieldSpec:
    name: str
    rank: int
    c: sp.Rational
    form: str | None
    a: dict = field(default_factory=dict)     # (row, indep) -> Expr
    b: dict = field(default_factory=dict)     # (row, var) -> Expr
    phi: dict = field(default_factory=dict)   # (row, var) -> Expr
    line: int = 0


@dataclass
class MorphismSpec:
    name: str
    target: str
    comps: dict = field(default_factory=dict)  # target name -> Expr
    line: int = 0


@dataclass
class TargetSpec:
    name: str
    indep: list = field(default_factory=list)
    local: list = field(default_factory=list)
    nonlocal_: list = field(default_factory=list)
    params: list | None = None
    copy: list = field(default_factory=list)
    distinct: list = field(default_factory=list)
    rules: list = field(default_factory=list)  # (lhs text, rhs text, line)
    line: int = 0


@dataclass
class SearchSpec:
    name: str
    c: sp.Rational | None
    form: str | None
    c_values: list = field(default_factory=list)
    monomials: list = field(default_factory=list)
    components: list = field(default_factory=list)
    line: int = 0


@dataclass
class HuntSpec:
    name: str
    invariants: str
    field_name: str | None = None
    basis: list = field(default_factory=list)
    line: int = 0


@dataclass
class NumericSpec:
    seed: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    ic: dict = field(default_factory=dict)
    x: tuple = (-2.0, 2.0)
    t: tuple = (-2.0, 2.0)
    hx: float = 1 / 64
    ht: float = 1 / 64
    origin: tuple = (0.0, 0.0)
    morphism: str | None = None
    oracle: dict = field(default_factory=dict)
    tol: float = 1e-5


@dataclass
class Assertion:
    kind: str
    args: str
    line: int
    negate: bool = False
    text: str = ""


@dataclass
class Problem:
    name: str
    title: str
    indep: tuple
    local: tuple
    nonlocal_: tuple
    params: tuple
    nonzero: tuple
    distinct: tuple
    weights: tuple | None
    equations: list
    covering: list
    base: EqSystem
    system: EqSystem
    forms: dict
    field_specs: dict
    fields: dict
    morphism_specs: dict
    morphisms: dict
    target_specs: dict
    targets: dict
    searches: dict
    hunts: dict
    numeric: NumericSpec | None
    assertions: list
    validation: Report

    @property
    def covering_obj(self) -> Covering:
        return Covering.from_system(self.system)


_SECTION = re.compile(r"^\[\s*([A-Za-z]\w*)(?:\s+([^\]\s]+))?\s*\]$")
_FORM_REF = re.compile(r"^(?:(-?\d+(?:/\d+)?)\s*\*?\s*)?([^\W\d]\w*)?$")


def _logical_lines(text: str):
    """Yield (line number, column offset, text) with comments removed and
    bracket-continued physical lines joined."""
    buf, start, depth = "", 0, 0
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not buf:
            if not line.strip():
                continue
            start = no
            buf = line
        else:
            buf += " " + line.strip()
        depth = buf.count("(") + buf.count("[") - buf.count(")") - buf.count("]")
        if depth <= 0:
            yield start, buf
            buf = ""
    if buf:
        yield start, buf


def _col(raw: str, sub: str) -> int:
    i = raw.find(sub)
    return (i if i >= 0 else 0) + 1


def _names(text: str) -> list[str]:
    return [t for t in re.split(r"[\s,]+", text.strip()) if t]


def _split_top(text: str, seps: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if depth == 0 and ch in seps:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return out


def _rational(text: str, line: int) -> sp.Rational:
    try:
        return sp.Rational(text.strip())
    except (TypeError, ValueError, sp.SympifyError):
        raise ParseError(f"expected a rational number, got {text.strip()!r}", line, 1)


def _float(text: str, line: int) -> float:
    try:
        return float(sp.Rational(text.strip())) if "e" not in text.lower() else float(text)
    except (TypeError, ValueError, sp.SympifyError):
        raise ParseError(f"expected a number, got {text.strip()!r}", line, 1)


def _form_ref(text: str, line: int):
    text = text.strip()
    if text in ("0", "none", ""):
        return sp.Integer(0), None
    m = _FORM_REF.match(text.replace(" ", ""))
    if not m or not m.group(2):
        raise ParseError(f"bad form reference {text!r}", line, 1)
    c = sp.Rational(m.group(1)) if m.group(1) else sp.Integer(1)
    return c, m.group(2)


KNOWN_ASSERTIONS = (
    "solved_form", "conservation_law", "zcr", "zcr_wedge", "zero_curvature", "riccati",
    "pseudosymmetry", "r_pseudosymmetry", "invariant", "invariants", "regular", "morphism",
    "factor", "search", "hunt", "identity", "pullback", "soliton",
)


class _ProblemParser:
    def __init__(self, text: str, seed: int = 0):
        self.text = text
        self.seed = seed
        self.sections: list[tuple[str, str | None, int, list]] = []

    def split(self):
        cur = None
        for no, line in _logical_lines(self.text):
            s = line.strip()
            m = _SECTION.match(s)
            if m and "," not in s and ";" not in s:
                cur = (m.group(1).lower(), m.group(2), no, [])
                self.sections.append(cur)
                continue
            if cur is None:
                raise ParseError("content before the first [section] header", no, 1)
            cur[3].append((no, line))

    def section(self, name: str):
        return [s for s in self.sections if s[0] == name]

    def run(self) -> Problem:
        self.split()
        known = {"problem", "vars", "params", "ranking", "equations", "covering", "forms", "fields",
                 "morphisms", "target", "search", "numeric", "assert"}
        for name, _, no, _ in self.sections:
            if name not in known:
                raise ParseError(f"unknown section [{name}]", no, 1)
        pname, title = "", ""
        for _, _, _, lines in self.section("problem"):
            for no, line in lines:
                k, _, v = line.partition("=")
                if k.strip() == "name":
                    pname = v.strip()
                elif k.strip() == "title":
                    title = v.strip()
                else:
                    raise ParseError(f"unknown key {k.strip()!r} in [problem]", no, 1)
        indep, local, nonlocal_ = [], [], []
        for _, _, _, lines in self.section("vars"):
            for no, line in lines:
                k, eq, v = line.partition("=")
                if not eq:
                    raise ParseError("expected 'key = names'", no, 1)
                k = k.strip()
                if k == "independent":
                    indep += _names(v)
                elif k == "local":
                    local += _names(v)
                elif k == "nonlocal":
                    nonlocal_ += _names(v)
                else:
                    raise ParseError(f"unknown key {k!r} in [vars]", no, 1)
        if not indep:
            raise ParseError("no independent variables declared", 1, 1)
        params, nonzero, distinct = [], [], []
        for _, _, _, lines in self.section("params"):
            for no, line in lines:
                toks = _names(line)
                if toks[0] == "distinct":
                    if len(toks) != 3:
                        raise ParseError("distinct takes two parameter names", no, 1)
                    distinct.append((toks[1], toks[2]))
                    continue
                flag = toks[-1] == "nonzero"
                for t in toks[:-1] if flag else toks:
                    params.append(t)
                    if flag:
                        nonzero.append(t)
        for a, b in distinct:
            for p in (a, b):
                if p not in params:
                    raise ParseError(f"distinct refers to undeclared parameter {p!r}", 1, 1)
        weights = None
        for _, _, _, lines in self.section("ranking"):
            for no, line in lines:
                k, _, v = line.partition("=")
                if k.strip() != "weights":
                    raise ParseError("only 'weights = ...' is allowed in [ranking]", no, 1)
                weights = tuple(int(w) for w in _names(v))
                if len(weights) != len(indep):
                    raise ParseError("one weight per independent variable", no, 1)
        try:
            shell = EqSystem(indep, local, nonlocal_, params, (), Ranking(weights), distinct, pname)
        except JetError as exc:
            raise ParseError(str(exc), 1, 1)
        eqs = self._rules("equations", shell, local)
        cov = self._rules("covering", shell, nonlocal_)
        try:
            base = EqSystem(indep, local, (), params, eqs, Ranking(weights), distinct, pname,
                            self.seed)
            system = EqSystem(indep, local, nonlocal_, params, eqs + cov, Ranking(weights), distinct,
                              pname, self.seed)
        except JetError as exc:
            raise ParseError(str(exc), 1, 1)
        for v in nonlocal_:
            dirs = sorted(r.lead.sigma.index(1) for r in cov if r.lead.var == v)
            if dirs != list(range(len(indep))):
                have = [indep[d] for d in dirs]
                raise ParseError(f"nonlocal {v!r} needs one rule per independent variable "
                                 f"(has {have})", 1, 1)
        self.system = system
        scope = Scope(system)
        forms = self._forms(scope)
        field_specs = self._field_specs(scope, forms)
        targets, target_specs = self._targets(system, eqs, cov)
        morphism_specs = self._morphism_specs(system, targets)
        searches, hunts = self._searches(scope, forms, morphism_specs, field_specs, targets)
        numeric = self._numeric(system, morphism_specs)
        asserts = self._assertions()
        fields = {n: build_field(system, s, forms) for n, s in field_specs.items()}
        morphisms = {n: build_morphism(system, s, targets) for n, s in morphism_specs.items()}
        prob = Problem(pname, title, tuple(indep), tuple(local), tuple(nonlocal_), tuple(params),
                       tuple(nonzero), tuple(distinct), weights, eqs, cov, base, system, forms,
                       field_specs, fields, morphism_specs, morphisms, target_specs, targets,
                       searches, hunts, numeric, asserts, validate_solved_form(system))
        _check_references(prob)
        return prob

    # -- pieces ------------------------------------------------------------
    def _rule(self, S: EqSystem, no: int, line: str, allowed) -> Rule:
        lhs, eq, rhs = line.partition("=")
        if not eq:
            raise ParseError("expected 'lead = rhs'", no, 1)
        lead = parse_expr(lhs.strip(), Scope(S), no, _col(line, lhs.strip()))
        jc = S.coord_of(lead) if isinstance(lead, sp.Symbol) else None
        if jc is None or jc.var not in allowed:
            raise ParseError(f"left-hand side {lhs.strip()!r} is not a coordinate of "
                             f"{'/'.join(allowed) or 'a declared variable'}", no, 1)
        return Rule(jc, parse_expr(rhs.strip(), Scope(S), no, _col(line, rhs.strip())))

    def _rules(self, section: str, S: EqSystem, allowed) -> list[Rule]:
        out = []
        for _, _, _, lines in self.section(section):
            for no, line in lines:
                r = self._rule(S, no, line, allowed)
                if any(o.lead == r.lead for o in out):
                    raise ParseError(f"duplicate rule for {S.name_of(r.lead)}", no, 1)
                out.append(r)
        return out

    def _forms(self, scope: Scope) -> dict:
        S = scope.system
        forms, cur = {}, None
        for _, _, _, lines in self.section("forms"):
            for no, line in lines:
                s = line.strip()
                if s.startswith("form "):
                    toks = s.split()
                    name = toks[1]
                    size = None
                    if len(toks) >= 4 and toks[2] == "matrix":
                        m = re.fullmatch(r"(\d+)x(\d+)", toks[3])
                        if not m or m.group(1) != m.group(2):
                            raise ParseError("matrix forms need a square KxK shape", no, 1)
                        size = int(m.group(1))
                    elif len(toks) != 2:
                        raise ParseError("expected 'form NAME' or 'form NAME matrix KxK'", no, 1)
                    if name in forms or (cur and cur[0] == name):
                        raise ParseError(f"duplicate form {name!r}", no, 1)
                    if cur:
                        forms[cur[0]] = self._close_form(cur, S)
                    cur = (name, size, {}, no)
                    continue
                key, colon, val = s.partition(":")
                if cur is None or not colon:
                    raise ParseError("expected 'form NAME' header or 'dX: component'", no, 1)
                d = key.strip()
                if not d.startswith("d") or d[1:] not in S.letters:
                    raise ParseError(f"unknown form component {d!r}", no, 1)
                i = S.letters.index(d[1:])
                col = _col(line, val.strip())
                if cur[1] is None:
                    cur[2][i] = parse_expr(val.strip(), scope, no, col)
                else:
                    cur[2][i] = self._matrix(val.strip(), cur[1], scope, no, col)
        if cur:
            forms[cur[0]] = self._close_form(cur, S)
        return forms

    def _close_form(self, cur, S: EqSystem) -> HForm:
        name, size, comps, no = cur
        zero = sp.Integer(0) if size is None else sp.zeros(size, size)
        return HForm(tuple(comps.get(i, zero) for i in range(S.n)), name)

    def _matrix(self, text: str, size: int, scope: Scope, no: int, col: int) -> sp.Matrix:
        return parse_matrix(text, size, scope, no, col)

    def _field_specs(self, scope: Scope, forms: dict) -> dict:
        S = scope.system
        specs, cur = {}, None
        for _, _, _, lines in self.section("fields"):
            for no, line in lines:
                s = line.strip()
                if s.startswith("field "):
                    m = re.fullmatch(r"field\s+(\w+)(?:\s+rank\s+(\d+))?\s+form\s+(.+)", s)
                    if not m:
                        raise ParseError("expected 'field NAME [rank R] form C*NAME'", no, 1)
                    name = m.group(1)
                    if name in specs:
                        raise ParseError(f"duplicate field {name!r}", no, 1)
                    c, fname = _form_ref(m.group(3), no)
                    if fname is not None and fname not in forms:
                        raise ParseError(f"unknown form {fname!r}", no, _col(line, fname))
                    cur = FieldSpec(name, int(m.group(2) or 1), c, fname, line=no)
                    specs[name] = cur
                    continue
                key, colon, val = s.partition(":")
                if cur is None or not colon:
                    raise ParseError("expected 'field' header or 'component: expr'", no, 1)
                key = key.strip()
                m = re.fullmatch(r"(phi\s+)?([^\W\d]\w*'*)(?:\[(\d+)\])?", key)
                if not m:
                    raise ParseError(f"bad component key {key!r}", no, 1)
                row = int(m.group(3) or 1) - 1
                if not 0 <= row < cur.rank:
                    raise ParseError(f"row {row + 1} out of range for rank {cur.rank}", no, 1)
                var = m.group(2)
                e = parse_expr(val.strip(), scope, no, _col(line, val.strip()))
                if m.group(1):
                    if var not in S.dependent:
                        raise ParseError(f"phi needs a dependent variable, got {var!r}", no, 1)
                    cur.phi[(row, var)] = e
                elif var in S.indep:
                    cur.a[(row, var)] = e
                elif var in S.dependent:
                    cur.b[(row, var)] = e
                else:
                    raise ParseError(f"unknown field component {var!r}", no, 1)
        return specs

    def _targets(self, S: EqSystem, eqs, cov):
        specs, systems = {}, {}
        for _, tname, no0, lines in self.section("target"):
            if not tname:
                raise ParseError("target sections need a name: [target NAME]", no0, 1)
            if tname in specs:
                raise ParseError(f"duplicate target {tname!r}", no0, 1)
            spec = TargetSpec(tname, line=no0)
            for no, line in lines:
                k, eq, v = line.partition("=")
                key = k.strip()
                if key in ("independent", "local", "nonlocal", "params", "copy", "distinct"):
                    vals = _names(v)
                    if key == "independent":
                        spec.indep = vals
                    elif key == "local":
                        spec.local = vals
                    elif key == "nonlocal":
                        spec.nonlocal_ = vals
                    elif key == "params":
                        spec.params = vals
                    elif key == "copy":
                        spec.copy = vals
                    else:
                        if len(vals) != 2:
                            raise ParseError("distinct takes two names", no, 1)
                        spec.distinct.append(tuple(vals))
                elif eq:
                    spec.rules.append((k.strip(), v.strip(), no, line))
                else:
                    raise ParseError("expected 'key = value' or a rule", no, 1)
            specs[tname] = spec
            systems[tname] = build_target(spec, S, eqs, cov)
        return systems, specs

    def _morphism_specs(self, S: EqSystem, targets: dict) -> dict:
        specs, cur = {}, None
        scope = Scope(S)
        for _, _, _, lines in self.section("morphisms"):
            for no, line in lines:
                s = line.strip()
                m = re.fullmatch(r"morphism\s+(\w+)\s+(?:target|->)\s+(?:target\.)?(\w+)", s)
                if m:
                    name, tname = m.group(1), m.group(2)
                    if name in specs:
                        raise ParseError(f"duplicate morphism {name!r}", no, 1)
                    if tname not in targets:
                        raise ParseError(f"unknown target {tname!r}", no, _col(line, tname))
                    cur = MorphismSpec(name, tname, line=no)
                    specs[name] = cur
                    continue
                lhs, eq, rhs = s.partition("=")
                if cur is None or not eq:
                    raise ParseError("expected 'morphism NAME target T' or \"name' = expr\"", no, 1)
                T = targets[cur.target]
                key = lhs.strip()
                if key not in T.indep and key not in T.dependent:
                    raise ParseError(f"{key!r} is not a variable of target {cur.target}", no, 1)
                if key in cur.comps:
                    raise ParseError(f"duplicate component {key!r}", no, 1)
                cur.comps[key] = parse_expr(rhs.strip(), scope, no, _col(line, rhs.strip()))
        for spec in specs.values():
            T = targets[spec.target]
            missing = [v for v in T.dependent if v not in spec.comps]
            if missing:
                raise ParseError(f"morphism {spec.name} lacks components for {missing}", spec.line, 1)
        return specs

    def _searches(self, scope, forms, morphism_specs, field_specs, targets):
        searches, hunts, cur = {}, {}, None
        for _, _, _, lines in self.section("search"):
            for no, line in lines:
                s = line.strip()
                m = re.fullmatch(r"search\s+(\w+)\s+form\s+(.+)", s)
                if m:
                    c, fname = _form_ref(m.group(2), no)
                    if fname is not None and fname not in forms:
                        raise ParseError(f"unknown form {fname!r}", no, 1)
                    cur = SearchSpec(m.group(1), c, fname, line=no)
                    searches[cur.name] = cur
                    continue
                m = re.fullmatch(r"hunt\s+(\w+)\s+invariants\s+(\w+)(?:\s+field\s+(\w+))?", s)
                if m:
                    if m.group(2) not in morphism_specs:
                        raise ParseError(f"unknown invariant morphism {m.group(2)!r}", no, 1)
                    if m.group(3) and m.group(3) not in field_specs:
                        raise ParseError(f"unknown field {m.group(3)!r}", no, 1)
                    cur = HuntSpec(m.group(1), m.group(2), m.group(3), line=no)
                    hunts[cur.name] = cur
                    continue
                key, colon, val = s.partition(":")
                if cur is None or not colon:
                    raise ParseError("expected 'search'/'hunt' header or 'key: value'", no, 1)
                key = key.strip()
                col = _col(line, val.strip())
                if isinstance(cur, SearchSpec) and key == "c":
                    cur.c_values = [_rational(v, no) for v in _split_top(val, ",")]
                elif isinstance(cur, SearchSpec) and key == "monomials":
                    cur.monomials = [parse_expr(v.strip(), scope, no, col) for v in _split_top(val, ",")]
                elif isinstance(cur, SearchSpec) and key == "components":
                    cur.components = _names(val)
                    S = scope.system
                    for v in cur.components:
                        if v not in S.indep and v not in S.dependent:
                            raise ParseError(f"unknown component {v!r}", no, 1)
                elif isinstance(cur, HuntSpec) and key == "basis":
                    T = targets[morphism_specs[cur.invariants].target]
                    cur.basis = [parse_expr(v.strip(), Scope(T), no, col) for v in _split_top(val, ",")]
                else:
                    raise ParseError(f"unknown key {key!r}", no, 1)
        return searches, hunts

    def _numeric(self, S: EqSystem, morphism_specs) -> NumericSpec | None:
        secs = self.section("numeric")
        if not secs:
            return None
        spec = NumericSpec()
        indep_scope = EqSystem(S.indep, (), (), S.params)
        for _, _, _, lines in secs:
            for no, line in lines:
                key, colon, val = line.strip().partition(":")
                if not colon:
                    raise ParseError("expected 'key: value' in [numeric]", no, 1)
                toks = key.split()
                col = _col(line, val.strip())
                if toks[0] == "seed" and len(toks) == 2:
                    if toks[1] not in S.local:
                        raise ParseError(f"seed for unknown local variable {toks[1]!r}", no, 1)
                    spec.seed[toks[1]] = parse_expr(val.strip(), Scope(indep_scope), no, col)
                elif toks[0] == "param" and len(toks) == 2:
                    if toks[1] not in S.params:
                        raise ParseError(f"unknown parameter {toks[1]!r}", no, 1)
                    spec.params[toks[1]] = _float(val, no)
                elif toks[0] == "ic" and len(toks) == 2:
                    if toks[1] not in S.nonlocal_:
                        raise ParseError(f"initial value for unknown nonlocal {toks[1]!r}", no, 1)
                    spec.ic[toks[1]] = _float(val, no)
                elif toks[0] == "oracle" and len(toks) == 2:
                    spec.oracle[toks[1]] = parse_expr(val.strip(), Scope(indep_scope), no, col)
                elif toks == ["x"] or toks == ["t"] or toks == ["origin"]:
                    parts = [_float(v, no) for v in _split_top(val, ",")]
                    if len(parts) != 2:
                        raise ParseError("expected two numbers", no, 1)
                    setattr(spec, toks[0], tuple(parts))
                elif toks == ["h"]:
                    spec.hx = spec.ht = _float(val, no)
                elif toks in (["hx"], ["ht"]):
                    setattr(spec, toks[0], _float(val, no))
                elif toks == ["tol"]:
                    spec.tol = _float(val, no)
                elif toks == ["morphism"]:
                    if val.strip() not in morphism_specs:
                        raise ParseError(f"unknown morphism {val.strip()!r}", no, 1)
                    spec.morphism = val.strip()
                else:
                    raise ParseError(f"unknown key {key.strip()!r} in [numeric]", no, 1)
        return spec

    def _assertions(self) -> list[Assertion]:
        out = []
        for _, _, _, lines in self.section("assert"):
            for no, line in lines:
                s = line.strip()
                neg = False
                if s.startswith("not "):
                    neg, s = True, s[4:].strip()
                m = re.match(r"([a-z_]+)\s*:?\s*(.*)$", s)
                if not m or m.group(1) not in KNOWN_ASSERTIONS:
                    raise ParseError(f"unknown assertion {s.split()[0] if s else ''!r}", no, 1)
                out.append(Assertion(m.group(1), m.group(2).strip(), no, neg, line.strip()))
        return out


def build_target(spec: TargetSpec, S: EqSystem, eqs, cov) -> EqSystem:
    indep = spec.indep or [v + "'" for v in S.indep]
    local, nonlocal_ = list(spec.local), list(spec.nonlocal_)
    params = list(S.params) if spec.params is None else list(spec.params)
    copied = []
    for what in spec.copy:
        if what not in ("equations", "covering"):
            raise ParseError(f"copy accepts 'equations' or 'covering', not {what!r}", spec.line, 1)
        src = eqs if what == "equations" else cov
        pool = S.local if what == "equations" else S.nonlocal_
        for v in pool:
            (local if what == "equations" else nonlocal_).append(v + "'")
        copied.append(src)
    try:
        shell = EqSystem(indep, local, nonlocal_, params, (), S.ranking, spec.distinct, spec.name)
    except JetError as exc:
        raise ParseError(str(exc), spec.line, 1)
    rules = []
    rename = {sp.Symbol(v): sp.Symbol(v + "'") for v in S.indep}
    for src in copied:
        for r in src:
            subs = dict(rename)
            for s in r.rhs.free_symbols:
                jc = S.coord_of(s)
                if jc is not None:
                    subs[s] = shell.symbol(jc.var + "'", jc.sigma)
            rules.append(Rule(JetCoord(r.lead.var + "'", r.lead.sigma), r.rhs.xreplace(subs)))
    scope = Scope(shell)
    for lhs, rhs, no, line in spec.rules:
        lead = parse_expr(lhs, scope, no, _col(line, lhs))
        jc = shell.coord_of(lead) if isinstance(lead, sp.Symbol) else None
        if jc is None:
            raise ParseError(f"left-hand side {lhs!r} is not a target coordinate", no, 1)
        if any(r.lead == jc for r in rules):
            raise ParseError(f"duplicate rule for {lhs}", no, 1)
        rules.append(Rule(jc, parse_expr(rhs, scope, no, _col(line, rhs))))
    try:
        return EqSystem(indep, local, nonlocal_, params, rules, S.ranking, spec.distinct, spec.name,
                        S.seed)
    except JetError as exc:
        raise ParseError(str(exc), spec.line, 1)


def build_field(S: EqSystem, spec: FieldSpec, forms: dict) -> PseudoField:
    if spec.form is None:
        U = HForm.zero(S.n, spec.rank)
    else:
        U = forms[spec.form].scaled(spec.c)
    if U.size != spec.rank:
        raise ParseError(f"field {spec.name}: rank {spec.rank} does not match form size {U.size}",
                         spec.line, 1)
    a = [[spec.a.get((h, v), 0) for v in S.indep] for h in range(spec.rank)]
    b = [[spec.b.get((h, v), 0) for v in S.dependent] for h in range(spec.rank)]
    phi = [[spec.phi.get((h, v)) for v in S.dependent] for h in range(spec.rank)]
    try:
        return PseudoField.from_components(S, a, b, U, spec.name, spec.c, spec.form or "0", phi)
    except FieldError as exc:
        raise ParseError(f"field {spec.name}: {exc}", spec.line, 1)


def build_morphism(S: EqSystem, spec: MorphismSpec, targets: dict) -> Morphism:
    T = targets[spec.target]
    xi = [spec.comps.get(v, sp.Symbol(S.indep[i])) for i, v in enumerate(T.indep)]
    nu = {v: spec.comps[v] for v in T.dependent}
    try:
        return Morphism(S, T, xi, nu, spec.name)
    except MorphismError as exc:
        raise ParseError(f"morphism {spec.name}: {exc}", spec.line, 1)


def _check_references(p: Problem):
    for a in p.assertions:
        names = re.findall(r"[A-Za-z_]\w*", a.args.split(":")[0])
        need = {
            "conservation_law": ("forms",), "zcr": ("forms",), "zcr_wedge": ("forms",),
            "zero_curvature": ("forms",), "riccati": ("forms",),
            "pseudosymmetry": ("fields",), "r_pseudosymmetry": ("fields",),
            "invariant": ("fields",), "invariants": ("fields", "morphisms"),
            "regular": ("morphisms",), "morphism": ("morphisms",),
            "factor": ("fields", "morphisms"), "search": ("searches",), "hunt": ("hunts",),
            "pullback": ("morphisms",),
        }.get(a.kind, ())
        for kind, name in zip(need, names):
            if name not in getattr(p, kind):
                raise ParseError(f"assertion refers to unknown {kind[:-1]} {name!r}", a.line, 1)
        for t in re.findall(r"target\.(\w+)", a.args):
            if t not in p.targets:
                raise ParseError(f"assertion refers to unknown target {t!r}", a.line, 1)


def parse_problem(text: str, seed: int = 0) -> Problem:
    return _ProblemParser(text, seed).run()


def load_problem(path, seed: int = 0) -> Problem:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read(), seed)


# ---------------------------------------------------------------------------
# rendering

def _render_matrix(M) -> str:
    return "[" + "; ".join(", ".join(render(M[i, j]) for j in range(M.shape[1]))
                           for i in range(M.shape[0])) + "]"


def _render_c(c, name) -> str:
    if name is None:
        return "0"
    return name if c == 1 else f"{c}*{name}"


def render_problem(p: Problem) -> str:
    S = p.system
    out = []
    if p.name or p.title:
        out.append("[problem]")
        if p.name:
            out.append(f"name = {p.name}")
        if p.title:
            out.append(f"title = {p.title}")
        out.append("")
    out += ["[vars]", f"independent = {' '.join(p.indep)}"]
    if p.local:
        out.append(f"local = {' '.join(p.local)}")
    if p.nonlocal_:
        out.append(f"nonlocal = {' '.join(p.nonlocal_)}")
    out.append("")
    if p.params:
        out.append("[params]")
        for q in p.params:
            out.append(q + (" nonzero" if q in p.nonzero else ""))
        for a, b in p.distinct:
            out.append(f"distinct {a} {b}")
        out.append("")
    if p.weights:
        out += ["[ranking]", "weights = " + " ".join(map(str, p.weights)), ""]
    for sec, rules in (("equations", p.equations), ("covering", p.covering)):
        if rules:
            out.append(f"[{sec}]")
            out += [f"{S.name_of(r.lead)} = {render(r.rhs)}" for r in rules]
            out.append("")
    if p.forms:
        out.append("[forms]")
        for f in p.forms.values():
            head = f"form {f.name}" + (f" matrix {f.size}x{f.size}" if f.is_matrix else "")
            out.append(head)
            for l, comp in zip(S.letters, f.components):
                txt = _render_matrix(comp) if f.is_matrix else render(comp)
                out.append(f"  d{l}: {txt}")
        out.append("")
    if p.field_specs:
        out.append("[fields]")
        for f in p.field_specs.values():
            rank = f" rank {f.rank}" if f.rank > 1 else ""
            out.append(f"field {f.name}{rank} form {_render_c(f.c, f.form)}")
            for kind, table in (("", f.a), ("", f.b), ("phi ", f.phi)):
                for (h, v), e in table.items():
                    row = f"[{h + 1}]" if f.rank > 1 else ""
                    out.append(f"  {kind}{v}{row}: {render(e)}")
        out.append("")
    for t in p.target_specs.values():
        T = p.targets[t.name]
        out.append(f"[target {t.name}]")
        out.append(f"independent = {' '.join(T.indep)}")
        if T.local:
            out.append(f"local = {' '.join(T.local)}")
        if T.nonlocal_:
            out.append(f"nonlocal = {' '.join(T.nonlocal_)}")
        out.append(f"params = {' '.join(T.params)}")
        for a, b in T.distinct:
            out.append(f"distinct = {a} {b}")
        out += [f"{T.name_of(r.lead)} = {render(r.rhs)}" for r in T.rules]
        out.append("")
    if p.morphism_specs:
        out.append("[morphisms]")
        for m in p.morphism_specs.values():
            out.append(f"morphism {m.name} target {m.target}")
            out += [f"  {k} = {render(v)}" for k, v in m.comps.items()]
        out.append("")
    if p.searches or p.hunts:
        out.append("[search]")
        for s in p.searches.values():
            out.append(f"search {s.name} form {_render_c(s.c, s.form)}")
            if s.c_values:
                out.append("  c: " + ", ".join(str(c) for c in s.c_values))
            if s.monomials:
                out.append("  monomials: " + ", ".join(render(m) for m in s.monomials))
            if s.components:
                out.append("  components: " + " ".join(s.components))
        for h in p.hunts.values():
            fld = f" field {h.field_name}" if h.field_name else ""
            out.append(f"hunt {h.name} invariants {h.invariants}{fld}")
            out.append("  basis: " + ", ".join(render(m) for m in h.basis))
        out.append("")
    if p.numeric:
        n = p.numeric
        out.append("[numeric]")
        out += [f"seed {k}: {render(v)}" for k, v in n.seed.items()]
        out += [f"param {k}: {v!r}" for k, v in n.params.items()]
        out += [f"ic {k}: {v!r}" for k, v in n.ic.items()]
        out += [f"x: {n.x[0]!r}, {n.x[1]!r}", f"t: {n.t[0]!r}, {n.t[1]!r}",
                f"hx: {n.hx!r}", f"ht: {n.ht!r}", f"origin: {n.origin[0]!r}, {n.origin[1]!r}",
                f"tol: {n.tol!r}"]
        if n.morphism:
            out.append(f"morphism: {n.morphism}")
        out += [f"oracle {k}: {render(v)}" for k, v in n.oracle.items()]
        out.append("")
    if p.assertions:
        out.append("[assert]")
        out += [a.text for a in p.assertions]
        out.append("")
    return "\n".join(out)


def render_any(x) -> str:
    if isinstance(x, Problem):
        return render_problem(x)
    if isinstance(x, HForm):
        if x.is_matrix:
            return "\n".join(f"d{i}: {_render_matrix(c)}" for i, c in enumerate(x.components))
        return "\n".join(f"d{i}: {render(c)}" for i, c in enumerate(x.components))
    return render(x)
