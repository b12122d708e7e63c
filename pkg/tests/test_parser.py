import pytest
import sympy as sp

from conftest import CORPUS_NAMES, corpus
from jetkit.cli import corpus_dir
from jetkit.expr import normalize, render
from jetkit.jet import EqSystem, JetCoord
from jetkit.parser import ParseError, parse_expr, parse_matrix, parse_problem, render_problem

S2 = EqSystem(("x", "t"), ("z",), ("rho",), ("lambda",))

MINI = """
[vars]
independent = x t
local = z
{extra}
[equations]
{eqs}
{tail}
"""


def mini(eqs="z_t = z_xxx", extra="", tail=""):
    return MINI.format(eqs=eqs, extra=extra, tail=tail)


class TestExpressions:
    def test_kdv_riccati_rhs(self):
        e = parse_expr("-rho^2 - z - lambda", S2)
        rho, z, lam = sp.symbols("rho z lambda")
        assert normalize(e - (-rho**2 - z - lam)) == 0

    def test_jet_coordinate(self):
        e = parse_expr("z_xt - sin(z)", S2)
        coords = dict((c, s) for s, c in S2.coords_in(e))
        assert JetCoord("z", (1, 1)) in coords

    def test_bare_symbol(self):
        assert parse_expr("x") == sp.Symbol("x")

    def test_power_binds_tighter_than_unary_minus(self):
        assert parse_expr("-2^2") == -4

    def test_power_right_associative(self):
        assert parse_expr("2^3^2") == 512

    def test_explicit_multi_index(self):
        assert parse_expr("z@[2,1]", S2) == parse_expr("z_xxt", S2)

    def test_aliases(self):
        assert parse_expr("atan(x) + log(x)") == sp.atan(sp.Symbol("x")) + sp.log(sp.Symbol("x"))

    def test_undeclared(self):
        with pytest.raises(ParseError):
            parse_expr("w + 1", S2)

    @pytest.mark.parametrize("bad,col", [("z + ", 5), ("(z", 3), ("z $ 2", 3)])
    def test_error_positions(self, bad, col):
        with pytest.raises(ParseError) as ei:
            parse_expr(bad, S2)
        assert ei.value.line == 1 and ei.value.col >= 1

    def test_render_canonical_order(self):
        assert render(parse_expr("z_x*z", S2)) == "z*z_x"

    def test_matrix(self):
        M = parse_matrix("[0, 1; -lambda - z, 0]", 2, S2)
        assert M.shape == (2, 2) and M[0, 1] == 1

    def test_matrix_shape_error(self):
        with pytest.raises(ParseError):
            parse_matrix("[0, 1, 2; 1, 0]", 2, S2)


class TestProblems:
    def test_kdv_file(self):
        p = corpus("kdv_abt")
        assert p.local == ("z",) and p.nonlocal_ == ("rho",)
        leads = {p.system.name_of(r.lead) for r in p.system.rules}
        assert leads == {"z_xxx", "rho_x", "rho_t"}

    def test_free_jet_space(self):
        p = parse_problem(mini(eqs=""))
        e = parse_expr("z_xxt + z", p.system)
        assert p.system.reduce(e) == e

    def test_tzitzeica_file(self):
        p = corpus("tzitzeica")
        assert p.nonlocal_ == ("rho1", "rho2")
        assert p.forms["gamma"].is_matrix and p.forms["gamma"].size == 2

    def test_duplicate_rule(self):
        with pytest.raises(ParseError, match="(?i)duplicate|already"):
            parse_problem(mini(eqs="z_t = z_xxx\nz_t = z_x"))

    def test_nonlocal_missing_direction(self):
        with pytest.raises(ParseError):
            parse_problem(mini(extra="nonlocal = rho", tail="[covering]\nrho_x = z"))

    def test_unknown_assertion_target(self):
        with pytest.raises(ParseError):
            parse_problem(mini(tail="[assert]\npseudosymmetry Nope"))

    def test_unknown_assertion_kind(self):
        with pytest.raises(ParseError):
            parse_problem(mini(tail="[assert]\nfrobnicate z"))

    def test_errors_carry_line(self):
        text = mini(tail="[forms]\nform mu\n  dx: z +\n")
        with pytest.raises(ParseError) as ei:
            parse_problem(text)
        assert ei.value.line == text.splitlines().index("  dx: z +") + 1

    def test_comments_ignored(self):
        p = parse_problem("# head\n" + mini(eqs="z_t = z_xxx  # heat-like"))
        assert len(p.system.rules) == 1

    def test_matrix_form_renders_row_major(self):
        text = render_problem(corpus("kdv_abt"))
        assert "dx: [0, 1; -lambda - z, 0]" in text

    @pytest.mark.parametrize("name", CORPUS_NAMES)
    def test_round_trip(self, name):
        p = corpus(name)
        q = parse_problem(render_problem(p))
        assert [(r.lead, normalize(r.rhs)) for r in q.system.rules] == \
               [(r.lead, normalize(r.rhs)) for r in p.system.rules]
        assert set(q.forms) == set(p.forms)
        assert [a.text for a in q.assertions] == [a.text for a in p.assertions]

    def test_camassa_holm_rules_round_trip(self):
        p = corpus("camassa_holm")
        S = p.system
        for r in S.rules:
            text = f"{S.name_of(r.lead)} = {render(r.rhs)}"
            lhs, rhs = text.split(" = ", 1)
            assert S.parse_coord_name(lhs) == r.lead
            assert normalize(parse_expr(rhs, S) - r.rhs) == 0


def test_truncated_corpus_never_crashes():
    """Every prefix (by line) either parses or raises ParseError."""
    for path in sorted(corpus_dir().glob("*.prob")):
        lines = path.read_text().splitlines()
        for k in range(0, len(lines), 3):
            try:
                parse_problem("\n".join(lines[:k]))
            except ParseError:
                pass


def test_constants_round_trip():
    e = sp.E * sp.pi**2 + sp.atan(1)
    assert parse_expr(render(e)) == e
