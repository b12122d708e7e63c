import json
from pathlib import Path

import pytest

from jetkit.cli import corpus_dir, main

DATA = Path(__file__).parent / "data"


def corpus_file(name):
    return str(corpus_dir() / f"{name}.prob")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestVerify:
    def test_kdv_passes(self, capsys):
        code, out, _ = run(capsys, "verify", corpus_file("kdv_abt"))
        assert code == 0
        assert "6/6 assertions pass" in out

    def test_broken_field(self, capsys):
        code, out, _ = run(capsys, "verify", str(DATA / "broken.prob"))
        assert code == 1
        assert "fail" in out and "tangency rho_x: residual: -rho/4" in out

    def test_list(self, capsys):
        code, out, _ = run(capsys, "verify", "--list")
        assert code == 0 and len(out.split()) == 11

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "verify", "no/such.prob")
        assert code == 2 and "error" in err

    def test_bad_flag(self, capsys):
        assert run(capsys, "verify", "--frobnicate")[0] == 2

    def test_json_deterministic(self, capsys, tmp_path):
        outs = []
        for k in range(2):
            path = tmp_path / f"r{k}.json"
            run(capsys, "verify", corpus_file("miura"), "--json", str(path))
            outs.append(path.read_text())
        assert outs[0] == outs[1]
        doc = json.loads(outs[0])
        assert doc["schema"] == 1
        assert "wall_time" not in doc["problems"][0]["assertions"][0]

    def test_json_stdout_is_pure(self, capsys):
        code, out, _ = run(capsys, "verify", corpus_file("kdv_abt"), "--json", "-")
        assert code == 0 and json.loads(out)["problems"][0]["exit"] == 0

    def test_strict_symbolic(self, capsys):
        f = str(DATA / "numeric_zero.prob")
        code, out, _ = run(capsys, "verify", f)
        assert code == 0 and "probabilistic-pass" in out
        code, out, _ = run(capsys, "verify", f, "--strict-symbolic")
        assert code == 1 and "1/2 assertions pass" in out


class TestRiccati:
    def test_kdv_matches_corpus(self, capsys):
        code, out, _ = run(capsys, "riccati", corpus_file("kdv_abt"))
        assert code == 0
        assert "rho_x = -lambda - rho^2 - z" in out
        assert "dt: 4*lambda*rho - 2*rho*z + z_x" in out

    def test_output_parses(self, capsys):
        from jetkit.parser import parse_problem
        _, out, _ = run(capsys, "riccati", corpus_file("tzitzeica"), "--pivot", "3")
        text = "[vars]\nindependent = x t\nlocal = z\n[params]\nlambda nonzero\n" \
               "[equations]\nz_xt = -exp(-2*z) + exp(z)\n" + out
        p = parse_problem(text)
        assert p.nonlocal_ == ("rho1", "rho2")

    def test_pivot_out_of_range(self, capsys):
        code, _, err = run(capsys, "riccati", corpus_file("kdv_abt"), "--pivot", "3")
        assert code == 2 and "out of range" in err


class TestSoliton:
    def test_single_point_csv(self, capsys, tmp_path):
        out_csv = tmp_path / "s.csv"
        code, _, _ = run(capsys, "soliton", corpus_file("kdv_abt"), "--steps", "0", "--out", str(out_csv))
        assert code == 0
        lines = out_csv.read_text().splitlines()
        assert lines == ["x,t,z'", "0.0,0.0,2.0"]

    def test_small_grid(self, capsys):
        # h = 1/32 is too coarse for the 1e-5 oracle tolerance
        code, out, _ = run(capsys, "soliton", corpus_file("kdv_abt"), "--x=-1,1", "--t=-0.25,0.25",
                           "--h", "0.03125")
        assert code == 1 and "[fail] oracle deviation" in out

    def test_no_numeric_section(self, capsys):
        assert run(capsys, "soliton", corpus_file("miura"))[0] == 2

    def test_unknown_param(self, capsys):
        assert run(capsys, "soliton", corpus_file("kdv_abt"), "--param", "mu=1")[0] == 2


def test_render_round_trip(capsys):
    from jetkit.parser import parse_problem
    code, out, _ = run(capsys, "render", corpus_file("camassa_holm"))
    assert code == 0 and parse_problem(out).name == "camassa_holm"


def test_search(capsys):
    code, out, _ = run(capsys, "search", corpus_file("kdv_abt"))
    assert code == 0 and "dim" in out
