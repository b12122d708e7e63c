import functools

import pytest
import sympy as sp

from jetkit.cli import corpus_dir
from jetkit.jet import EqSystem, JetCoord, Rule
from jetkit.parser import load_problem, parse_expr


@functools.lru_cache(maxsize=None)
def corpus(name: str):
    return load_problem(corpus_dir() / f"{name}.prob")


CORPUS_NAMES = sorted(p.stem for p in corpus_dir().glob("*.prob"))


def system(indep, local, rules=(), nonlocal_=(), params=(), **kw) -> EqSystem:
    """EqSystem from 'lead = rhs' strings."""
    base = EqSystem(indep, local, nonlocal_, params, **kw)
    out = []
    for text in rules:
        lhs, rhs = (s.strip() for s in text.split("="))
        jc = base.parse_coord_name(lhs)
        out.append(Rule(jc, parse_expr(rhs, base)))
    return EqSystem(indep, local, nonlocal_, params, tuple(out), **kw)


@pytest.fixture(scope="session")
def kdv():
    return system(("x", "t"), ("z",), ["z_xxx = -z_t - 6*z*z_x"])


@pytest.fixture(scope="session")
def heat():
    return system(("x", "t"), ("u",), ["u_xx = u_t"])


@pytest.fixture
def P():
    return corpus


ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
