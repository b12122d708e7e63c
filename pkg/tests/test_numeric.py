import numpy as np
import pytest
import sympy as sp

from conftest import corpus
from jetkit.morphism import Morphism
from jetkit.numeric import (Grid, GridField, NumericError, apply_morphism_numeric, grid_of,
                            integrate_covering, oracle_error, residual, soliton)

KDV_PARAMS = {"lambda": -1.0}


@pytest.fixture(scope="module")
def kdv_p():
    return corpus("kdv_abt")


@pytest.fixture(scope="module")
def kdv_run(kdv_p):
    return soliton(kdv_p)


def _tanh_error(S, h):
    g = integrate_covering(S, {"z": 0}, KDV_PARAMS, Grid((-1, 1), (-1, 1), h, h), {"rho": 0.0})
    X, T = g.mesh()
    return float(np.max(np.abs(g.values["rho"] - np.tanh(X - 4 * T))))


class TestIntegration:
    def test_kdv_tanh(self, kdv_p):
        # the t-march runs at speed 4, so h = 1/64 leaves 2.6e-6 here
        g, _ = soliton(kdv_p, grid_of(kdv_p.numeric).refined())
        X, T = g.mesh()
        band = np.abs(X - 4 * T) <= 2
        err = np.abs(g.values["rho"] - np.tanh(X - 4 * T))[band]
        assert err.max() < 1e-6

    def test_cross_check(self, kdv_run):
        assert kdv_run[0].meta["cross_check"] < 1e-5

    def test_single_point(self, kdv_p):
        g = integrate_covering(kdv_p.system, {"z": 0}, KDV_PARAMS, Grid((0, 0), (0, 0)), {"rho": 0.25})
        assert g.shape == (1, 1) and g.values["rho"][0, 0] == 0.25

    def test_sine_gordon_exponential(self):
        p = corpus("sine_gordon")
        g, _ = soliton(p, Grid((-1, 1), (-1, 1), 1 / 64, 1 / 64))
        X, T = g.mesh()
        rel = np.abs(g.values["rho"] / np.exp(X + T) - 1)
        assert rel.max() < 1e-6

    def test_sine_gordon_rule_residual(self):
        p = corpus("sine_gordon")
        g, _ = soliton(p)
        assert residual(p.system, g, accuracy=4) < 1e-6

    def test_rk4_order(self, kdv_p):
        ratio = _tanh_error(kdv_p.system, 1 / 32) / _tanh_error(kdv_p.system, 1 / 64)
        assert abs(ratio - 16) < 0.2 * 16

    def test_bad_seed(self, kdv_p):
        with pytest.raises(NumericError):
            integrate_covering(kdv_p.system, {"z": sp.Symbol("x")}, KDV_PARAMS, Grid(), {"rho": 0.0})

    def test_missing_initial_value(self, kdv_p):
        with pytest.raises(NumericError):
            integrate_covering(kdv_p.system, {"z": 0}, KDV_PARAMS, Grid(), {})

    def test_blowup_masked(self, kdv_p):
        # lambda = 1 gives rho = -tan(x - c), which has poles inside the window
        g = integrate_covering(kdv_p.system, {"z": 0}, {"lambda": 1.0},
                               Grid((-2, 2), (0, 0), 1 / 64, 1 / 64), {"rho": 0.0})
        assert g.mask.any() and not g.mask.all()
        assert np.all(np.isnan(g.values["rho"][g.mask]))


class TestMorphism:
    def test_kdv_oracle(self, kdv_p, kdv_run):
        _, img = kdv_run
        B = kdv_p.morphisms["B"]
        assert oracle_error(B.target, img, kdv_p.numeric.oracle) < 1e-5

    def test_identity_unchanged(self, kdv_p, kdv_run):
        g, _ = kdv_run
        img = apply_morphism_numeric(Morphism.identity(kdv_p.system), g)
        assert img.meta["image"] == "identity"
        for v in ("z", "rho"):
            assert np.array_equal(img.values[v], g.values[v], equal_nan=True)

    def _short_pulse(self, rho0, window):
        p = corpus("short_pulse")
        g = integrate_covering(p.system, {"z": 0}, {"eta": 1.0}, Grid(window, window, 1 / 64, 1 / 64),
                               {"rho": rho0})
        return apply_morphism_numeric(p.morphisms["B"], g)

    def test_short_pulse_mild(self):
        img = self._short_pulse(0.05, (-0.5, 0.5))
        assert img.meta["image"] == "resampled"
        assert np.all(np.diff(img.x) > 0)
        assert (~img.mask).sum() > 0.8 * img.mask.size

    def test_short_pulse_loop(self):
        with pytest.raises(NumericError, match="monotone"):
            self._short_pulse(1.0, (-0.5, 0.5))

    def test_pullback_vanishes_pointwise(self, kdv_p):
        # symbolic pullback of the target rule, evaluated on z = 0, rho = tanh(x - 4t)
        B = kdv_p.morphisms["B"]
        T, S = B.target, kdv_p.system
        r = T.rules[0]
        e = B.pullback(T.symbol(r.lead.var, r.lead.sigma) - r.rhs)
        subs = {s: 0 for s, jc in S.coords_in(e) if jc.var == "z"}
        e = e.xreplace(subs).subs(sp.Symbol("lambda"), -1)
        f = sp.lambdify([sp.Symbol("rho")], e)
        rng = np.random.default_rng(5)
        for x, t in rng.uniform(-1, 1, (20, 2)):
            assert abs(f(np.tanh(x - 4 * t))) < 1e-6


class TestResidual:
    def test_constant(self, kdv):
        xs = np.linspace(0, 1, 17)
        g = GridField(xs, xs, {"z": np.full((17, 17), 3.0)})
        assert residual(kdv, g) == 0

    def test_image_small(self, kdv_p, kdv_run):
        _, img = kdv_run
        assert residual(kdv_p.morphisms["B"].target, img) < 5e-2

    def test_corrupted_cell(self, kdv_p, kdv_run):
        _, img = kdv_run
        vals = {k: v.copy() for k, v in img.values.items()}
        j, k = np.array(img.shape) // 2
        vals["z'"][j, k] += 0.1
        bad = GridField(img.x, img.t, vals, dict(img.params), img.mask.copy())
        assert residual(kdv_p.morphisms["B"].target, bad) > 0.05

    def test_fourth_order_is_sharper(self, kdv_p, kdv_run):
        _, img = kdv_run
        T = kdv_p.morphisms["B"].target
        assert residual(T, img, accuracy=4) < residual(T, img, accuracy=2) / 10

    def test_single_point_refused(self, kdv):
        g = GridField(np.array([0.0]), np.array([0.0]), {"z": np.zeros((1, 1))})
        with pytest.raises(NumericError):
            residual(kdv, g)


def test_csv_header(kdv_p):
    g = integrate_covering(kdv_p.system, {"z": 0}, KDV_PARAMS, Grid((0, 1 / 8), (0, 0), 1 / 16, 1 / 16),
                           {"rho": 0.0})
    lines = g.to_csv().splitlines()
    assert lines[0] == "x,t,z,rho"
    assert len(lines) == 1 + 3


def test_grid_of_spec(kdv_p):
    gr = grid_of(kdv_p.numeric)
    assert gr.hx == 1 / 64 and len(gr.axis(0)) == 257
