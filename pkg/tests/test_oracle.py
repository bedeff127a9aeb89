import numpy as np
import pytest

from odectrl import oracle
from odectrl.check import random_instance
from odectrl.dynamics import LayerControls
from odectrl.errors import OracleError, UnsupportedError
from odectrl.loss import batch_loss
from odectrl.propagation import forward, make_config

from .conftest import ARCHS


class TestFdGradient:
    def test_linear(self):
        p = np.array([0.3, -2.0, 5.0])
        np.testing.assert_allclose(oracle.fd_gradient(lambda v: float(p @ v), np.ones(3)), p, rtol=1e-10)

    def test_constant(self):
        np.testing.assert_array_equal(oracle.fd_gradient(lambda v: 4.0, np.ones(2)), 0.0)

    def test_does_not_modify_input(self):
        x = np.array([1.0, 2.0])
        oracle.fd_gradient(lambda v: float(v @ v), x)
        np.testing.assert_array_equal(x, [1.0, 2.0])

    def test_non_finite(self):
        with pytest.raises(OracleError):
            oracle.fd_gradient(lambda v: float("inf"), np.ones(1))

    def test_bad_step(self):
        with pytest.raises(OracleError):
            oracle.fd_gradient(lambda v: 0.0, np.ones(1), h=0.0)


class TestObjective:
    @pytest.mark.parametrize("arch", ARCHS)
    def test_agrees_with_forward(self, arch):
        cfg, params, X, c = random_instance(arch, "kutta4", seed=6, scale=1.0)
        tab = cfg.tableau
        args = (X.tolist(), c.tolist(), cfg.kind.value, tab.A.tolist(), tab.b.tolist(), cfg.dt, cfg.N, params.has_alpha)
        expected = batch_loss(forward(cfg, params.controls, X).final, c, params.head)
        assert oracle.objective(params.vector(), *args) == pytest.approx(expected, rel=1e-13)
        assert oracle.objective(params.vector(), *args, dps=30) == pytest.approx(expected, rel=1e-13)


class TestBruteSimplex:
    @pytest.mark.parametrize("a,expected", [([2.0, 0.0], [1.0, 0.0]), ([1.0, 1.0], [0.5, 0.5]), ([7.0], [1.0])])
    def test_examples(self, a, expected):
        np.testing.assert_allclose(oracle.brute_simplex(a), expected, atol=1e-12)

    def test_three_dims(self):
        np.testing.assert_allclose(oracle.brute_simplex([0.0, 0.0, 0.0]), [1 / 3, 1 / 3, 1 / 3], atol=1e-3)

    def test_dimension_limit(self):
        with pytest.raises(UnsupportedError):
            oracle.brute_simplex(np.zeros(4))

    def test_grid_points(self):
        pts = list(oracle.grid_points(3, 0.1))
        assert len(pts) == 66
        assert all(abs(p.sum() - 1.0) < 1e-12 for p in pts)


class TestReferenceSolve:
    def test_zero_controls(self):
        cfg = make_config("ResNet", "euler", 2, 3)
        controls = [LayerControls(np.zeros((2, 2)), np.zeros(2))] * 3
        np.testing.assert_array_equal(oracle.reference_solve(cfg, controls, [0.4, -1.0], 4), [0.4, -1.0])

    def test_refinement_converged(self, rng):
        cfg = make_config("ResNet", "euler", 2, 4, dt=0.25)
        controls = [LayerControls(rng.standard_normal((2, 2)), rng.standard_normal(2))] * 4
        x = rng.standard_normal(2)
        a = oracle.reference_solve(cfg, controls, x, 10)
        b = oracle.reference_solve(cfg, controls, x, 11)
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_alpha_scales_time(self, rng):
        u = LayerControls(rng.standard_normal((2, 2)), rng.standard_normal(2))
        x = rng.standard_normal(2)
        slow = oracle.reference_solve(make_config("ODENet", "euler", 2, 1, dt=1.0),
                                      [LayerControls(u.K, u.beta, 0.5)], x, 8)
        fast = oracle.reference_solve(make_config("ResNet", "euler", 2, 1, dt=0.5), [u], x, 8)
        np.testing.assert_allclose(slow, fast, atol=1e-13)

    def test_euler_order(self, rng):
        K, beta = rng.standard_normal((2, 2)), rng.standard_normal(2)
        x = rng.standard_normal(2)
        ref = oracle.reference_solve(make_config("ResNet", "euler", 2, 1, dt=1.0), [LayerControls(K, beta)], x, 10)
        dts, errs = [0.1, 0.05, 0.025], []
        for dt in dts:
            N = round(1.0 / dt)
            cfg = make_config("ResNet", "euler", 2, N, dt=dt)
            errs.append(np.linalg.norm(forward(cfg, [LayerControls(K, beta)] * N, x).final - ref))
        assert 0.8 <= oracle.fit_order(dts, errs) <= 1.2

    def test_refinement_too_small(self):
        with pytest.raises(OracleError):
            oracle.reference_solve(make_config("ResNet", "euler", 1, 1), [], [0.0], 1)


class TestHelpers:
    def test_fit_order_exact(self):
        dts = np.array([0.1, 0.05, 0.025])
        assert oracle.fit_order(dts, 3.0 * dts**2) == pytest.approx(2.0, abs=1e-12)

    def test_max_relative_error(self):
        err, k = oracle.max_relative_error([1.0, 2.0, 0.0], [1.0, 2.2, 0.0])
        assert k == 1 and err == pytest.approx(0.2 / 2.2)

    def test_floor(self):
        err, _ = oracle.max_relative_error([1e-20], [0.0], floor=1e-10)
        assert err == pytest.approx(1e-10)
