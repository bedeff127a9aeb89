import numpy as np
import pytest

from odectrl import oracle
from odectrl.check import smooth_controls
from odectrl.dynamics import ArchitectureKind, LayerControls, vector_field
from odectrl.errors import ConfigurationError, ContractError, ShapeError, UnsupportedError
from odectrl.params import random_parameters
from odectrl.propagation import (
    NetworkConfig,
    default_dt,
    evolve_variational,
    forward,
    forward_batch,
    make_config,
)
from odectrl.tableau import ButcherTableau, make_tableau

from .conftest import TABLEAUX

ONE_PLUS_HALF_TANH1 = 1.3807970779778824  # 1 + tanh(1)/2, mpmath at 30 digits


def scalar_controls(alpha=None):
    return [LayerControls(np.array([[0.0]]), np.array([1.0]), alpha)]


class TestForward:
    @pytest.mark.parametrize("arch", ["ResNet", "ODENet"])
    @pytest.mark.parametrize("tableau", TABLEAUX)
    def test_zero_controls_are_identity(self, arch, tableau, rng):
        cfg = make_config(arch, tableau, 3, 5)
        controls = [LayerControls(np.zeros((3, 3)), np.zeros(3), 0.3 if cfg.kind.has_alpha else None)] * 5
        x = rng.standard_normal(3)
        cache = forward(cfg, controls, x)
        for state in cache.states:
            np.testing.assert_array_equal(state, x)

    def test_scalar_euler_step(self):
        cfg = make_config("ResNet", "euler", 1, 1, dt=0.5)
        cache = forward(cfg, scalar_controls(), np.array([1.0]))
        assert cache.states[1, 0] == pytest.approx(ONE_PLUS_HALF_TANH1, abs=1e-15)

    def test_scalar_improved_euler_step(self):
        # K = 0 makes the field state independent, so both stages see tanh(1)
        cfg = make_config("ResNet", "improved_euler", 1, 1, dt=0.5)
        cache = forward(cfg, scalar_controls(), np.array([1.0]))
        assert cache.states[1, 0] == pytest.approx(ONE_PLUS_HALF_TANH1, abs=1e-15)

    def test_net_is_composition(self, rng):
        cfg = make_config("Net", "kutta4", 2, 4)
        params = random_parameters("Net", 2, 4, rng, scale=1.0)
        x = rng.standard_normal(2)
        y = x
        for u in params.controls:
            y = vector_field(u, y, ArchitectureKind.NET)
        np.testing.assert_array_equal(forward(cfg, params.controls, x).final, y)

    def test_cache_layout(self, rng):
        cfg = make_config("ODENet", "kutta3", 2, 4)
        params = random_parameters("ODENet", 2, 4, rng)
        x = rng.standard_normal(2)
        cache = forward(cfg, params.controls, x)
        assert cache.states.shape == (5, 2)
        assert cache.stage_states.shape == cache.stage_fields.shape == (4, 3, 2)
        np.testing.assert_array_equal(cache.states[0], x)
        # explicit method: first stage of each layer is the layer input
        np.testing.assert_array_equal(cache.stage_states[:, 0], cache.states[:-1])

    def test_implicit_tableau_rejected(self):
        cfg = NetworkConfig(ArchitectureKind.RESNET, ButcherTableau("implicit euler", [[1.0]], [1.0]), 1, 1, 0.1)
        with pytest.raises(UnsupportedError):
            forward(cfg, scalar_controls(), np.array([1.0]))

    def test_wrong_layer_count(self):
        cfg = make_config("ResNet", "euler", 1, 2)
        with pytest.raises(ContractError):
            forward(cfg, scalar_controls(), np.array([1.0]))

    def test_width_mismatch(self):
        cfg = make_config("ResNet", "euler", 1, 1)
        with pytest.raises(ShapeError):
            forward(cfg, scalar_controls(), np.zeros(2))

    def test_invalid_config(self):
        with pytest.raises(ConfigurationError):
            make_config("ResNet", "euler", 2, 0)
        with pytest.raises(ConfigurationError):
            make_config("ResNet", "euler", 2, 3, dt=-1.0)

    def test_default_dt(self):
        assert default_dt("ResNet", 20) == 0.25
        assert default_dt("ODENetSimplex", 20) == 5.0
        assert make_config("Net", "euler", 2, 10).dt == 0.5


class TestForwardBatch:
    def test_empty(self):
        cfg = make_config("ResNet", "euler", 2, 3)
        assert forward_batch(cfg, random_parameters("ResNet", 2, 3, np.random.default_rng(0)).controls,
                             np.empty((0, 2))) == []

    def test_identical_rows(self, rng):
        cfg = make_config("ResNet", "kutta4", 2, 3)
        controls = random_parameters("ResNet", 2, 3, rng).controls
        x = rng.standard_normal(2)
        a, b = forward_batch(cfg, controls, np.stack([x, x]))
        np.testing.assert_array_equal(a.states, b.states)

    @pytest.mark.parametrize("arch", ["Net", "ODENetSimplex"])
    def test_matches_loop_bitwise(self, arch, rng):
        cfg = make_config(arch, "kutta3", 2, 4)
        controls = random_parameters(arch, 2, 4, rng, scale=1.0).controls
        X = rng.standard_normal((6, 2))
        for cache, x in zip(forward_batch(cfg, controls, X), X):
            ref = forward(cfg, controls, x)
            np.testing.assert_array_equal(cache.states, ref.states)
            np.testing.assert_array_equal(cache.stage_fields, ref.stage_fields)

    def test_vectorised_forward_agrees_with_loop(self, rng):
        cfg = make_config("ODENet", "kutta4", 2, 4)
        controls = random_parameters("ODENet", 2, 4, rng, scale=1.0).controls
        X = rng.standard_normal((6, 2))
        batched = forward(cfg, controls, X).states
        for k, cache in enumerate(forward_batch(cfg, controls, X)):
            np.testing.assert_allclose(batched[:, k], cache.states, rtol=1e-14, atol=1e-15)


def perturb(controls, w, eps):
    return [LayerControls(u.K + eps * d.K, u.beta + eps * d.beta,
                          None if u.alpha is None else u.alpha + eps * d.alpha)
            for u, d in zip(controls, w)]


class TestVariational:
    def test_zero_variation(self, rng):
        cfg = make_config("ODENet", "kutta4", 2, 5)
        controls = random_parameters("ODENet", 2, 5, rng, scale=1.0).controls
        cache = forward(cfg, controls, rng.standard_normal(2))
        zero_w = [LayerControls(np.zeros((2, 2)), np.zeros(2), 0.0)] * 5
        np.testing.assert_array_equal(evolve_variational(cfg, controls, cache, np.zeros(2), zero_w), 0.0)

    def test_zero_controls_keep_variation(self, rng):
        cfg = make_config("ResNet", "kutta3", 2, 5)
        controls = [LayerControls(np.zeros((2, 2)), np.zeros(2))] * 5
        v0 = rng.standard_normal(2)
        vs = evolve_variational(cfg, controls, forward(cfg, controls, rng.standard_normal(2)), v0)
        for v in vs:
            np.testing.assert_array_equal(v, v0)

    def test_euler_state_direction_matches_finite_difference(self, rng):
        cfg = make_config("ResNet", "euler", 2, 6, dt=0.3)
        controls = random_parameters("ResNet", 2, 6, rng, scale=1.0).controls
        x, v0 = rng.standard_normal(2), rng.standard_normal(2)
        vN = evolve_variational(cfg, controls, forward(cfg, controls, x), v0)[-1]
        eps = 1e-5
        fd = (forward(cfg, controls, x + eps * v0).final - forward(cfg, controls, x - eps * v0).final) / (2 * eps)
        assert np.linalg.norm(vN - fd) / np.linalg.norm(fd) <= 1e-6

    @pytest.mark.parametrize("arch", ["Net", "ResNet", "ODENet"])
    @pytest.mark.parametrize("tableau", TABLEAUX)
    def test_directional_derivative_in_state_and_controls(self, arch, tableau, rng):
        cfg = make_config(arch, tableau, 2, 5, dt=0.3)
        controls = random_parameters(arch, 2, 5, rng, scale=1.0).controls
        w = random_parameters(arch, 2, 5, rng, scale=1.0).controls
        x, v0 = rng.standard_normal(2), rng.standard_normal(2)
        vN = evolve_variational(cfg, controls, forward(cfg, controls, x), v0, w)[-1]
        eps = 1e-5
        up = forward(cfg, perturb(controls, w, eps), x + eps * v0).final
        dn = forward(cfg, perturb(controls, w, -eps), x - eps * v0).final
        fd = (up - dn) / (2 * eps)
        assert np.linalg.norm(vN - fd) / np.linalg.norm(fd) <= 1e-6

    def test_cache_mismatch(self, rng):
        cfg = make_config("ResNet", "euler", 2, 3)
        other = make_config("ResNet", "euler", 2, 4)
        controls = random_parameters("ResNet", 2, 4, rng).controls
        cache = forward(other, controls, np.zeros(2))
        with pytest.raises(ContractError):
            evolve_variational(cfg, controls[:3], cache, np.zeros(2))


ORDER_DTS = [0.1, 0.05, 0.025, 0.0125]


def order_errors(tableau, T=1.0, seed=3):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(2)
    ref_N = round(T / ORDER_DTS[0])
    ref_cfg = make_config("ResNet", "kutta4", 2, ref_N, dt=ORDER_DTS[0])
    controls = smooth_controls(2, 1, rng)
    ref = oracle.reference_solve(ref_cfg, controls * ref_N, x, 10)
    errs = []
    for dt in ORDER_DTS:
        N = round(T / dt)
        cfg = make_config("ResNet", tableau, 2, N, dt=dt)
        errs.append(np.linalg.norm(forward(cfg, controls * N, x).final - ref))
    return errs


@pytest.mark.parametrize("tableau,order", list(zip(TABLEAUX, [1, 2, 3, 4])))
def test_convergence_order(tableau, order):
    slope = oracle.fit_order(ORDER_DTS, order_errors(tableau))
    assert abs(slope - order) <= 0.2
