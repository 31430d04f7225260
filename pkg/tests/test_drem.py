import numpy as np
import pytest

from adaptive_lq.core.drem import (
    ThetaRegression,
    averaging_step,
    build_zD,
    build_zPhi,
    drem_mix,
    excitation_metric,
    extract_zA_zB,
    filter_step,
    new_filter_state,
    parameterize_theta,
    regression_tick,
    reset_filters,
    residual_oracle,
)
from adaptive_lq.core.lq_design import build_hamiltonian, solve_lq_analytical
from adaptive_lq.core.matrix import mat_exp_oracle, mat_exp_taylor
from adaptive_lq.exceptions import DimensionError, MatrixOverflowError, StepError, WindowError
from adaptive_lq.schemas.scenario import PipelineParams
from conftest import multisine, random_augmented_system, unit_weights

PARAMS = PipelineParams(l=2.5, k0=1.0, k1=1e6, sigma=1.0, p=10, tau_inf=1.0)


def _open_loop_run(sys, params, ticks, dt=1e-3, x0=(0.5, -0.5, 0.0)):
    """Drive the plant with multi-sine input and reference; yields per-tick pipeline outputs."""
    fs = new_filter_state(sys.n, sys.m, np.array(x0))
    x = np.array(x0, dtype=float)
    for k in range(ticks):
        t = k * dt
        u = np.array([multisine(t, (5.0, 11.0, 17.0))])
        r = np.array([1.0 + 0.5 * np.sin(2.0 * t)])
        fs, zbar, phibar = filter_step(fs, x, u, r, sys.b_r, params, dt)
        fs, phi, z = drem_mix(fs, zbar, phibar, params, dt)
        yield fs, zbar, phibar, phi, z
        x = x + dt * (sys.a @ x + sys.b @ u - sys.b_r @ r)


def _theta_ab(sys, x0):
    return np.hstack([sys.a, sys.b, np.asarray(x0, dtype=float).reshape(-1, 1)])


class TestFilters:
    def test_first_tick_outputs(self, sec4_1_system):
        sys, _ = sec4_1_system
        x0 = np.array([-1.0, 1.0, 0.0])
        fs = new_filter_state(3, 1, x0)
        fs, zbar, phibar = filter_step(fs, x0, np.zeros(1), np.ones(1), sys.b_r, PARAMS, 1e-3)
        np.testing.assert_array_equal(zbar, x0)
        np.testing.assert_array_equal(phibar, [0.0, 0.0, 0.0, 0.0, 1.0])

    def test_linear_identity_on_grid(self, sec4_1_system):
        sys, _ = sec4_1_system
        x0 = (0.5, -0.5, 0.0)
        theta_ab = _theta_ab(sys, x0)
        for _fs, zbar, phibar, _phi, _z in _open_loop_run(sys, PARAMS, 2000):
            np.testing.assert_allclose(zbar, theta_ab @ phibar, atol=1e-10)

    def test_rejects_zero_step(self, sec4_1_system):
        sys, _ = sec4_1_system
        fs = new_filter_state(3, 1, np.zeros(3))
        with pytest.raises(StepError):
            filter_step(fs, np.zeros(3), np.zeros(1), np.zeros(1), sys.b_r, PARAMS, 0.0)

    def test_new_state_checks_dimension(self):
        with pytest.raises(DimensionError):
            new_filter_state(3, 1, np.zeros(2))


class TestMixing:
    def test_first_tick_is_unexcited(self, sec4_1_system):
        sys, _ = sec4_1_system
        _fs, _zbar, _phibar, phi, z = next(_open_loop_run(sys, PARAMS, 1))
        assert phi == 0.0
        np.testing.assert_array_equal(z, np.zeros((5, 3)))

    def test_mixed_regressand_recovers_parameters(self, sec4_1_system):
        sys, _ = sec4_1_system
        x0 = (0.5, -0.5, 0.0)
        theta_ab = _theta_ab(sys, x0)
        for _fs, _zbar, _phibar, phi, z in _open_loop_run(sys, PARAMS, 1000):
            pass
        assert 0.0 < phi < 1.0
        np.testing.assert_allclose(z / phi, theta_ab.T, rtol=1e-5, atol=1e-6)

        z_a, z_b = extract_zA_zB(z, 1)
        np.testing.assert_allclose(z_a / phi, sys.a, atol=1e-5)
        np.testing.assert_allclose(z_b / phi, sys.b, atol=1e-5)

    @pytest.mark.parametrize("k1, scale", [(1.0, 1.0), (1e-3, 1000.0)])
    def test_det_equal_to_inverse_k1_gives_one_half(self, k1, scale):
        fs = new_filter_state(3, 1, np.zeros(3))
        fs.phibar_f = 2.0 * np.diag([scale, 1.0, 1.0, 1.0, 1.0])
        params = PARAMS.model_copy(update={"k0": 5.0, "k1": k1})
        _fs, phi, z = drem_mix(fs, np.zeros(3), np.zeros(5), params, 0.1)
        assert phi == 0.5
        np.testing.assert_array_equal(z, np.zeros((5, 3)))

    def test_phi_stays_below_one_for_huge_gain(self):
        fs = new_filter_state(3, 1, np.zeros(3))
        fs.phibar_f = 2.0 * np.eye(5)
        params = PARAMS.model_copy(update={"k0": 5.0, "k1": 1e300})
        _fs, phi, _z = drem_mix(fs, np.zeros(3), np.zeros(5), params, 0.1)
        assert 0.0 < phi < 1.0

    def test_extract_checks_rows(self):
        with pytest.raises(DimensionError):
            extract_zA_zB(np.zeros((4, 3)), 1)

    def test_reset_restarts_memories(self, sec4_1_system):
        sys, _ = sec4_1_system
        for fs, *_ in _open_loop_run(sys, PARAMS, 50):
            pass
        fs.omega_acc = 3.0
        x_now = np.array([0.1, 0.2, 0.3])
        fresh = reset_filters(fs, x_now, 0.05)
        assert fresh.resets == 1
        assert fresh.t_start == 0.05
        assert fresh.omega_acc == 0.0
        assert fresh.mu == 1.0
        np.testing.assert_array_equal(fresh.x0_snapshot, x_now)
        np.testing.assert_array_equal(fresh.phibar_f, np.zeros((5, 5)))
        _, zbar, phibar = filter_step(fresh, x_now, np.zeros(1), np.ones(1), sys.b_r, PARAMS, 1e-3)
        np.testing.assert_array_equal(phibar, [0.0, 0.0, 0.0, 0.0, 1.0])
        np.testing.assert_array_equal(zbar, x_now)


class TestZChain:
    def test_zd_is_scaled_hamiltonian(self, sec4_1_system):
        sys, w = sec4_1_system
        phi = 0.7
        z_d = build_zD(phi * sys.a, phi * sys.b, phi, w)
        np.testing.assert_allclose(z_d, phi ** 2 * build_hamiltonian(sys, w))

    def test_zphi_is_scaled_taylor_sum(self, sec4_1_system):
        sys, w = sec4_1_system
        phi = 0.9
        params = PARAMS.model_copy(update={"p": 12, "tau_inf": 2.0})
        d = build_hamiltonian(sys, w)
        z11, z21 = build_zPhi(phi ** 2 * d, phi, params)
        expected = phi ** 24 * mat_exp_taylor(d, 2.0, 12)
        np.testing.assert_allclose(z11, expected[:3, :3], rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(z21, expected[3:, :3], rtol=1e-10, atol=1e-12)

    def test_zphi_degree_zero(self, sec4_1_system):
        sys, w = sec4_1_system
        z11, z21 = build_zPhi(build_hamiltonian(sys, w), 0.5, PARAMS, p=0)
        np.testing.assert_array_equal(z11, np.eye(3))
        np.testing.assert_array_equal(z21, np.zeros((3, 3)))

    def test_zphi_never_divides_by_phi(self, sec4_1_system):
        sys, w = sec4_1_system
        z11, z21 = build_zPhi(np.zeros((6, 6)), 0.0, PARAMS)
        np.testing.assert_array_equal(z11, np.zeros((3, 3)))
        np.testing.assert_array_equal(z21, np.zeros((3, 3)))

    def test_zphi_overflow(self, sec4_1_system):
        sys, w = sec4_1_system
        with pytest.raises(MatrixOverflowError):
            build_zPhi(1e200 * build_hamiltonian(sys, w), 1.0, PARAMS)


def _exact_regression(sys, w, tau, phi, p):
    d = build_hamiltonian(sys, w)
    big = mat_exp_oracle(d, tau)
    n = sys.n
    scale = phi ** (2 * p)
    return parameterize_theta(
        phi * sys.a, phi * sys.b, scale * big[:n, :n], scale * big[n:, :n], phi, sys.b_r, w
    )


class TestParameterization:
    @pytest.mark.parametrize("phi", [1.0, 0.8])
    def test_residual_with_exact_blocks(self, rng, phi):
        for trial in range(20):
            sys = random_augmented_system(rng, n_p=1 + trial % 2)
            w = unit_weights(sys.n)
            theta = solve_lq_analytical(sys, w, 1.0, require_stabilizing=False).theta
            reg = _exact_regression(sys, w, 1.0, phi, p=3)
            rel = np.linalg.norm(residual_oracle(reg, theta)) / (abs(reg.delta) * np.linalg.norm(theta))
            assert rel <= 1e-9

    def test_partial_regressions(self, sec4_1_system):
        sys, w = sec4_1_system
        sol = solve_lq_analytical(sys, w, 7.0)
        reg = _exact_regression(sys, w, 7.0, 1.0, p=1)
        np.testing.assert_allclose(reg.y_kx, reg.delta_kx * sol.k_x, rtol=1e-8)
        np.testing.assert_allclose(reg.y_kr, reg.delta_kr * sol.k_r, rtol=1e-8)
        assert reg.delta == pytest.approx(reg.delta_kx ** 3 * reg.delta_kr)

    def test_residual_shrinks_with_degree(self, sec4_1_system):
        sys, w = sec4_1_system
        theta = solve_lq_analytical(sys, w, 7.0).theta
        d = build_hamiltonian(sys, w)
        residuals = []
        for p in (20, 25, 30, 35):
            params = PARAMS.model_copy(update={"p": p, "tau_inf": 7.0})
            z11, z21 = build_zPhi(d, 1.0, params)
            reg = parameterize_theta(sys.a, sys.b, z11, z21, 1.0, sys.b_r, w)
            residuals.append(
                np.linalg.norm(residual_oracle(reg, theta)) / (abs(reg.delta) * np.linalg.norm(theta))
            )
        assert all(a >= b for a, b in zip(residuals, residuals[1:]))
        assert residuals[-1] < 1e-5

    def test_residual_shape_check(self):
        reg = ThetaRegression(delta=1.0, y_theta=np.zeros((4, 1)))
        with pytest.raises(DimensionError):
            residual_oracle(reg, np.zeros((3, 1)))


class TestAveraging:
    def test_one_step_from_rest(self):
        fs = new_filter_state(3, 1, np.zeros(3))
        reg = ThetaRegression(delta=2.0, y_theta=np.array([[1.0], [2.0], [3.0], [4.0]]))
        fs = averaging_step(fs, reg, PARAMS, 0.01)
        assert fs.omega_acc == pytest.approx(0.04)
        np.testing.assert_allclose(fs.upsilon_acc, 0.01 * 2.0 * reg.y_theta)

    def test_regression_scale(self):
        fs = new_filter_state(3, 1, np.zeros(3))
        reg = ThetaRegression(delta=2.0, y_theta=np.ones((4, 1)))
        params = PARAMS.model_copy(update={"regression_scale": 0.5})
        fs = averaging_step(fs, reg, params, 0.01)
        assert fs.omega_acc == pytest.approx(0.01 * 1.0)
        np.testing.assert_allclose(fs.upsilon_acc, 0.01 * 0.5 * np.ones((4, 1)))

    def test_forgetting(self):
        fs = new_filter_state(3, 1, np.zeros(3))
        fs.omega_acc = 1.0
        reg = ThetaRegression(delta=0.0, y_theta=np.zeros((4, 1)))
        fs = averaging_step(fs, reg, PARAMS, 0.1)
        assert fs.omega_acc == pytest.approx(0.9)

    def test_overflow(self):
        fs = new_filter_state(3, 1, np.zeros(3))
        reg = ThetaRegression(delta=1e200, y_theta=np.ones((4, 1)))
        with pytest.raises(MatrixOverflowError):
            averaging_step(fs, reg, PARAMS, 0.01)


class TestRegressionTick:
    def test_tick_matches_manual_chain(self, sec4_1_system):
        sys, w = sec4_1_system
        x = np.array([0.5, -0.5, 0.0])
        fs_a = new_filter_state(3, 1, x)
        fs_b = new_filter_state(3, 1, x)
        u = np.array([0.3])
        r = np.array([1.0])
        dt = 1e-3
        fs_a, reg = regression_tick(fs_a, x, u, r, sys.b_r, w, PARAMS, dt)

        fs_b, zbar, phibar = filter_step(fs_b, x, u, r, sys.b_r, PARAMS, dt)
        fs_b, phi, z = drem_mix(fs_b, zbar, phibar, PARAMS, dt)
        z_a, z_b = extract_zA_zB(z, 1)
        z11, z21 = build_zPhi(build_zD(z_a, z_b, phi, w), phi, PARAMS)
        manual = parameterize_theta(z_a, z_b, z11, z21, phi, sys.b_r, w)
        assert reg.delta == manual.delta
        np.testing.assert_array_equal(reg.y_theta, manual.y_theta)
        assert fs_a.omega_acc == dt * manual.delta ** 2


class TestExcitationMetric:
    def test_constant_delta(self):
        assert excitation_metric(np.full(11, 2.0), 0.1) == pytest.approx(4.0)

    def test_needs_two_samples(self):
        with pytest.raises(WindowError):
            excitation_metric(np.array([1.0]), 0.1)
