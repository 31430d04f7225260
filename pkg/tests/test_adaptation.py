import math

import numpy as np
import pytest

from adaptive_lq.core.adaptation import (
    ControllerState,
    adaptation_rate,
    control_output,
    error_metrics,
    gain_schedule,
    regressor,
    theta_update,
)
from adaptive_lq.exceptions import DimensionError, MatrixOverflowError, StepError
from adaptive_lq.schemas.scenario import AdaptGains

GAINS = AdaptGains(gamma0=1.0, gamma1=10.0, rho=1.0)


def test_controller_state_split():
    cs = ControllerState(theta_hat=np.array([[1.0], [2.0], [3.0], [4.0]]))
    np.testing.assert_array_equal(cs.k_x, [[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(cs.k_r, [[4.0]])


def test_regressor_stacks_state_and_reference():
    np.testing.assert_array_equal(regressor(np.array([1.0, 2.0]), np.array([3.0])), [1.0, 2.0, 3.0])


class TestGainSchedule:
    def test_dead_zone(self):
        assert gain_schedule(0.5, np.ones(3), GAINS) == 0.0
        assert gain_schedule(1.0, np.ones(3), GAINS) == 0.0
        assert adaptation_rate(1.0, np.ones(3), GAINS) == 0.0

    def test_active_value(self):
        # (1 * ||[1, 2]||^2 + 10) / 2^2
        assert gain_schedule(2.0, np.array([1.0, 2.0]), GAINS) == pytest.approx(3.75)
        assert adaptation_rate(2.0, np.array([1.0, 2.0]), GAINS) == 15.0

    def test_huge_omega_does_not_overflow(self):
        g = AdaptGains(gamma0=1.0, gamma1=1.0, rho=1e35)
        gamma = gain_schedule(1e155, np.ones(2), g)
        assert gamma > 0.0
        assert math.isfinite(gamma)

    def test_rate_stays_finite_when_gamma_underflows(self):
        g = AdaptGains(gamma0=1.0, gamma1=1.0, rho=1e35)
        assert gain_schedule(1e206, np.ones(2), g) == 0.0
        assert adaptation_rate(1e206, np.ones(2), g) == 3.0


class TestThetaUpdate:
    def test_dead_zone_leaves_theta_bit_identical(self):
        theta = np.array([[0.1], [0.2]])
        cs = ControllerState(theta_hat=theta)
        out = theta_update(cs, 0.0, 0.5, np.array([[9.0], [9.0]]), 1e-4)
        assert out is cs
        assert out.theta_hat is theta
        np.testing.assert_array_equal(out.theta_hat, [[0.1], [0.2]])

    def test_step_moves_toward_regression_target(self):
        cs = ControllerState(theta_hat=np.zeros((2, 1)))
        upsilon = np.array([[4.0], [-8.0]])
        out = theta_update(cs, 2.0, 4.0, upsilon, 0.5)
        np.testing.assert_allclose(out.theta_hat, (1.0 - math.exp(-1.0)) * np.array([[1.0], [-2.0]]))

    def test_converges_monotonically_per_entry(self):
        theta = np.array([[1.0], [-2.0], [0.5]])
        cs = ControllerState(theta_hat=np.zeros((3, 1)))
        omega = 5.0
        upsilon = omega * theta
        prev = np.abs(cs.theta_hat - theta)
        for _ in range(200):
            rate = adaptation_rate(omega, np.ones(3), GAINS)
            cs = theta_update(cs, rate, omega, upsilon, 1e-2)
            err = np.abs(cs.theta_hat - theta)
            assert np.all(err <= prev)
            prev = err
        assert np.max(prev) < 1e-6

    def test_error_decays_at_least_at_gamma1(self, rng):
        theta = np.array([[1.0], [-2.0], [0.5], [3.0]])
        cs = ControllerState(theta_hat=np.zeros((4, 1)))
        omega = 5.0
        upsilon = omega * theta
        dt = 1e-2
        err0 = float(np.linalg.norm(cs.theta_hat - theta))
        for k in range(1, 101):
            rate = adaptation_rate(omega, rng.standard_normal(4), GAINS)
            cs = theta_update(cs, rate, omega, upsilon, dt)
            err = float(np.linalg.norm(cs.theta_hat - theta))
            assert err <= math.exp(-GAINS.gamma1 * k * dt) * err0 * (1.0 + 1e-12)
        eta = -math.log(err / err0) / (100 * dt)
        assert eta >= 0.9 * GAINS.gamma1

    def test_huge_omega_still_adapts(self):
        g = AdaptGains(gamma0=1.0, gamma1=1.0, rho=1e35)
        theta = np.array([[1.0], [2.0]])
        omega = 1e250
        cs = ControllerState(theta_hat=np.zeros((2, 1)))
        rate = adaptation_rate(omega, np.ones(2), g)
        cs = theta_update(cs, rate, omega, omega * theta, 1e-3)
        err = float(np.linalg.norm(cs.theta_hat - theta))
        assert err == pytest.approx(math.exp(-3e-3) * math.sqrt(5.0), rel=1e-12)

    def test_power_of_two_rescaling_is_bit_identical(self, rng):
        theta_hat = rng.standard_normal((4, 1))
        upsilon = rng.standard_normal((4, 1)) * 1e40
        omega = 3.7e40
        a = theta_update(ControllerState(theta_hat.copy()), 12.5, omega, upsilon, 1e-4)
        b = theta_update(ControllerState(theta_hat.copy()), 12.5, omega * 0.25, upsilon * 0.25, 1e-4)
        np.testing.assert_array_equal(a.theta_hat, b.theta_hat)

    def test_shape_mismatch(self):
        cs = ControllerState(theta_hat=np.zeros((3, 1)))
        with pytest.raises(DimensionError):
            theta_update(cs, 1.0, 2.0, np.zeros((2, 1)), 1e-3)

    def test_non_finite_update(self):
        cs = ControllerState(theta_hat=np.ones((2, 1)))
        with pytest.raises(MatrixOverflowError):
            theta_update(cs, 1.0, 1e-10, np.full((2, 1), 1e308), 1.0)

    def test_rejects_zero_step(self):
        cs = ControllerState(theta_hat=np.ones((2, 1)))
        with pytest.raises(StepError):
            theta_update(cs, 1.0, 1.0, np.ones((2, 1)), 0.0)


def test_control_output():
    cs = ControllerState(theta_hat=np.array([[1.0], [2.0], [3.0]]))
    u = control_output(cs, np.array([1.0, 1.0]), np.array([2.0]))
    np.testing.assert_allclose(u, [9.0])


def test_control_output_dimension_check():
    cs = ControllerState(theta_hat=np.zeros((4, 1)))
    with pytest.raises(DimensionError):
        control_output(cs, np.zeros(2), np.zeros(1))


def test_error_metrics():
    cs = ControllerState(theta_hat=np.array([[1.0], [1.0]]))
    theta_err, e_ref, xi = error_metrics(cs, np.array([[1.0], [4.0]]), np.array([1.0, 0.0]), np.array([1.0, 4.0]))
    assert theta_err == pytest.approx(3.0)
    assert e_ref == pytest.approx(4.0)
    assert xi == pytest.approx(5.0)
