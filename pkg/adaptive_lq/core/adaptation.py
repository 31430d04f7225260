# File: adaptive_lq/core/adaptation.py
"""Gain-scheduled adaptive law, adjustable control law and error metrics."""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..exceptions import RESCALE_HINT, DimensionError, MatrixOverflowError, StepError
from ..schemas.scenario import AdaptGains

logger = logging.getLogger(__name__)


@dataclass
class ControllerState:
    """Adjustable parameters theta_hat = [K_x_hat K_r_hat]^T, shape (n+m) x m."""
    theta_hat: np.ndarray

    @property
    def k_x(self) -> np.ndarray:
        m = self.theta_hat.shape[1]
        return self.theta_hat[:-m].T

    @property
    def k_r(self) -> np.ndarray:
        m = self.theta_hat.shape[1]
        return self.theta_hat[-m:].T


def regressor(x: np.ndarray, r: np.ndarray) -> np.ndarray:
    """omega = [x; r]."""
    return np.concatenate([np.asarray(x, dtype=float).reshape(-1), np.asarray(r, dtype=float).reshape(-1)])


def adaptation_rate(omega_acc: float, omega_vec: np.ndarray, g: AdaptGains) -> float:
    """
    gamma Omega^2 = gamma0 ||omega||^2 + gamma1 while Omega > rho, else 0.

    ||omega||^2 is lambda_max(omega omega^T) for the rank-1 product.
    """
    if omega_acc <= g.rho:
        return 0.0
    return g.gamma0 * float(omega_vec @ omega_vec) + g.gamma1


def gain_schedule(omega_acc: float, omega_vec: np.ndarray, g: AdaptGains) -> float:
    """Adaptive gain gamma = adaptation_rate / Omega^2; reported only, may underflow to 0."""
    rate = adaptation_rate(omega_acc, omega_vec, g)
    if rate == 0.0:
        return 0.0
    # divide twice, Omega^2 alone may overflow
    return rate / omega_acc / omega_acc


def theta_update(
    cs: ControllerState,
    rate: float,
    omega_acc: float,
    upsilon_acc: np.ndarray,
    dt: float,
) -> ControllerState:
    """
    One tick of theta_hat' = -gamma Omega (Omega theta_hat - Upsilon) = -rate (theta_hat - Upsilon / Omega).

    Omega and Upsilon are held over the tick, so the step moves theta_hat a fraction
    1 - exp(-rate dt) of the way to Upsilon / Omega. Omega^2 is never formed.
    theta_hat is left untouched (same object, same bits) when rate is 0.

    Raises:
        MatrixOverflowError: the update is not finite
    """
    if dt <= 0.0:
        raise StepError(f"dt must be positive, got {dt}")
    if rate == 0.0:
        return cs
    if upsilon_acc.shape != cs.theta_hat.shape:
        raise DimensionError(f"Upsilon has shape {upsilon_acc.shape}, theta_hat has {cs.theta_hat.shape}")

    with np.errstate(over="ignore", invalid="ignore"):
        target = upsilon_acc / omega_acc
        fraction = -math.expm1(-rate * dt)
        updated = cs.theta_hat - fraction * (cs.theta_hat - target)
    if not np.all(np.isfinite(updated)):
        raise MatrixOverflowError("theta_hat update", magnitude=omega_acc, hint=RESCALE_HINT)
    cs.theta_hat = updated
    return cs


def control_output(cs: ControllerState, x: np.ndarray, r: np.ndarray) -> np.ndarray:
    """u = theta_hat^T [x; r]."""
    omega = regressor(x, r)
    if omega.shape[0] != cs.theta_hat.shape[0]:
        raise DimensionError(
            f"[x; r] has {omega.shape[0]} entries, theta_hat has {cs.theta_hat.shape[0]} rows"
        )
    return cs.theta_hat.T @ omega


def error_metrics(
    cs: ControllerState,
    theta_true: np.ndarray,
    x: np.ndarray,
    x_ref: np.ndarray,
) -> Tuple[float, float, float]:
    """(||theta_err||_F, ||x - x_ref||, ||xi||) with xi = [e_ref; vec(theta_err)]."""
    theta_err = float(np.linalg.norm(cs.theta_hat - theta_true, 'fro'))
    e_ref = float(np.linalg.norm(np.asarray(x) - np.asarray(x_ref)))
    return theta_err, e_ref, math.hypot(e_ref, theta_err)
