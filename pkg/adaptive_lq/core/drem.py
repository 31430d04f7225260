# File: adaptive_lq/core/drem.py
"""
Regression pipeline for the optimal gains.

Turns measured (x, u, r) into the scalar-regressor equation
y_theta = Delta * theta + eps_theta and then into the averaged regression
Upsilon = Omega * theta + varsigma. Steps, in tick order:

1. state filters: zbar = [A B x0] phibar, derivative free
2. DREM mixing: z = phi * [A B x0]^T
3. z_D = phi^2 D and a Taylor sum z_Phi = phi^(2p) exp(D tau_inf) + eps
4. determinant/adjugate parameterization of theta = [K_x K_r]^T
5. exponential-kernel averaging into (Omega, Upsilon)
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from ..exceptions import (
    K1_RETUNE_HINT,
    RESCALE_HINT,
    DimensionError,
    MatrixOverflowError,
    StepError,
    WindowError,
)
from ..schemas.scenario import PipelineParams
from .lq_design import CostWeights
from .matrix import adjugate, det

logger = logging.getLogger(__name__)

# largest double below 1
PHI_CEILING = float(np.nextafter(1.0, 0.0))


@dataclass
class FilterState:
    """Every online filter memory of the pipeline, zero at t_start except mu."""
    psi_bar: np.ndarray
    r_bar: np.ndarray
    mu: float
    zbar_f: np.ndarray
    phibar_f: np.ndarray
    omega_acc: float
    upsilon_acc: np.ndarray
    x0_snapshot: np.ndarray
    t_start: float
    t_now: float
    resets: int = 0

    @property
    def n(self) -> int:
        return self.zbar_f.shape[1]

    @property
    def m(self) -> int:
        return self.r_bar.shape[0]


@dataclass
class ThetaRegression:
    """y_theta = Delta * theta (+ eps_theta) for one tick."""
    delta: float
    y_theta: np.ndarray
    delta_kx: float = 0.0
    delta_kr: float = 0.0
    phi: float = 0.0
    y_kx: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    y_kr: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))


def new_filter_state(n: int, m: int, x0: np.ndarray, t_start: float = 0.0) -> FilterState:
    """Fresh memories at t_start with x0 snapshotted."""
    q = n + m + 1
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != n:
        raise DimensionError(f"x0 has {x0.shape[0]} entries, expected {n}")
    return FilterState(
        psi_bar=np.zeros(n + m),
        r_bar=np.zeros(m),
        mu=1.0,
        zbar_f=np.zeros((q, n)),
        phibar_f=np.zeros((q, q)),
        omega_acc=0.0,
        upsilon_acc=np.zeros((n + m, m)),
        x0_snapshot=x0.copy(),
        t_start=t_start,
        t_now=t_start,
    )


def reset_filters(fs: FilterState, x_now: np.ndarray, t_now: float) -> FilterState:
    """Zero every memory and restart the pipeline from (x_now, t_now)."""
    fresh = new_filter_state(fs.n, fs.m, x_now, t_now)
    fresh.resets = fs.resets + 1
    logger.debug(f"[DREM] Filters reset at t={t_now:.4f} (reset #{fresh.resets})")
    return fresh


def _check_dt(dt: float) -> None:
    if not dt > 0.0:
        raise StepError(f"dt must be positive, got {dt}")


def filter_step(
    fs: FilterState,
    x: np.ndarray,
    u: np.ndarray,
    r: np.ndarray,
    b_r: np.ndarray,
    params: PipelineParams,
    dt: float,
) -> Tuple[FilterState, np.ndarray, np.ndarray]:
    """
    Outputs of the state filters at the current tick, then one Euler advance.

    zbar = x - l xbar + B_r rbar and phibar = [Psibar; mu], with
    Psibar' = -l Psibar + [x; u], rbar' = -l rbar + r, mu' = -l mu, mu(t_start) = 1.

    Returns:
        (fs, zbar of length n, phibar of length n+m+1)
    """
    _check_dt(dt)
    n = fs.n
    l = params.l
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    r = np.asarray(r, dtype=float).reshape(-1)

    x_bar = fs.psi_bar[:n]
    zbar = x - l * x_bar + b_r @ fs.r_bar
    phibar = np.concatenate([fs.psi_bar, [fs.mu]])

    decay = 1.0 - l * dt
    fs.psi_bar = decay * fs.psi_bar + dt * np.concatenate([x, u])
    fs.r_bar = decay * fs.r_bar + dt * r
    fs.mu = decay * fs.mu
    fs.t_now += dt
    return fs, zbar, phibar


def drem_mix(
    fs: FilterState,
    zbar: np.ndarray,
    phibar: np.ndarray,
    params: PipelineParams,
    dt: float,
) -> Tuple[FilterState, float, np.ndarray]:
    """
    Advance the mixing filters and return the normalized (phi, z).

    phi = k1 det(phibar_f) / (1 + k1 det(phibar_f)),
    z = k1 adj(phibar_f) zbar_f / (1 + k1 det(phibar_f)).

    Raises:
        MatrixOverflowError: the determinant or the mixed regressand is not finite
    """
    _check_dt(dt)
    decay = 1.0 - params.k0 * dt
    fs.zbar_f = decay * fs.zbar_f + dt * np.outer(phibar, zbar)
    fs.phibar_f = decay * fs.phibar_f + dt * np.outer(phibar, phibar)

    d = det(fs.phibar_f)
    if not np.isfinite(d):
        raise MatrixOverflowError("det(phibar_f)", hint=K1_RETUNE_HINT)
    # phibar_f is a Gram matrix, negative values are rounding
    d = max(d, 0.0)
    scaled = params.k1 * d
    if not np.isfinite(scaled):
        raise MatrixOverflowError("k1 * det(phibar_f)", magnitude=d, hint=K1_RETUNE_HINT)
    norm = 1.0 + scaled
    # stays below 1 once k1 det exceeds 1e16
    phi = min(scaled / norm, PHI_CEILING)

    with np.errstate(over="ignore", invalid="ignore"):
        z = (params.k1 / norm) * (adjugate(fs.phibar_f) @ fs.zbar_f)
    if not np.all(np.isfinite(z)):
        raise MatrixOverflowError("adj(phibar_f) zbar_f", magnitude=scaled, hint=K1_RETUNE_HINT)
    return fs, float(phi), z


def extract_zA_zB(z: np.ndarray, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Split z = phi [A^T; B^T; x0^T] into z_A = phi A (n x n) and z_B = phi B (n x m)."""
    n = z.shape[1]
    if z.shape[0] != n + m + 1:
        raise DimensionError(f"z must have {n + m + 1} rows, got {z.shape[0]}")
    z_a = z[:n, :].T.copy()
    z_b = z[n:n + m, :].T.copy()
    return z_a, z_b


def build_zD(z_a: np.ndarray, z_b: np.ndarray, phi: float, w: CostWeights) -> np.ndarray:
    """z_D = [[-phi z_A, z_B R^-1 z_B^T], [phi^2 Q, phi z_A^T]] = phi^2 D."""
    return np.block([
        [-phi * z_a, z_b @ w.r_inv @ z_b.T],
        [(phi * phi) * w.q, phi * z_a.T],
    ])


def build_zPhi(
    z_d: np.ndarray, phi: float, params: PipelineParams, p: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Taylor sum of phi^(2p) exp(D tau_inf) built from z_D = phi^2 D.

    Term k is (z_D tau_inf)^k / k! scaled by phi^(2(p-k)); phi is never divided by.
    ``p`` overrides params.p (p = 0 gives the identity).

    Returns:
        (z_Phi11, z_Phi21), the n x n left blocks
    """
    p = params.p if p is None else p
    tau = params.tau_inf
    size = z_d.shape[0]
    n = size // 2
    phi_sq = phi * phi

    # phi^(2(p-k)) for k = 0..p
    weights = phi_sq ** np.arange(p, -1, -1, dtype=float)
    term = np.eye(size)
    total = weights[0] * term
    scaled = z_d * tau
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, p + 1):
            term = term @ scaled / k
            total = total + weights[k] * term
            if not (np.all(np.isfinite(term)) and np.all(np.isfinite(total))):
                raise MatrixOverflowError("Taylor sum of z_Phi", k=k, hint=K1_RETUNE_HINT)
    return total[:n, :n], total[n:, :n]


def parameterize_theta(
    z_a: np.ndarray,
    z_b: np.ndarray,
    z_phi11: np.ndarray,
    z_phi21: np.ndarray,
    phi: float,
    b_r: np.ndarray,
    w: CostWeights,
) -> ThetaRegression:
    """
    Scalar-regressor equation y_theta = Delta theta from the measurable z-signals.

    Only B_r, Q and R are needed; A and B enter through z_A and z_B.

    Raises:
        MatrixOverflowError: a determinant or adjugate product is not finite
    """
    n = z_a.shape[0]
    m = z_b.shape[1]
    r_inv = w.r_inv

    with np.errstate(over="ignore", invalid="ignore"):
        adj11 = adjugate(z_phi11)
        y_kx = -r_inv @ z_b.T @ z_phi21 @ adj11
        delta_kx = np.float64(phi * det(z_phi11))
        _finite_or_raise(y_kx, "y_Kx", delta_kx)

        m_prime = delta_kx * z_a.T + y_kx.T @ z_b.T
        _finite_or_raise(m_prime, "Delta_Kx z_A^T + y_Kx^T z_B^T", delta_kx)
        y_kr = -phi * r_inv @ z_b.T @ adjugate(m_prime) @ z_phi21 @ adj11 @ b_r
        delta_kr = np.float64(det(m_prime))
        _finite_or_raise(y_kr, "y_Kr", delta_kr)

        top = (delta_kx ** (n - 1)) * (delta_kr ** m) * y_kx.T
        bottom = (delta_kx ** n) * (delta_kr ** (m - 1)) * y_kr.T
        y_theta = np.vstack([top, bottom])
        delta = (delta_kx ** n) * (delta_kr ** m)
    _finite_or_raise(y_theta, "y_theta", delta_kx)
    if not np.isfinite(delta):
        raise MatrixOverflowError("Delta", magnitude=abs(delta_kx), hint=RESCALE_HINT)

    return ThetaRegression(
        delta=float(delta),
        y_theta=y_theta,
        delta_kx=float(delta_kx),
        delta_kr=float(delta_kr),
        phi=phi,
        y_kx=y_kx,
        y_kr=y_kr,
    )


def _finite_or_raise(a: np.ndarray, stage: str, magnitude: float) -> None:
    if not np.all(np.isfinite(a)):
        mag = abs(magnitude) if np.isfinite(magnitude) else None
        raise MatrixOverflowError(stage, magnitude=mag, hint=RESCALE_HINT)


def averaging_step(fs: FilterState, reg: ThetaRegression, params: PipelineParams, dt: float) -> FilterState:
    """Omega' = -sigma Omega + Delta^2, Upsilon' = -sigma Upsilon + Delta y_theta."""
    _check_dt(dt)
    c = params.regression_scale
    delta = c * reg.delta
    y_theta = c * reg.y_theta
    with np.errstate(over="ignore", invalid="ignore"):
        delta_sq = delta * delta
        drive = delta * y_theta
    if not np.isfinite(delta_sq) or not np.all(np.isfinite(drive)):
        raise MatrixOverflowError("Delta^2 in the averaging filter", magnitude=abs(delta), hint=RESCALE_HINT)

    decay = 1.0 - params.sigma * dt
    fs.omega_acc = decay * fs.omega_acc + dt * delta_sq
    fs.upsilon_acc = decay * fs.upsilon_acc + dt * drive
    if not np.isfinite(fs.omega_acc):
        raise MatrixOverflowError("Omega", magnitude=abs(delta), hint=RESCALE_HINT)
    return fs


def regression_tick(
    fs: FilterState,
    x: np.ndarray,
    u: np.ndarray,
    r: np.ndarray,
    b_r: np.ndarray,
    w: CostWeights,
    params: PipelineParams,
    dt: float,
) -> Tuple[FilterState, ThetaRegression]:
    """One full pass of the pipeline: filters, mixing, z-chain, parameterization, averaging."""
    m = np.asarray(r).reshape(-1).shape[0]
    fs, zbar, phibar = filter_step(fs, x, u, r, b_r, params, dt)
    fs, phi, z = drem_mix(fs, zbar, phibar, params, dt)
    z_a, z_b = extract_zA_zB(z, m)
    z_d = build_zD(z_a, z_b, phi, w)
    z_phi11, z_phi21 = build_zPhi(z_d, phi, params)
    reg = parameterize_theta(z_a, z_b, z_phi11, z_phi21, phi, b_r, w)
    fs = averaging_step(fs, reg, params, dt)
    return fs, reg


def excitation_metric(delta_history: np.ndarray, dt: float) -> float:
    """Trapezoidal integral of Delta^2 over a sampled window."""
    _check_dt(dt)
    delta_history = np.asarray(delta_history, dtype=float).reshape(-1)
    if delta_history.size < 2:
        raise WindowError(f"Excitation window needs at least two samples, got {delta_history.size}")
    return float(trapezoid(delta_history * delta_history, dx=dt))


def residual_oracle(reg: ThetaRegression, theta_true: np.ndarray) -> np.ndarray:
    """eps_theta = y_theta - Delta theta."""
    if reg.y_theta.shape != theta_true.shape:
        raise DimensionError(f"theta has shape {theta_true.shape}, y_theta has {reg.y_theta.shape}")
    return reg.y_theta - reg.delta * theta_true
