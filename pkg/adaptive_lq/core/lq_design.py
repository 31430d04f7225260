# File: adaptive_lq/core/lq_design.py
"""
Ground-truth LQ machinery.

Augments the plant with the integral tracking error, builds the Hamiltonian,
reads P, V and the optimal gains from its exponential, and provides a
differential-Riccati integrator used as an independent oracle.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.linalg import solve

from ..config import settings
from ..exceptions import (
    ControllabilityError,
    DimensionError,
    InstabilityError,
    MatrixOverflowError,
    ParameterError,
    SingularityError,
    StepError,
    TraceError,
    WeightError,
)
from ..schemas.scenario import PlantSpec, WeightsSpec
from .matrix import condition_number, det, eigenvalues, mat_exp_oracle

logger = logging.getLogger(__name__)


@dataclass
class PlantModel:
    """x_p' = A_p x_p + B_p u, z = C_p^T x_p. The initial state lives on Scenario.x0."""
    a_p: np.ndarray
    b_p: np.ndarray
    c_p: np.ndarray

    @property
    def n_p(self) -> int:
        return self.a_p.shape[0]

    @property
    def m(self) -> int:
        return self.b_p.shape[1]


@dataclass
class AugmentedSystem:
    """Plant extended with the weighted integral of the tracking error."""
    a: np.ndarray
    b: np.ndarray
    b_r: np.ndarray
    c: np.ndarray
    vartheta: float

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]


@dataclass
class CostWeights:
    q: np.ndarray
    r: np.ndarray

    @property
    def r_inv(self) -> np.ndarray:
        return np.linalg.inv(self.r)


@dataclass
class LqSolution:
    """P, V and the optimal gains; theta stacks [K_x K_r]^T."""
    p: np.ndarray
    v: np.ndarray
    k_x: np.ndarray
    k_r: np.ndarray
    theta: np.ndarray
    tau_inf: float
    cond_phi11: float = 0.0

    def closed_loop(self, sys: "AugmentedSystem") -> np.ndarray:
        """A + B K_x."""
        return sys.a + sys.b @ self.k_x

    def is_stabilizing(self, sys: "AugmentedSystem") -> bool:
        return bool(np.all(eigenvalues(self.closed_loop(sys)).values.real < 0.0))


def plant_from_spec(spec: PlantSpec) -> PlantModel:
    return PlantModel(
        a_p=np.asarray(spec.a_p, dtype=float),
        b_p=np.asarray(spec.b_p, dtype=float),
        c_p=np.asarray(spec.c_p, dtype=float),
    )


def weights_from_spec(spec: WeightsSpec) -> CostWeights:
    return make_weights(np.asarray(spec.q, dtype=float), np.asarray(spec.r, dtype=float))


def make_weights(q: np.ndarray, r: np.ndarray) -> CostWeights:
    """Validate and wrap cost weights."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    for name, w in (("Q", q), ("R", r)):
        if w.shape[0] != w.shape[1]:
            raise DimensionError(f"{name} must be square, got shape {w.shape}")
        if not np.allclose(w, w.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(w).max()))):
            raise WeightError(f"{name} is not symmetric")
        if np.any(np.linalg.eigvalsh(w) <= 0.0):
            raise WeightError(f"{name} is not positive definite")
    return CostWeights(q=q, r=r)


def augment(plant: PlantModel, vartheta: float) -> AugmentedSystem:
    """
    Build A = [[A_p, 0], [vartheta C_p^T, 0]], B = [B_p; 0], B_r = [0; vartheta I].

    Raises:
        ParameterError: vartheta is zero or not finite
        DimensionError: plant blocks are inconsistent
        ControllabilityError: (A_p, B_p) fails the Kalman rank test or
            det [[A_p, B_p], [C_p^T, 0]] vanishes
    """
    if vartheta == 0.0 or not math.isfinite(vartheta):
        raise ParameterError(f"vartheta must be finite and non-zero, got {vartheta}")
    a_p, b_p, c_p = plant.a_p, plant.b_p, plant.c_p
    n_p, m = plant.n_p, plant.m
    if a_p.shape != (n_p, n_p) or b_p.shape[0] != n_p or c_p.shape != (n_p, m):
        raise DimensionError(
            f"Inconsistent plant blocks: A_p {a_p.shape}, B_p {b_p.shape}, C_p {c_p.shape}"
        )

    blocks = [b_p]
    for _ in range(n_p - 1):
        blocks.append(a_p @ blocks[-1])
    rank = int(np.linalg.matrix_rank(np.hstack(blocks)))
    if rank < n_p:
        raise ControllabilityError(f"(A_p, B_p) is not controllable: rank [B, AB, ...] = {rank} < {n_p}")

    square = np.block([[a_p, b_p], [c_p.T, np.zeros((m, m))]])
    square_det = det(square)
    scale = max(1.0, float(np.abs(square).max())) ** (n_p + m)
    if abs(square_det) <= 1e-12 * scale:
        raise ControllabilityError(
            f"Augmented system is not controllable: det[[A_p, B_p], [C_p^T, 0]] = {square_det:.3e}"
        )

    n = n_p + m
    a = np.zeros((n, n))
    a[:n_p, :n_p] = a_p
    a[n_p:, :n_p] = vartheta * c_p.T
    b = np.vstack([b_p, np.zeros((m, m))])
    b_r = np.vstack([np.zeros((n_p, m)), vartheta * np.eye(m)])
    c = np.vstack([c_p, np.zeros((m, m))])
    return AugmentedSystem(a=a, b=b, b_r=b_r, c=c, vartheta=vartheta)


def _check_weights(sys: AugmentedSystem, w: CostWeights) -> None:
    if w.q.shape != (sys.n, sys.n) or w.r.shape != (sys.m, sys.m):
        raise DimensionError(
            f"Weights Q {w.q.shape} / R {w.r.shape} do not match n={sys.n}, m={sys.m}"
        )
    if abs(det(w.r)) == 0.0:
        raise WeightError("R is singular")


def build_hamiltonian(sys: AugmentedSystem, w: CostWeights) -> np.ndarray:
    """D = [[-A, B R^-1 B^T], [Q, A^T]]."""
    _check_weights(sys, w)
    s = sys.b @ w.r_inv @ sys.b.T
    return np.block([[-sys.a, s], [w.q, sys.a.T]])


def _guarded_inverse(lhs: np.ndarray, what: str) -> Tuple[np.ndarray, float]:
    """Inverse of ``lhs`` and its condition number, or SingularityError when ill-conditioned."""
    limit = settings.SINGULARITY_COND_LIMIT
    cond = condition_number(lhs)
    if cond > limit:
        raise SingularityError(what, cond, limit)
    return np.linalg.inv(lhs), cond


def chain_steps(d: np.ndarray, tau: float) -> int:
    """Number of equal sub-steps so that ||D h||_1 <= RICCATI_CHAIN_NORM."""
    size = float(np.linalg.norm(d, 1)) * tau
    return max(1, int(math.ceil(size / settings.RICCATI_CHAIN_NORM)))


def analytical_riccati(d: np.ndarray, n: int, tau: float) -> Tuple[np.ndarray, float]:
    """
    P(tau) = Phi21 Phi11^-1 of exp(D tau), and cond(Phi11).

    The singularity verdict is taken on the single-shot Phi11. The value itself
    is propagated through P <- (Phi21(h) + Phi22(h) P)(Phi11(h) + Phi12(h) P)^-1
    from P = 0 over short sub-steps h, where every inverted block stays close to I.

    Raises:
        SingularityError: exp(D tau) overflows or cond(Phi11) exceeds SINGULARITY_COND_LIMIT
    """
    limit = settings.SINGULARITY_COND_LIMIT
    try:
        phi = mat_exp_oracle(d, tau)
    except MatrixOverflowError as e:
        raise SingularityError("exp(D tau_inf)", math.inf, limit) from e
    cond = condition_number(phi[:n, :n])
    if cond > limit:
        raise SingularityError("Phi_11", cond, limit)

    steps = chain_steps(d, tau)
    step = mat_exp_oracle(d, tau / steps)
    s11, s12 = step[:n, :n], step[:n, n:]
    s21, s22 = step[n:, :n], step[n:, n:]
    p = np.zeros((n, n))
    for _ in range(steps):
        p = solve((s11 + s12 @ p).T, (s21 + s22 @ p).T).T
        p = 0.5 * (p + p.T)
    if not np.all(np.isfinite(p)):
        raise SingularityError("Phi_11", math.inf, limit)
    logger.debug(f"[LQ] P({tau}) from {steps} chained steps, cond(Phi11)={cond:.3e}")
    return p, cond


def gains_from_riccati(
    sys: AugmentedSystem, w: CostWeights, p: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """V = (A^T - P S)^-1 P B_r, K_x = -R^-1 B^T P, K_r = -R^-1 B^T V."""
    r_inv = w.r_inv
    s = sys.b @ r_inv @ sys.b.T
    m_inv, _ = _guarded_inverse(sys.a.T - p @ s, "A^T - P B R^-1 B^T")
    v = m_inv @ p @ sys.b_r
    k_x = -r_inv @ sys.b.T @ p
    k_r = -r_inv @ sys.b.T @ v
    return v, k_x, k_r


def solve_lq_analytical(
    sys: AugmentedSystem,
    w: CostWeights,
    tau_inf: float,
    require_stabilizing: bool = True,
) -> LqSolution:
    """
    Optimal LQ design read from exp(D tau_inf).

    Args:
        sys: Augmented system
        w: Cost weights
        tau_inf: Horizon at which the Hamiltonian flow is sampled
        require_stabilizing: raise when A + B K_x is not Hurwitz

    Returns:
        LqSolution with theta = [K_x K_r]^T of shape (n+m) x m

    Raises:
        SingularityError: Phi_11 or A^T - P B R^-1 B^T cannot be inverted safely
        InstabilityError: the gains do not stabilize the augmented plant
    """
    if not (tau_inf > 0.0 and math.isfinite(tau_inf)):
        raise ParameterError(f"tau_inf must be positive and finite, got {tau_inf}")
    d = build_hamiltonian(sys, w)
    p, cond = analytical_riccati(d, sys.n, tau_inf)
    v, k_x, k_r = gains_from_riccati(sys, w, p)
    theta = np.vstack([k_x.T, k_r.T])
    sol = LqSolution(p=p, v=v, k_x=k_x, k_r=k_r, theta=theta, tau_inf=tau_inf, cond_phi11=cond)
    if not sol.is_stabilizing(sys):
        message = f"Gains from tau_inf={tau_inf} do not make A + B K_x Hurwitz"
        if require_stabilizing:
            raise InstabilityError(message)
        logger.warning(f"[LQ] {message}")
    return sol


@dataclass
class RiccatiTrajectory:
    """Sampled P(tau), V(tau) from the differential-Riccati oracle."""
    tau: np.ndarray
    p: np.ndarray
    v: np.ndarray
    steady: bool

    @property
    def p_final(self) -> np.ndarray:
        return self.p[-1]

    @property
    def v_final(self) -> np.ndarray:
        return self.v[-1]

    def p_at(self, tau: float) -> np.ndarray:
        """P at the sample nearest to ``tau``; the final value beyond the last sample."""
        if tau >= self.tau[-1]:
            return self.p[-1]
        idx = int(np.argmin(np.abs(self.tau - tau)))
        return self.p[idx]


def _riccati_rhs(sys: AugmentedSystem, w: CostWeights):
    n, m = sys.n, sys.m
    s = sys.b @ w.r_inv @ sys.b.T
    a, q, b_r = sys.a, w.q, sys.b_r

    def rhs(p: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        dp = a.T @ p + p @ a - p @ s @ p + q
        dv = (a.T - p @ s) @ v - p @ b_r
        return dp, dv

    def flat(_tau: float, y: np.ndarray) -> np.ndarray:
        p = y[: n * n].reshape(n, n)
        v = y[n * n:].reshape(n, m)
        dp, dv = rhs(p, v)
        return np.concatenate([dp.ravel(), dv.ravel()])

    return rhs, flat


def integrate_riccati_differential(
    sys: AugmentedSystem,
    w: CostWeights,
    horizon: Optional[float] = None,
    step: Optional[float] = None,
) -> RiccatiTrajectory:
    """
    Integrate dP/dtau = A^T P + P A - P S P + Q and dV/dtau = (A^T - P S) V - P B_r from zero.

    Stops once both derivatives fall below RICCATI_STEADY_TOL ||Q||_F or at ``horizon``.

    Raises:
        StepError: step or horizon not positive
        InstabilityError: ||P|| exceeds RICCATI_DIVERGENCE_LIMIT
    """
    horizon = settings.RICCATI_HORIZON if horizon is None else horizon
    step = settings.RICCATI_STEP if step is None else step
    if step <= 0.0 or horizon <= 0.0:
        raise StepError(f"step and horizon must be positive, got step={step}, horizon={horizon}")
    _check_weights(sys, w)

    n, m = sys.n, sys.m
    tol = settings.RICCATI_STEADY_TOL * float(np.linalg.norm(w.q, 'fro'))
    limit = settings.RICCATI_DIVERGENCE_LIMIT
    rhs, flat = _riccati_rhs(sys, w)

    p0 = np.zeros((n, n))
    v0 = np.zeros((n, m))
    dp0, dv0 = rhs(p0, v0)
    if max(np.linalg.norm(dp0, 'fro'), np.linalg.norm(dv0, 'fro')) <= tol:
        logger.debug("[Riccati] Initial state is already steady")
        return RiccatiTrajectory(tau=np.zeros(1), p=p0[None], v=v0[None], steady=True)

    def settled(tau: float, y: np.ndarray) -> float:
        p = y[: n * n].reshape(n, n)
        v = y[n * n:].reshape(n, m)
        dp, dv = rhs(p, v)
        return max(np.linalg.norm(dp, 'fro'), np.linalg.norm(dv, 'fro')) - tol

    settled.terminal = True
    settled.direction = -1

    def diverged(tau: float, y: np.ndarray) -> float:
        return limit - np.linalg.norm(y[: n * n])

    diverged.terminal = True

    t_eval = np.arange(0.0, horizon + 0.5 * step, step)
    t_eval = t_eval[t_eval <= horizon]
    sol = solve_ivp(
        flat,
        (0.0, horizon),
        np.zeros(n * n + n * m),
        method="DOP853",
        t_eval=t_eval,
        events=(settled, diverged),
        rtol=1e-12,
        atol=1e-14,
    )
    if sol.status == -1:
        raise InstabilityError(f"Riccati integration failed: {sol.message}")
    if len(sol.t_events[1]) > 0:
        raise InstabilityError(
            f"Riccati solution diverged (||P|| > {limit:.1e}) at tau={sol.t_events[1][0]:.4g}"
        )

    taus = list(sol.t)
    ys = [sol.y[:, i] for i in range(sol.y.shape[1])]
    steady = len(sol.t_events[0]) > 0
    if steady:
        taus.append(float(sol.t_events[0][0]))
        ys.append(sol.y_events[0][0])
    if not ys:
        raise InstabilityError("Riccati integration returned no samples")

    p_traj = np.array([0.5 * (y[: n * n].reshape(n, n) + y[: n * n].reshape(n, n).T) for y in ys])
    v_traj = np.array([y[n * n:].reshape(n, m) for y in ys])
    if not steady:
        logger.warning(f"[Riccati] Horizon {horizon} reached before steady state")
    else:
        logger.debug(f"[Riccati] Steady state reached at tau={taus[-1]:.4g}")
    return RiccatiTrajectory(tau=np.array(taus), p=p_traj, v=v_traj, steady=steady)


def are_residual_matrix(sys: AugmentedSystem, w: CostWeights, p: np.ndarray) -> np.ndarray:
    """A^T P + P A - P B R^-1 B^T P + Q."""
    s = sys.b @ w.r_inv @ sys.b.T
    return sys.a.T @ p + p @ sys.a - p @ s @ p + w.q


def are_residual(sys: AugmentedSystem, w: CostWeights, p: np.ndarray) -> float:
    """||A^T P + P A - P B R^-1 B^T P + Q||_F."""
    return float(np.linalg.norm(are_residual_matrix(sys, w, p), 'fro'))


def reference_model_derivative(
    sol: LqSolution, sys: AugmentedSystem, x_ref: np.ndarray, r: np.ndarray
) -> np.ndarray:
    """(A + B K_x) x_ref + (B K_r - B_r) r."""
    return (sys.a + sys.b @ sol.k_x) @ x_ref + (sys.b @ sol.k_r - sys.b_r) @ r


def reference_model_step(
    sol: LqSolution, sys: AugmentedSystem, x_ref: np.ndarray, r: np.ndarray, dt: float
) -> np.ndarray:
    """One explicit Euler step of the ideal closed loop."""
    if dt <= 0.0:
        raise StepError(f"dt must be positive, got {dt}")
    return x_ref + dt * reference_model_derivative(sol, sys, x_ref, r)


def evaluate_cost(
    x: np.ndarray,
    u: np.ndarray,
    w: CostWeights,
    dt: float,
    terminal_p: Optional[np.ndarray] = None,
) -> float:
    """
    Trapezoidal 1/2 int x^T Q x + u^T R u dt over sampled trajectories.

    Args:
        x: States, shape (N, n)
        u: Controls, shape (N, m)
        w: Cost weights
        dt: Sample spacing
        terminal_p: Optional P for the terminal term 1/2 x(t_f)^T P x(t_f)
    """
    if dt <= 0.0:
        raise StepError(f"dt must be positive, got {dt}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if x.shape[0] != u.shape[0]:
        raise TraceError(f"State and control traces differ in length: {x.shape[0]} vs {u.shape[0]}")
    if x.shape[0] == 0:
        return 0.0
    integrand = 0.5 * (
        np.einsum("ti,ij,tj->t", x, w.q, x) + np.einsum("ti,ij,tj->t", u, w.r, u)
    )
    total = float(trapezoid(integrand, dx=dt)) if x.shape[0] > 1 else 0.0
    if terminal_p is not None:
        total += 0.5 * float(x[-1] @ terminal_p @ x[-1])
    return total


def finite_horizon_cost(x: np.ndarray, u: np.ndarray, w: CostWeights, sol: LqSolution, dt: float) -> float:
    """Cost with the analytical P(tau_inf) as terminal weight."""
    return evaluate_cost(x, u, w, dt, terminal_p=sol.p)


def value_function(sol: LqSolution, x: np.ndarray, r: np.ndarray) -> float:
    """W(x, r) = 1/2 x^T P x + x^T V r."""
    return float(0.5 * x @ sol.p @ x + x @ sol.v @ r)


class ComparisonCost:
    """
    Running cost of one Euler trajectory, closed by the value function of ``sol``.

    For samples x_0..x_N with controls u_k and references r_k held over each tick,

        J = sum_k dt (l_k - 1/2 x_k^T Res x_k) - 1/2 sum_k dx_k^T P dx_k
            - sum_{0<k<N} x_k^T V (r_k - r_{k-1}) + W(x_N, r_{N-1})

    with l the stage cost and Res the Riccati residual of P. On the Euler grid this
    equals W(x_0, r_0) + sum_k dt c(r_k) + 1/2 sum_k dt |u_k - K_x x_k - K_r r_k|_R^2,
    so two runs from the same x_0 under the same reference differ only by the
    last term.
    """

    def __init__(self, sys: AugmentedSystem, w: CostWeights, sol: LqSolution, dt: float):
        if dt <= 0.0:
            raise StepError(f"dt must be positive, got {dt}")
        self._w = w
        self._sol = sol
        self._res = are_residual_matrix(sys, w, sol.p)
        self._dt = dt
        self._sum = 0.0
        self._jump = 0.0
        self._closing = 0.0
        self._last: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None

    def add(self, x: np.ndarray, u: np.ndarray, r: np.ndarray) -> float:
        """Append sample k; returns the closed cost of the trajectory so far."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        r = np.asarray(r, dtype=float)
        if self._last is None:
            self._closing = value_function(self._sol, x, r)
        else:
            x_k, u_k, r_k = self._last
            dx = x - x_k
            stage = 0.5 * float(x_k @ self._w.q @ x_k + u_k @ self._w.r @ u_k)
            self._sum += self._dt * (stage - 0.5 * float(x_k @ self._res @ x_k))
            self._sum -= 0.5 * float(dx @ self._sol.p @ dx)
            # the previous sample is now interior
            self._sum -= self._jump
            self._jump = float(x @ self._sol.v @ (r - r_k))
            self._closing = value_function(self._sol, x, r_k)
        self._last = (x, u, r)
        return self.value

    @property
    def value(self) -> float:
        return self._sum + self._closing


def comparison_cost(
    x: np.ndarray,
    u: np.ndarray,
    r: np.ndarray,
    sys: AugmentedSystem,
    w: CostWeights,
    sol: LqSolution,
    dt: float,
) -> float:
    """ComparisonCost over sampled traces of shape (N, n), (N, m), (N, m)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    if not (x.shape[0] == u.shape[0] == r.shape[0]):
        raise TraceError(
            f"State, control and reference traces differ in length: {x.shape[0]}, {u.shape[0]}, {r.shape[0]}"
        )
    acc = ComparisonCost(sys, w, sol, dt)
    for x_k, u_k, r_k in zip(x, u, r):
        acc.add(x_k, u_k, r_k)
    return acc.value


def cost_gap(
    x_adaptive: np.ndarray,
    u_adaptive: np.ndarray,
    x_ideal: np.ndarray,
    u_ideal: np.ndarray,
    r: np.ndarray,
    sys: AugmentedSystem,
    w: CostWeights,
    sol: LqSolution,
    dt: float,
) -> float:
    """Comparison cost of the adaptive run minus that of the ideal run on a shared grid."""
    if np.shape(x_adaptive)[0] != np.shape(x_ideal)[0]:
        raise TraceError(
            f"Traces are on different grids: {np.shape(x_adaptive)[0]} vs {np.shape(x_ideal)[0]} samples"
        )
    return (
        comparison_cost(x_adaptive, u_adaptive, r, sys, w, sol, dt)
        - comparison_cost(x_ideal, u_ideal, r, sys, w, sol, dt)
    )


def analytical_sweep(
    sys: AugmentedSystem,
    w: CostWeights,
    taus: Sequence[float],
) -> List[Tuple[float, Optional[LqSolution], Optional[str]]]:
    """(tau, solution, None) for each tau, or (tau, None, reason) where the design is singular."""
    out: List[Tuple[float, Optional[LqSolution], Optional[str]]] = []
    for tau in taus:
        try:
            out.append((tau, solve_lq_analytical(sys, w, tau, require_stabilizing=False), None))
        except SingularityError as e:
            logger.info(f"[LQ] tau={tau}: {e}")
            out.append((tau, None, str(e)))
    return out
