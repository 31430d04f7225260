# File: adaptive_lq/simulation.py
"""
Fixed-step closed-loop simulation and reproduction reports.

The plant, the regression pipeline, the adaptive law and the evaluation-only
reference model share one explicit Euler grid t_k = k dt, k = 0..N.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import settings
from .core.adaptation import (
    ControllerState,
    adaptation_rate,
    control_output,
    error_metrics,
    gain_schedule,
    regressor,
    theta_update,
)
from .core.drem import new_filter_state, regression_tick, reset_filters
from .core.lq_design import (
    AugmentedSystem,
    ComparisonCost,
    CostWeights,
    LqSolution,
    analytical_riccati,
    analytical_sweep,
    are_residual,
    augment,
    build_hamiltonian,
    integrate_riccati_differential,
    make_weights,
    plant_from_spec,
    reference_model_step,
    solve_lq_analytical,
    weights_from_spec,
)
from .core.matrix import eigenvalues, mat_exp_oracle, mat_exp_taylor, norm, taylor_remainder_bound
from .exceptions import NumericError, SingularityError, TraceError
from .presets import get_preset
from .schemas.enums import NormKind
from .schemas.results import IdealRunResult, RiccatiCheckRow, RunSummary, SpectrumReport, Table1Cell
from .schemas.scenario import Scenario, scenario_dimension_summary

logger = logging.getLogger(__name__)

TABLE1_TAUS = (1.5, 2.0, 2.5, 3.0, 7.0)
TABLE1_DEGREES = (20, 25, 30, 35)
DEFAULT_IDEAL_TAUS = (0.5, 1.0, 3.0, 7.0)
MONOTONE_TOL = 1e-9


@dataclass
class Trace:
    """Channels sampled on a shared time grid; ``values`` is (samples x channels)."""
    t: np.ndarray
    names: List[str]
    values: np.ndarray
    meta: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.names):
            raise TraceError(f"Trace values {self.values.shape} do not match {len(self.names)} channel names")
        if self.values.shape[0] != self.t.shape[0]:
            raise TraceError(f"Trace has {self.t.shape[0]} times but {self.values.shape[0]} rows")

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise KeyError(f"No channel '{name}' in trace") from None

    def channels(self, prefix: str) -> np.ndarray:
        """All channels whose name starts with ``prefix``, in declaration order."""
        idx = [i for i, n in enumerate(self.names) if n.startswith(prefix)]
        return self.values[:, idx]

    def decimate(self, every: int) -> "Trace":
        """Every ``every``-th sample, starting with the first."""
        if every <= 1:
            return self
        return Trace(t=self.t[::every], names=list(self.names), values=self.values[::every], meta=dict(self.meta))


def _theta_names(rows: int, m: int) -> List[str]:
    if m == 1:
        return [f"theta_hat_{i + 1}" for i in range(rows)]
    return [f"theta_hat_{i + 1}_{j + 1}" for i in range(rows) for j in range(m)]


def closed_loop_channels(n: int, m: int) -> List[str]:
    """Channel names of a closed-loop trace, in column order (time excluded)."""
    return (
        [f"x_{i + 1}" for i in range(n)]
        + [f"u_{i + 1}" for i in range(m)]
        + [f"r_{i + 1}" for i in range(m)]
        + _theta_names(n + m, m)
        + ["delta", "phi", "omega", "gamma", "disturbance_ratio", "theta_err", "eref_err", "xi", "cost", "cost_ideal"]
    )


def build_system(s: Scenario) -> Tuple[AugmentedSystem, CostWeights]:
    return augment(plant_from_spec(s.plant), s.vartheta), weights_from_spec(s.weights)


def _stage_cost(x: np.ndarray, u: np.ndarray, w: CostWeights) -> float:
    return 0.5 * float(x @ w.q @ x + u @ w.r @ u)


def _reference_switched(s: Scenario, t: float, dt: float) -> bool:
    return any(t - dt < t_switch <= t for t_switch in s.reference.change_times())


def run_closed_loop(s: Scenario, truth: Optional[LqSolution] = None) -> Tuple[Trace, RunSummary]:
    """
    Simulate the adaptive closed loop.

    The ground-truth LqSolution (analytical, at the scenario's tau_inf) is used
    only for metrics and the reference model; the controller never sees it.

    Returns:
        (trace with one row per tick, summary). On overflow the trace stops at the
        last complete tick and the summary carries overflow_flag.
    """
    sys, w = build_system(s)
    if truth is None:
        truth = solve_lq_analytical(sys, w, s.pipeline.tau_inf)
    theta = truth.theta
    n, m = sys.n, sys.m
    dt = s.dt
    n_ticks = s.n_ticks
    names = closed_loop_channels(n, m)
    rows = np.empty((n_ticks + 1, len(names)))
    times = np.empty(n_ticks + 1)

    logger.info(f"Scenario {s.name}: starting closed loop ({scenario_dimension_summary(s)})")

    x = np.asarray(s.x0, dtype=float)
    x_ref = x.copy()
    cs = ControllerState(theta_hat=np.asarray(s.theta_hat0, dtype=float).copy())
    fs = new_filter_state(n, m, x, s.pipeline.t_start)
    theta_norm = float(np.linalg.norm(theta, 'fro'))

    cost = 0.0
    cost_ideal = 0.0
    prev_stage: Optional[float] = None
    prev_stage_ideal: Optional[float] = None
    comparison = ComparisonCost(sys, w, truth, dt)
    comparison_ideal = ComparisonCost(sys, w, truth, dt)
    gap = 0.0
    activation_tick: Optional[int] = None
    overflow_message: Optional[str] = None
    recorded = 0

    for k in range(n_ticks + 1):
        t = k * dt
        r = s.reference.evaluate(t)
        if s.reset_on_reference_change and k > 0 and _reference_switched(s, t, dt):
            fs = reset_filters(fs, x, t)
            logger.info(f"Scenario {s.name}: reference changed at t={t:.4f}, filters reset")

        u = control_output(cs, x, r)
        try:
            fs, reg = regression_tick(fs, x, u, r, sys.b_r, w, s.pipeline, dt)
            omega_vec = regressor(x, r)
            rate = adaptation_rate(fs.omega_acc, omega_vec, s.gains)
            gamma = gain_schedule(fs.omega_acc, omega_vec, s.gains)
        except NumericError as e:
            overflow_message = str(e)
            logger.error(f"Scenario {s.name}: halted at t={t:.4f}: {e}")
            break

        if rate > 0.0 and activation_tick is None:
            activation_tick = k
            logger.info(f"Scenario {s.name}: adaptation active at t={t:.4f} (Omega={fs.omega_acc:.3e})")

        u_ideal = truth.k_x @ x_ref + truth.k_r @ r
        stage = _stage_cost(x, u, w)
        stage_ideal = _stage_cost(x_ref, u_ideal, w)
        if prev_stage is not None:
            cost += 0.5 * dt * (prev_stage + stage)
            cost_ideal += 0.5 * dt * (prev_stage_ideal + stage_ideal)
        prev_stage, prev_stage_ideal = stage, stage_ideal
        gap = comparison.add(x, u, r) - comparison_ideal.add(x_ref, u_ideal, r)

        theta_err, e_ref, xi = error_metrics(cs, theta, x, x_ref)
        if fs.omega_acc > 0.0 and theta_norm > 0.0:
            varsigma = fs.upsilon_acc - fs.omega_acc * theta
            ratio = float(np.linalg.norm(varsigma, 'fro')) / (fs.omega_acc * theta_norm)
        else:
            ratio = math.nan

        times[k] = t
        rows[k] = np.concatenate([
            x, u, r, cs.theta_hat.ravel(),
            [reg.delta, reg.phi, fs.omega_acc, gamma, ratio, theta_err, e_ref, xi, cost, cost_ideal],
        ])
        recorded = k + 1
        if k == n_ticks:
            break

        try:
            cs = theta_update(cs, rate, fs.omega_acc, fs.upsilon_acc, dt)
        except NumericError as e:
            overflow_message = str(e)
            logger.error(f"Scenario {s.name}: halted at t={t:.4f}: {e}")
            break
        x = x + dt * (sys.a @ x + sys.b @ u - sys.b_r @ r)
        x_ref = reference_model_step(truth, sys, x_ref, r, dt)

    trace = Trace(
        t=times[:recorded].copy(),
        names=names,
        values=rows[:recorded].copy(),
        meta={"scenario": s.name, "dt": repr(dt)},
    )
    summary = summarize_run(trace, theta, s, activation_tick, overflow_message, gap)
    logger.info(
        f"Scenario {s.name}: finished {recorded} samples, final ||theta_err||={summary.final_theta_err:.3e}, "
        f"monotone fraction {summary.monotone_fraction:.4f}"
    )
    return trace, summary


def summarize_run(
    trace: Trace,
    theta: np.ndarray,
    s: Scenario,
    activation_tick: Optional[int],
    overflow_message: Optional[str],
    cost_gap: float = 0.0,
) -> RunSummary:
    """Scalar metrics of a closed-loop trace; ``cost_gap`` comes from the ComparisonCost pair."""
    if len(trace) == 0:
        return RunSummary(
            final_theta_err=math.nan,
            final_eref_err=math.nan,
            initial_theta_err=math.nan,
            monotone_fraction=0.0,
            omega_peak=0.0,
            cost_adaptive=0.0,
            cost_ideal=0.0,
            overflow_flag=overflow_message is not None,
            overflow_message=overflow_message,
            ticks=0,
        )

    theta_err = trace.channel("theta_err")
    abs_err = np.abs(trace.channels("theta_hat_") - theta.ravel()[None, :])

    monotone = 1.0
    activation_time = None
    activation_err = None
    max_ratio = None
    if activation_tick is not None and activation_tick < len(trace):
        activation_time = float(trace.t[activation_tick])
        activation_err = float(theta_err[activation_tick])
        window = abs_err[activation_tick:]
        if window.shape[0] > 1:
            steps = np.all(window[1:] <= window[:-1] + MONOTONE_TOL, axis=1)
            monotone = float(np.mean(steps))
        ratios = trace.channel("disturbance_ratio")[activation_tick:]
        if np.any(np.isfinite(ratios)):
            max_ratio = float(np.nanmax(ratios))

    return RunSummary(
        final_theta_err=float(theta_err[-1]),
        final_eref_err=float(trace.channel("eref_err")[-1]),
        initial_theta_err=float(theta_err[0]),
        activation_theta_err=activation_err,
        monotone_fraction=monotone,
        omega_peak=float(np.max(trace.channel("omega"))),
        activation_time=activation_time,
        cost_adaptive=float(trace.channel("cost")[-1]),
        cost_ideal=float(trace.channel("cost_ideal")[-1]),
        max_disturbance_ratio=max_ratio,
        overflow_flag=overflow_message is not None,
        overflow_message=overflow_message,
        ticks=len(trace),
        cost_gap=cost_gap,
    )


def simulate_fixed_law(s: Scenario, sol: LqSolution, sys: AugmentedSystem, w: CostWeights) -> Tuple[Trace, float]:
    """Plant under u = K_x x + K_r r on the scenario grid; returns (trace, J)."""
    n, m = sys.n, sys.m
    dt = s.dt
    n_ticks = s.n_ticks
    names = [f"x_{i + 1}" for i in range(n)] + [f"u_{i + 1}" for i in range(m)] + [f"z_{i + 1}" for i in range(m)] + ["cost"]
    rows = np.empty((n_ticks + 1, len(names)))
    x = np.asarray(s.x0, dtype=float)
    c_p = sys.c[: n - m]
    cost = 0.0
    prev_stage: Optional[float] = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_ticks + 1):
            r = s.reference.evaluate(k * dt)
            u = sol.k_x @ x + sol.k_r @ r
            stage = _stage_cost(x, u, w)
            if prev_stage is not None:
                cost += 0.5 * dt * (prev_stage + stage)
            prev_stage = stage
            rows[k] = np.concatenate([x, u, c_p.T @ x[: n - m], [cost]])
            x = x + dt * (sys.a @ x + sys.b @ u - sys.b_r @ r)
    if not np.all(np.isfinite(rows)):
        logger.warning(f"Scenario {s.name}: fixed law at tau_inf={sol.tau_inf} diverged")
    trace = Trace(t=np.arange(n_ticks + 1) * dt, names=names, values=rows, meta={"tau_inf": repr(sol.tau_inf)})
    return trace, cost


def run_ideal_lq(s: Scenario, tau_inf_sweep: Sequence[float]) -> List[Tuple[IdealRunResult, Optional[Trace]]]:
    """Fixed optimal law from P(tau_inf) for every tau_inf; singular entries are marked, not raised."""
    sys, w = build_system(s)
    results: List[Tuple[IdealRunResult, Optional[Trace]]] = []
    for tau, sol, message in analytical_sweep(sys, w, tau_inf_sweep):
        if sol is None:
            logger.info(f"Scenario {s.name}: tau_inf={tau} singular")
            results.append((IdealRunResult(tau_inf=tau, singular=True, message=message), None))
            continue
        trace, cost = simulate_fixed_law(s, sol, sys, w)
        results.append((
            IdealRunResult(tau_inf=tau, cost=cost, stabilizing=sol.is_stabilizing(sys)),
            trace,
        ))
    return results


def table1_system() -> Tuple[AugmentedSystem, CostWeights]:
    """Second-order plant with Q = I, R = 1, vartheta = 1."""
    s = get_preset("sec4_1")
    return augment(plant_from_spec(s.plant), 1.0), make_weights(np.eye(3), np.eye(1))


def reproduce_table1(norm_kind: Optional[NormKind] = None) -> List[Table1Cell]:
    """Taylor truncation error ||exp(D tau) - Taylor_p(D tau)|| over the standard grid."""
    norm_kind = norm_kind or settings.TABLE1_NORM
    sys, w = table1_system()
    d = build_hamiltonian(sys, w)
    cells: List[Table1Cell] = []
    for tau in TABLE1_TAUS:
        exact = mat_exp_oracle(d, tau)
        for p in TABLE1_DEGREES:
            eps = exact - mat_exp_taylor(d, tau, p)
            cells.append(Table1Cell(
                tau_inf=tau,
                p=p,
                eps_norm=norm(eps, norm_kind),
                bound=taylor_remainder_bound(d, tau, p),
            ))
    return cells


def reproduce_spectra() -> List[SpectrumReport]:
    """Hamiltonian eigenvalues of both presets (the second at vartheta 1 and 100)."""
    setups = [("sec4_1", 1.0), ("sec4_2", 1.0), ("sec4_2", 100.0)]
    reports: List[SpectrumReport] = []
    for name, vartheta in setups:
        s = get_preset(name)
        sys = augment(plant_from_spec(s.plant), vartheta)
        w = weights_from_spec(s.weights)
        spectrum = eigenvalues(build_hamiltonian(sys, w))
        reports.append(SpectrumReport(label=name, vartheta=vartheta, real=spectrum.real, imag=spectrum.imag))
    return reports


def riccati_check(sys: AugmentedSystem, w: CostWeights, taus: Sequence[float]) -> List[RiccatiCheckRow]:
    """Analytical P_hat(tau) = Phi21 Phi11^-1 against the differential Riccati solution at each tau."""
    horizon = max(settings.RICCATI_HORIZON, max(taus))
    oracle = integrate_riccati_differential(sys, w, horizon=horizon)
    p_steady = oracle.p_final
    steady_norm = float(np.linalg.norm(p_steady, 2))
    d = build_hamiltonian(sys, w)
    rows: List[RiccatiCheckRow] = []
    for tau in taus:
        try:
            p_hat, cond = analytical_riccati(d, sys.n, tau)
        except SingularityError as e:
            rows.append(RiccatiCheckRow(tau=tau, singular=True, cond_phi11=e.condition))
            continue
        except NumericError:
            rows.append(RiccatiCheckRow(tau=tau, singular=True))
            continue
        p_tau = oracle.p_at(tau)
        p_norm = float(np.linalg.norm(p_tau, 2))
        rows.append(RiccatiCheckRow(
            tau=tau,
            cond_phi11=cond,
            rel_gap=float(np.linalg.norm(p_hat - p_tau, 2)) / p_norm if p_norm > 0 else None,
            steady_gap=float(np.linalg.norm(p_hat - p_steady, 2)) / steady_norm if steady_norm > 0 else None,
            are_residual=are_residual(sys, w, p_hat),
        ))
    return rows
