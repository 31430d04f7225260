# File: adaptive_lq/core/tuning.py
"""Helpers that turn the tuning rules of thumb into numbers and pre-run warnings."""
import logging
from typing import List

import numpy as np

from ..exceptions import NumericError, ParameterError, ValidationFailure
from ..schemas.scenario import ReferenceSpec, Scenario
from .lq_design import augment, build_hamiltonian, plant_from_spec, solve_lq_analytical, weights_from_spec
from .matrix import mat_exp_oracle, mat_exp_taylor

logger = logging.getLogger(__name__)

# relative Taylor truncation error above which theta identification is expected to be biased
TRUNCATION_WARN_LEVEL = 1e-6


def suggest_k1(det_low: float) -> float:
    """k1 = 1 / det_low, so phi >= 0.5 wherever det(phibar_f) >= det_low."""
    if not det_low > 0.0:
        raise ParameterError(f"det_low must be positive, got {det_low}")
    return 1.0 / det_low


def rho_upper_bound(sigma: float, t_e: float, t_start: float = 0.0, phi_low: float = 0.5) -> float:
    """(phi_low / sigma) (t_e - t_start); rho should stay below it."""
    if sigma <= 0.0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if t_e <= t_start:
        raise ParameterError(f"t_e ({t_e}) must follow t_start ({t_start})")
    return (phi_low / sigma) * (t_e - t_start)


def reference_excites(reference: ReferenceSpec, duration: float, samples: int = 1001) -> bool:
    """True if r(t) is non-zero somewhere on [0, duration]; r = 0 leaves [x; u] linearly dependent."""
    for t in np.linspace(0.0, duration, samples):
        if np.any(reference.evaluate(float(t)) != 0.0):
            return True
    return False


def review_scenario(s: Scenario) -> List[str]:
    """
    Pre-run review of a scenario against the tuning rules.

    Returns:
        Human-readable warnings; an empty list means nothing looked off
    """
    warnings: List[str] = []
    pipe = s.pipeline

    if not reference_excites(s.reference, s.duration):
        warnings.append("Reference is identically zero: the regressor cannot be finitely exciting")

    if pipe.l * s.duration < 1.0:
        warnings.append(
            f"l={pipe.l} decays slower than the run ({s.duration}s); the x0 column stays poorly separated"
        )
    if pipe.l * s.dt >= 1.0 or pipe.k0 * s.dt >= 1.0 or pipe.sigma * s.dt >= 1.0:
        warnings.append(f"dt={s.dt} is too coarse for the filter poles; Euler filters lose stability")

    if pipe.regression_scale != 1.0:
        warnings.append(
            f"regression_scale={pipe.regression_scale}: rho is compared with the rescaled Omega, "
            f"scale it by {pipe.regression_scale ** 2:.3e}"
        )

    try:
        sys = augment(plant_from_spec(s.plant), s.vartheta)
        w = weights_from_spec(s.weights)
        rel_err = truncation_error(build_hamiltonian(sys, w), pipe.tau_inf, pipe.p)
        if rel_err > TRUNCATION_WARN_LEVEL:
            warnings.append(
                f"Relative Taylor truncation error {rel_err:.3e} at p={pipe.p}, tau_inf={pipe.tau_inf}; raise p or lower tau_inf"
            )
        sol = solve_lq_analytical(sys, w, pipe.tau_inf, require_stabilizing=False)
        if not sol.is_stabilizing(sys):
            warnings.append(f"tau_inf={pipe.tau_inf} gives gains that do not stabilize the augmented plant")
    except (NumericError, ValidationFailure) as e:
        warnings.append(f"Analytical design at tau_inf={pipe.tau_inf} failed: {e}")

    for message in warnings:
        logger.warning(f"Scenario {s.name}: {message}")
    return warnings


def truncation_error(d: np.ndarray, tau_inf: float, p: int) -> float:
    """||exp(D tau) - Taylor_p(D tau)|| / ||exp(D tau)||, inf if the sum overflows."""
    exact = mat_exp_oracle(d, tau_inf)
    try:
        approx = mat_exp_taylor(d, tau_inf, p)
    except NumericError:
        return float("inf")
    return float(np.linalg.norm(exact - approx, 2) / np.linalg.norm(exact, 2))
