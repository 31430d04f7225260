# File: adaptive_lq/schemas/results.py
"""Result schemas for runs, sweeps and reproduction reports."""
from typing import List, Optional

from pydantic import BaseModel, Field


class RunSummary(BaseModel):
    """Scalar outcome of one closed-loop run."""
    final_theta_err: float = Field(..., description="||theta_hat - theta||_F at the last sample")
    final_eref_err: float = Field(..., description="||x - x_ref|| at the last sample")
    initial_theta_err: float = Field(..., description="||theta_hat - theta||_F at t=0")
    activation_theta_err: Optional[float] = Field(None, description="||theta_hat - theta||_F when adaptation started")
    monotone_fraction: float = Field(..., ge=0.0, le=1.0, description="Share of active ticks with every |theta_err_i| nonincreasing")
    omega_peak: float = Field(..., ge=0.0)
    activation_time: Optional[float] = Field(None, description="First instant with Omega > rho")
    cost_adaptive: float = Field(..., ge=0.0)
    cost_ideal: float = Field(..., ge=0.0)
    max_disturbance_ratio: Optional[float] = Field(None, description="max ||varsigma||/(Omega ||theta||) over the active window")
    overflow_flag: bool = Field(False)
    overflow_message: Optional[str] = Field(None)
    ticks: int = Field(..., ge=0)
    cost_gap: float = Field(0.0, description="Adaptive minus ideal cost, both closed by the value function of the true design")


class Table1Cell(BaseModel):
    """Norm of the Taylor truncation error for one (tau_inf, p) pair."""
    tau_inf: float
    p: int
    eps_norm: float
    bound: float = Field(..., description="A-priori remainder bound for the same pair")


class SpectrumReport(BaseModel):
    """Sorted Hamiltonian eigenvalues for one named setup."""
    label: str
    vartheta: float
    real: List[float]
    imag: List[float]


class IdealRunResult(BaseModel):
    """Cost of the fixed optimal law for one tau_inf (or a singular marker)."""
    tau_inf: float
    singular: bool = False
    cost: Optional[float] = None
    stabilizing: Optional[bool] = None
    message: Optional[str] = None


class RiccatiCheckRow(BaseModel):
    """Analytical P(tau) against the differential-Riccati oracle at one tau."""
    tau: float
    singular: bool = False
    cond_phi11: Optional[float] = None
    rel_gap: Optional[float] = Field(None, description="||P_hat(tau) - P(tau)|| / ||P(tau)||")
    steady_gap: Optional[float] = Field(None, description="||P_hat(tau) - P_steady|| / ||P_steady||")
    are_residual: Optional[float] = None
