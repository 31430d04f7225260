# File: adaptive_lq/schemas/scenario.py
"""Scenario schemas: plant, weights, filter/adaptation tuning and reference signal."""
import logging
import math
from typing import List, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationInfo,
    field_validator,
    model_validator,
)

from .enums import ReferenceKind

logger = logging.getLogger(__name__)

MatrixRows = List[List[float]]

# Upper bound on the Taylor degree; the parameterization needs p bounded
MAX_TAYLOR_DEGREE = 200


def _check_matrix(rows: MatrixRows, name: str) -> MatrixRows:
    if not rows or not rows[0]:
        raise ValueError(f"{name} must have at least one row and one column")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{name} row {i} has {len(row)} entries, expected {width}")
        for value in row:
            if not math.isfinite(value):
                raise ValueError(f"{name} contains a non-finite entry")
    return rows


def _shape(rows: MatrixRows) -> tuple:
    return len(rows), len(rows[0])


def _is_spd(rows: MatrixRows) -> bool:
    m = np.asarray(rows, dtype=float)
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(m).max()))):
        return False
    return bool(np.all(np.linalg.eigvalsh(m) > 0.0))


class PlantSpec(BaseModel):
    """Open-loop plant x_p' = A_p x_p + B_p u with tracked output z = C_p^T x_p."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    a_p: MatrixRows = Field(..., description="State matrix, n_p x n_p (unknown to the controller)")
    b_p: MatrixRows = Field(..., description="Input matrix, n_p x m (unknown to the controller)")
    c_p: MatrixRows = Field(..., description="Output map, n_p x m")

    @field_validator("a_p", "b_p", "c_p")
    @classmethod
    def validate_rectangular(cls, rows: MatrixRows, info: ValidationInfo) -> MatrixRows:
        return _check_matrix(rows, info.field_name)

    @model_validator(mode="after")
    def validate_dimensions(self) -> "PlantSpec":
        n_p, cols = _shape(self.a_p)
        if n_p != cols:
            raise ValueError(f"a_p must be square, got {n_p}x{cols}")
        b_rows, m = _shape(self.b_p)
        if b_rows != n_p:
            raise ValueError(f"b_p must have {n_p} rows, got {b_rows}")
        if _shape(self.c_p) != (n_p, m):
            raise ValueError(f"c_p must be {n_p}x{m}, got {_shape(self.c_p)}")
        return self

    @property
    def n_p(self) -> int:
        return len(self.a_p)

    @property
    def m(self) -> int:
        return len(self.b_p[0])


class WeightsSpec(BaseModel):
    """Quadratic cost weights Q (states) and R (controls)."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    q: MatrixRows = Field(..., description="State weight, n x n, symmetric positive definite")
    r: MatrixRows = Field(..., description="Control weight, m x m, symmetric positive definite")

    @field_validator("q", "r")
    @classmethod
    def validate_weight(cls, rows: MatrixRows, info: ValidationInfo) -> MatrixRows:
        _check_matrix(rows, info.field_name)
        if not _is_spd(rows):
            raise ValueError(f"{info.field_name} must be symmetric positive definite")
        return rows


class PipelineParams(BaseModel):
    """Filter, mixing, averaging and Taylor parameters of the regression pipeline."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    l: float = Field(..., gt=0.0, description="State-filter pole; keep e^{-l t} slower than the plant transients")
    k0: float = Field(..., gt=0.0, description="Pole of the mixing filters")
    k1: float = Field(..., gt=0.0, description="Normalization gain; k1*det(phibar_f) should be O(1) while excited")
    sigma: float = Field(..., gt=0.0, description="Forgetting rate of the averaging filter")
    p: int = Field(..., ge=1, le=MAX_TAYLOR_DEGREE, description="Taylor degree of the Hamiltonian exponential")
    tau_inf: float = Field(..., gt=0.0, description="Horizon at which P is read from the Hamiltonian flow")
    t_start: float = Field(0.0, ge=0.0, description="Filter reset instant")
    regression_scale: float = Field(
        1.0,
        gt=0.0,
        description="Scale c applied to (y_theta, Delta) before averaging; rho must then be scaled by c^2",
    )


class AdaptGains(BaseModel):
    """Gains of the gain-scheduled adaptive law."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    gamma0: float = Field(..., ge=1.0, description="Regressor-proportional gain, at least 1")
    gamma1: float = Field(..., ge=0.0, description="Minimum convergence rate")
    rho: float = Field(..., gt=0.0, description="Activation threshold on Omega")


class ReferenceStep(BaseModel):
    """One switch of a piecewise-constant reference."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    t: float = Field(..., ge=0.0)
    value: List[float] = Field(..., min_length=1)


class ReferenceSpec(BaseModel):
    """Reference signal: constant, value*exp(-rate*t) or a piecewise-constant schedule."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ReferenceKind = Field(ReferenceKind.CONSTANT)
    value: List[float] = Field(..., min_length=1, description="Level (or amplitude at t=0)")
    rate: float = Field(0.0, ge=0.0, description="Decay rate for exponential references")
    schedule: List[ReferenceStep] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_schedule(self) -> "ReferenceSpec":
        m = len(self.value)
        last_t = -1.0
        for step in self.schedule:
            if len(step.value) != m:
                raise ValueError(f"schedule value at t={step.t} has {len(step.value)} entries, expected {m}")
            if step.t <= last_t:
                raise ValueError("schedule switch times must be strictly increasing")
            last_t = step.t
        if self.kind != ReferenceKind.PIECEWISE and self.schedule:
            logger.warning(f"Ignoring schedule on a '{self.kind.value}' reference")
        return self

    @property
    def m(self) -> int:
        return len(self.value)

    def evaluate(self, t: float) -> np.ndarray:
        """Reference value r(t)."""
        if self.kind == ReferenceKind.EXPONENTIAL:
            return np.asarray(self.value, dtype=float) * math.exp(-self.rate * t)
        if self.kind == ReferenceKind.PIECEWISE:
            current = self.value
            for step in self.schedule:
                if t >= step.t:
                    current = step.value
                else:
                    break
            return np.asarray(current, dtype=float)
        return np.asarray(self.value, dtype=float)

    def change_times(self) -> List[float]:
        """Instants where a piecewise reference jumps."""
        if self.kind != ReferenceKind.PIECEWISE:
            return []
        return [step.t for step in self.schedule]


class Scenario(BaseModel):
    """A complete closed-loop experiment."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field("custom", min_length=1)
    plant: PlantSpec
    vartheta: float = Field(..., description="Weight of the integral tracking error, non-zero")
    weights: WeightsSpec
    pipeline: PipelineParams
    gains: AdaptGains
    theta_hat0: MatrixRows = Field(..., description="Initial controller parameters, (n+m) x m")
    x0: List[float] = Field(..., min_length=1, description="Initial augmented state, length n")
    reference: ReferenceSpec
    duration: float = Field(..., gt=0.0, description="Simulated seconds")
    dt: float = Field(1e-4, gt=0.0, description="Shared Euler step")
    reset_on_reference_change: bool = Field(False)

    @field_validator("theta_hat0", mode="before")
    @classmethod
    def normalize_theta(cls, v: Union[MatrixRows, List[float]]) -> MatrixRows:
        # a flat list is read as a single-input column
        if isinstance(v, list) and v and not isinstance(v[0], list):
            return [[float(x)] for x in v]
        return v

    @field_validator("vartheta")
    @classmethod
    def validate_vartheta(cls, v: float) -> float:
        if v == 0.0 or not math.isfinite(v):
            raise ValueError("vartheta must be finite and non-zero")
        return v

    @model_validator(mode="after")
    def validate_dimensions(self) -> "Scenario":
        n = self.n
        m = self.m
        _check_matrix(self.theta_hat0, "theta_hat0")
        if _shape(self.weights.q) != (n, n):
            raise ValueError(f"weights.q must be {n}x{n}, got {_shape(self.weights.q)}")
        if _shape(self.weights.r) != (m, m):
            raise ValueError(f"weights.r must be {m}x{m}, got {_shape(self.weights.r)}")
        if _shape(self.theta_hat0) != (n + m, m):
            raise ValueError(f"theta_hat0 must be {n + m}x{m}, got {_shape(self.theta_hat0)}")
        if len(self.x0) != n:
            raise ValueError(f"x0 must have {n} entries, got {len(self.x0)}")
        if self.reference.m != m:
            raise ValueError(f"reference must have {m} entries, got {self.reference.m}")
        if self.duration < self.dt:
            raise ValueError(f"duration {self.duration} shorter than dt {self.dt}")
        return self

    @property
    def m(self) -> int:
        return self.plant.m

    @property
    def n(self) -> int:
        return self.plant.n_p + self.plant.m

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.dt))

    def with_overrides(self, **updates: object) -> "Scenario":
        """Copy with top-level or nested PipelineParams/AdaptGains fields replaced, re-validated."""
        data = self.model_dump()
        pipeline_fields = set(PipelineParams.model_fields)
        gain_fields = set(AdaptGains.model_fields)
        for key, value in updates.items():
            if key in pipeline_fields:
                data["pipeline"][key] = value
            elif key in gain_fields:
                data["gains"][key] = value
            elif key in Scenario.model_fields:
                data[key] = value
            else:
                raise ValueError(f"Unknown override '{key}'")
        return Scenario.model_validate(data)


def scenario_dimension_summary(s: Scenario) -> str:
    """Short human-readable dimension line used in log messages."""
    return f"n_p={s.plant.n_p}, m={s.m}, n={s.n}, ticks={s.n_ticks}"
