# File: adaptive_lq/exceptions.py
"""Typed errors raised by the regulator library and their CLI exit codes."""
from typing import Optional

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2


class AdaptiveLqError(Exception):
    """Base class for every error the package raises on purpose."""


# --- Validation family (exit code 1) ---

class ValidationFailure(AdaptiveLqError, ValueError):
    """Inputs violate a documented precondition."""


class DimensionError(ValidationFailure):
    """Matrix or vector shapes are inconsistent."""


class ParameterError(ValidationFailure):
    """A scalar parameter is outside its allowed range."""


class WeightError(ValidationFailure):
    """Cost weights are singular or not positive definite."""


class ControllabilityError(ValidationFailure):
    """The plant augmented with the integral error is not controllable."""


class TraceError(ValidationFailure):
    """Sampled series are misaligned."""


class WindowError(ValidationFailure):
    """An integration window holds no samples."""


class StepError(ValidationFailure):
    """Non-positive integration step."""


class ConfigError(ValidationFailure):
    """A config document could not be parsed or validated."""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
        key: Optional[str] = None,
    ):
        self.line = line
        self.column = column
        self.key = key
        location = ""
        if line is not None:
            location = f" (line {line}, column {column})"
        elif key:
            location = f" (key '{key}')"
        super().__init__(f"{message}{location}")


class UsageError(ValidationFailure):
    """The command line could not be parsed."""


class ArtifactIOError(AdaptiveLqError, OSError):
    """An output or input file could not be written or read."""

    def __init__(self, path: object, reason: object):
        self.path = path
        super().__init__(f"I/O error on {path}: {reason}")


# --- Numeric family (exit code 2) ---

class NumericError(AdaptiveLqError, ArithmeticError):
    """A computation produced an unusable numeric result."""


class MatrixOverflowError(NumericError):
    """A non-finite value appeared in an intermediate product."""

    def __init__(
        self,
        stage: str,
        k: Optional[int] = None,
        magnitude: Optional[float] = None,
        hint: str = "",
    ):
        self.stage = stage
        self.k = k
        self.magnitude = magnitude
        self.hint = hint
        msg = f"Non-finite value in {stage}"
        if k is not None:
            msg += f" at term k={k}"
        if magnitude is not None:
            msg += f" (last finite magnitude {magnitude:.3e})"
        if hint:
            msg += f". {hint}"
        super().__init__(msg)


class SingularityError(NumericError):
    """A matrix that must be inverted is numerically singular."""

    def __init__(self, what: str, condition: float, limit: float):
        self.what = what
        self.condition = condition
        self.limit = limit
        super().__init__(
            f"{what} is singular (condition number {condition:.3e} > {limit:.1e}). "
            "The Hamiltonian spectrum is too widely spread for this tau_inf: "
            "lower tau_inf or raise vartheta"
        )


class InstabilityError(NumericError):
    """An integration diverged."""


K1_RETUNE_HINT = (
    "Retune k1 so that k1*det(phibar_f) stays of order one over the excitation window"
)
RESCALE_HINT = (
    "Set regression_scale < 1 to shrink (y_theta, Delta) and rescale rho by its square"
)


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the documented CLI exit code."""
    # FloatingPointError / OverflowError from numpy or math count as numeric
    if isinstance(exc, ArithmeticError):
        return EXIT_NUMERIC
    return EXIT_VALIDATION
