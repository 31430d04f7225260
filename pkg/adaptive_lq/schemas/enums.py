# File: adaptive_lq/schemas/enums.py
"""Enum definitions for scenario and reporting options."""
from enum import Enum


class ReferenceKind(str, Enum):
    """Shape of the reference signal r(t)."""
    CONSTANT = "constant"
    EXPONENTIAL = "exponential"
    PIECEWISE = "piecewise"


class NormKind(str, Enum):
    """Matrix norm used when reporting approximation errors."""
    SPECTRAL = "spectral"
    FROBENIUS = "frobenius"


class Subcommand(str, Enum):
    """CLI subcommands."""
    RUN = "run"
    TABLE1 = "table1"
    SPECTRA = "spectra"
    RICCATI_CHECK = "riccati-check"
    IDEAL_SWEEP = "ideal-sweep"
