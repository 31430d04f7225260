# File: adaptive_lq/config.py
"""
Centralized configuration using Pydantic Settings.
Supports environment variables and .env files with type validation.

Only process-wide numeric knobs live here. Scenario values (plant, weights,
filter and adaptation gains) come from presets or a YAML config document.
"""
import logging
from functools import lru_cache
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .schemas.enums import NormKind

logger = logging.getLogger(__name__)

VALID_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # Directories
    OUTPUT_DIR: Path = Field(default=Path("alq_output"), description="Default directory for traces and reports")

    # Logging
    LOG_LEVEL: str = Field(default="INFO")

    # Trace output
    TRACE_DECIMATION: int = Field(default=100, ge=1, description="Keep every k-th sample in CSV output")

    # Riccati machinery
    SINGULARITY_COND_LIMIT: float = Field(default=1e14, gt=1.0, description="Max condition number of the single-shot Phi_11")
    RICCATI_CHAIN_NORM: float = Field(default=0.5, gt=0.0, le=2.0, description="Max ||D h|| of one step of the Phi_21 Phi_11^-1 chain")
    RICCATI_STEADY_TOL: float = Field(default=1e-10, gt=0.0, description="||dP/dtau||_F / ||Q||_F treated as steady")
    RICCATI_DIVERGENCE_LIMIT: float = Field(default=1e12, gt=0.0, description="Norm of P treated as divergence")
    RICCATI_STEP: float = Field(default=1e-3, gt=0.0, description="Sampling step of the differential Riccati oracle")
    RICCATI_HORIZON: float = Field(default=60.0, gt=0.0, description="Hard cap on the oracle integration horizon")

    # Matrix exponential
    ORACLE_TAYLOR_DEGREE: int = Field(default=30, ge=10, le=60)
    ORACLE_SCALED_NORM: float = Field(default=0.5, gt=0.0, le=1.0)
    TABLE1_NORM: NormKind = Field(default=NormKind.FROBENIUS, description="Norm used to report Taylor truncation errors")

    @field_validator('LOG_LEVEL')
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in VALID_LOG_LEVELS:
            logger.warning(f"Unknown log level '{v}', using default 'INFO'")
            return 'INFO'
        return level

    @field_validator('ORACLE_TAYLOR_DEGREE')
    @classmethod
    def validate_oracle_degree(cls, v: int) -> int:
        # below ~20 terms the scaled series no longer reaches machine precision
        if v < 20:
            logger.warning(f"Oracle Taylor degree {v} is too low for a reference exponential, using 30")
            return 30
        return v


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# Create singleton instance
settings = get_settings()

# Log configuration on import
logger.info("Configuration Loaded:")
logger.info(f"  - Trace decimation: {settings.TRACE_DECIMATION}")
logger.info(f"  - Singularity limit: {settings.SINGULARITY_COND_LIMIT:.1e}")
logger.info(f"  - Table norm: {settings.TABLE1_NORM.value}")
logger.info(f"  - Output dir: {settings.OUTPUT_DIR}")
