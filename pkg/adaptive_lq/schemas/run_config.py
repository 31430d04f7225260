# File: adaptive_lq/schemas/run_config.py
"""Schema of the YAML config document read by the CLI."""
from pathlib import Path
from typing import Dict, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .scenario import AdaptGains, PipelineParams, Scenario

OVERRIDABLE_FIELDS = set(PipelineParams.model_fields) | set(AdaptGains.model_fields) | {
    "duration",
    "dt",
    "reset_on_reference_change",
}


class EmitFlags(BaseModel):
    """Which artifacts a `run` writes."""
    model_config = ConfigDict(extra="forbid")

    trace: bool = Field(True, description="Write trace.csv")
    summary: bool = Field(True, description="Write summary.txt")
    table1: bool = Field(False, description="Also write the Taylor truncation grid")
    spectra: bool = Field(False, description="Also write the Hamiltonian spectra report")


class RunConfig(BaseModel):
    """Validated config document.

    Either ``preset`` names a built-in scenario or ``scenario`` defines one inline.
    ``overrides`` replaces single PipelineParams / AdaptGains fields (plus
    duration, dt and the reset flag) and is re-validated against their bounds.
    """
    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = Field(None, description="Name of a built-in scenario")
    scenario: Optional[Scenario] = Field(None, description="Inline scenario definition")
    output_dir: Optional[Path] = Field(None, description="Directory for emitted files")
    decimation: Optional[int] = Field(None, ge=1, description="Keep every k-th trace sample")
    full_rate: bool = Field(False, description="Emit every tick regardless of decimation")
    emit: EmitFlags = Field(default_factory=EmitFlags)
    overrides: Dict[str, Union[float, bool]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_selection(self) -> "RunConfig":
        if self.preset is not None and self.scenario is not None:
            raise ValueError("give either 'preset' or 'scenario', not both")
        unknown = sorted(set(self.overrides) - OVERRIDABLE_FIELDS)
        if unknown:
            raise ValueError(f"unknown override key(s): {', '.join(unknown)}")
        return self
