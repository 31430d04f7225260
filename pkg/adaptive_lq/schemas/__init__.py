# Pydantic schemas for scenarios, config documents and results
from .enums import NormKind, ReferenceKind, Subcommand
from .results import IdealRunResult, RiccatiCheckRow, RunSummary, SpectrumReport, Table1Cell
from .run_config import EmitFlags, RunConfig
from .scenario import (
    AdaptGains,
    PipelineParams,
    PlantSpec,
    ReferenceSpec,
    ReferenceStep,
    Scenario,
    WeightsSpec,
)

__all__ = [
    "NormKind",
    "ReferenceKind",
    "Subcommand",
    "IdealRunResult",
    "RiccatiCheckRow",
    "RunSummary",
    "SpectrumReport",
    "Table1Cell",
    "EmitFlags",
    "RunConfig",
    "AdaptGains",
    "PipelineParams",
    "PlantSpec",
    "ReferenceSpec",
    "ReferenceStep",
    "Scenario",
    "WeightsSpec",
]
