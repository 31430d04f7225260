# File: adaptive_lq/utils/config_loader.py
"""Reading, writing and resolving YAML config documents."""
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import ValidationError

from ..exceptions import ArtifactIOError, ConfigError, ParameterError
from ..presets import get_preset
from ..schemas.run_config import RunConfig
from ..schemas.scenario import Scenario

logger = logging.getLogger(__name__)


def _error_key(e: ValidationError) -> Optional[str]:
    errors = e.errors()
    if not errors:
        return None
    return ".".join(str(part) for part in errors[0].get("loc", ())) or None


def parse_config(text: str) -> RunConfig:
    """
    Parse a YAML config document.

    Raises:
        ConfigError: YAML syntax error (with 1-based line/column) or a schema
            violation (naming the offending key)
    """
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark or e.context_mark
        line = mark.line + 1 if mark is not None else None
        column = mark.column + 1 if mark is not None else None
        raise ConfigError(f"Invalid YAML: {e.problem or e}", line=line, column=column) from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML: {e}") from e

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config document must be a mapping, got {type(data).__name__}")

    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]["msg"] if e.errors() else str(e)
        raise ConfigError(f"Invalid config: {first}", key=_error_key(e)) from e


def config_to_dict(config: RunConfig) -> Dict[str, Any]:
    return config.model_dump(mode="json", exclude_none=True)


def emit_config(config: RunConfig) -> str:
    """YAML text that parses back to an equal RunConfig."""
    return yaml.safe_dump(config_to_dict(config), sort_keys=False, default_flow_style=None)


def load_config_file(path: Path) -> RunConfig:
    """Read and parse a config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(path, e) from e
    logger.debug(f"Loaded config document {path}")
    return parse_config(text)


def save_config_file(config: RunConfig, path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(emit_config(config), encoding="utf-8", newline="\n")
    except OSError as e:
        raise ArtifactIOError(path, e) from e
    return path


def resolve_scenario(config: RunConfig) -> Scenario:
    """
    Scenario selected by a config: the preset (or inline definition) with the
    overrides applied one key at a time.

    Raises:
        ConfigError: no scenario selected, or an override breaks a field bound
    """
    if config.scenario is not None:
        scenario = config.scenario
    elif config.preset is not None:
        try:
            scenario = get_preset(config.preset)
        except ParameterError as e:
            raise ConfigError(str(e), key="preset") from e
    else:
        raise ConfigError("Config selects no scenario: set 'preset' or 'scenario'")

    for key, value in config.overrides.items():
        try:
            scenario = scenario.with_overrides(**{key: value})
        except ValueError as e:
            raise ConfigError(f"Override rejected: {e}", key=f"overrides.{key}") from e
        logger.info(f"Scenario {scenario.name}: override {key}={value}")
    return scenario
