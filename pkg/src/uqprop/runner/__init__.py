"""Scenario configuration, execution and export."""

from uqprop.runner.config import (
    SCHEMA,
    SCHEMA_VERSION,
    ConfigError,
    Scenario,
    build_model,
    bundled_scenarios,
    config_hash,
    dump_config,
    load_config,
    read_config,
    validate,
)
from uqprop.runner.pipeline import RunResult, run_scenario

__all__ = [
    "SCHEMA",
    "SCHEMA_VERSION",
    "ConfigError",
    "RunResult",
    "Scenario",
    "build_model",
    "bundled_scenarios",
    "config_hash",
    "dump_config",
    "load_config",
    "read_config",
    "run_scenario",
    "validate",
]
