"""Thermal- and kernel-aware task migration on a simulated 3D many-core chip."""

from ._core import (
    CalibrationError,
    ConfigError,
    FitError,
    PolicyNet,
    amd_table,
    cli,
    config_to_json,
    evaluate,
    ips_at,
    kernels,
    mean_amd,
    mpki,
    parse_config,
    run_episode,
    steady_state,
)

__all__ = [
    "CalibrationError",
    "ConfigError",
    "FitError",
    "PolicyNet",
    "amd_table",
    "cli",
    "config_to_json",
    "evaluate",
    "ips_at",
    "kernels",
    "mean_amd",
    "mpki",
    "parse_config",
    "run_episode",
    "steady_state",
]
