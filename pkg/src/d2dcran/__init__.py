"""Spectrum selection and minimum-power control for hybrid D2D / cloud-RAN networks."""

from .config import ConfigError, SystemConfig, load_config, parse_config
from .model import (
    BandIntensities,
    SirTargets,
    band_intensities,
    dvp_cellular_avg,
    dvp_cellular_conditional,
    dvp_outband_conditional,
    dvp_overlay_conditional,
    refined_intensities,
    sinc_norm,
    sir_target,
    sir_targets,
)
from .threshold import (
    InfeasibleThresholds,
    QuadCoefficients,
    Thresholds,
    iterate_thresholds,
    min_power_outband,
    min_power_overlay,
    quad_coefficients,
    solve_threshold,
    thresholds_monolithic,
    thresholds_worst_case,
)

__all__ = [
    "BandIntensities",
    "ConfigError",
    "InfeasibleThresholds",
    "QuadCoefficients",
    "SirTargets",
    "SystemConfig",
    "Thresholds",
    "band_intensities",
    "dvp_cellular_avg",
    "dvp_cellular_conditional",
    "dvp_outband_conditional",
    "dvp_overlay_conditional",
    "iterate_thresholds",
    "load_config",
    "min_power_outband",
    "min_power_overlay",
    "parse_config",
    "quad_coefficients",
    "refined_intensities",
    "sinc_norm",
    "sir_target",
    "sir_targets",
    "solve_threshold",
    "thresholds_monolithic",
    "thresholds_worst_case",
]

__version__ = "0.1.0"
