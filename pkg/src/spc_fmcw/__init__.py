"""Heterodyne FMCW leakage simulation with stationary-point down-conversion."""

__version__ = "0.1.0"

from .errors import ConfigError, SpcError
from .phase_noise import DEFAULT_LO_PROFILE, PsdProfile, estimate_psd, synthesize_noise
from .pipeline import ProcessingSettings, simulate
from .scenario import ChirpGeometry, ScenarioConfig, synthesize_if_frame, table1_geometry, validate_plan
from .spc import common_downconvert, estimate_leakage, spc_downconvert
from .spectral import improvement_curve, power_spectrum

__all__ = [
    "ChirpGeometry",
    "ConfigError",
    "DEFAULT_LO_PROFILE",
    "ProcessingSettings",
    "PsdProfile",
    "ScenarioConfig",
    "SpcError",
    "common_downconvert",
    "estimate_leakage",
    "estimate_psd",
    "improvement_curve",
    "power_spectrum",
    "simulate",
    "spc_downconvert",
    "synthesize_if_frame",
    "synthesize_noise",
    "table1_geometry",
    "validate_plan",
]
