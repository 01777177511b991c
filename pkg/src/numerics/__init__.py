#!/usr/bin/env python3
"""
Numerical kernels of the surfactant simulator
Spectral fields, surface operators, tension closure, flattening geometry,
per-mode linear solves, the IMEX stepper and diagnostics
"""

from .errors import (
    SimulationError,
    ConfigError,
    NumericalAbort,
    SlopeTooLarge,
    DegenerateMap,
    SingularMode,
    InvalidConcentration,
    IncompatibleData,
    CompatibilityFailed,
    OutOfRange,
    FitDomainError,
)
from .spectral import GridSpec, SurfaceField, BulkField

__all__ = [
    'SimulationError',
    'ConfigError',
    'NumericalAbort',
    'SlopeTooLarge',
    'DegenerateMap',
    'SingularMode',
    'InvalidConcentration',
    'IncompatibleData',
    'CompatibilityFailed',
    'OutOfRange',
    'FitDomainError',
    'GridSpec',
    'SurfaceField',
    'BulkField',
]
