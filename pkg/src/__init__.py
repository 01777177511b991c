#!/usr/bin/env python3
"""
Surfactant free-surface simulator - Source Package
Pseudo-spectral numerics in flattened coordinates, run services and output helpers
"""

__version__ = "1.0.0"

# numerics first: models and services import from it
from .numerics import GridSpec, SurfaceField, BulkField, SimulationError
from .numerics.tension import TensionModel
from .models import FlowState, StateStore
from .services import SimulationService, VerificationService, ExportService
from .validators import load_run_config, parse_run_config
from .utils.logging_config import setup_logging

__all__ = [
    'GridSpec',
    'SurfaceField',
    'BulkField',
    'SimulationError',
    'TensionModel',
    'FlowState',
    'StateStore',
    'SimulationService',
    'VerificationService',
    'ExportService',
    'load_run_config',
    'parse_run_config',
    'setup_logging'
]
