#!/usr/bin/env python3
"""
Validators package for the surfactant simulator
Contains the run configuration schemas and loading utilities
"""

from .schemas import (
    SCHEMA_VERSION,
    RunConfigSchema,
    GridSchema,
    TensionSchema,
    validate_schema
)

from .utils import (
    load_run_config,
    parse_run_config,
    flatten_errors,
    validate_file_path
)

__all__ = [
    'SCHEMA_VERSION',
    'RunConfigSchema',
    'GridSchema',
    'TensionSchema',
    'validate_schema',
    'load_run_config',
    'parse_run_config',
    'flatten_errors',
    'validate_file_path'
]
