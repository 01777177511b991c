#!/usr/bin/env python3
"""
Utility modules for the surfactant simulator
"""

from .logging_config import (
    setup_logging,
    log_error,
    log_step_event,
    log_guard_event,
    log_suite_result
)

from .helpers import (
    CSVSeriesWriter,
    read_csv_series,
    write_json,
    validate_json_file,
    file_hash,
    format_float,
    format_table
)

__all__ = [
    'setup_logging',
    'log_error',
    'log_step_event',
    'log_guard_event',
    'log_suite_result',
    'CSVSeriesWriter',
    'read_csv_series',
    'write_json',
    'validate_json_file',
    'file_hash',
    'format_float',
    'format_table'
]
