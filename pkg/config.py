#!/usr/bin/env python3
"""
Configuration management for the surfactant simulator
Handles process-level environment variables, validation and settings
"""

import os
from dataclasses import dataclass, field
from typing import List

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    # python-dotenv is optional; plain environment variables still work
    pass


def _parse_int(value: str, default: int) -> int:
    """Parse integer with error handling"""
    try:
        return int(value)
    except (ValueError, TypeError):
        print(f"Warning: Invalid integer value '{value}', using default {default}")
        return default


def _parse_float(value: str, default: float) -> float:
    """Parse float with error handling"""
    try:
        return float(value)
    except (ValueError, TypeError):
        print(f"Warning: Invalid numeric value '{value}', using default {default}")
        return default


def _parse_bool(value: str) -> bool:
    return str(value).lower() in ('true', '1', 'yes')


@dataclass
class Config:
    """Process-level configuration for the simulator"""

    # Worker threads for the FFTs
    SIM_THREADS: int = field(default_factory=lambda: _parse_int(os.getenv('SIM_THREADS', '1'), 1))

    # Logging Configuration
    LOG_LEVEL: str = field(default_factory=lambda: os.getenv('LOG_LEVEL', 'INFO'))
    LOG_DIR: str = field(default_factory=lambda: os.getenv('LOG_DIR', './logs'))
    LOG_MAX_BYTES: int = field(default_factory=lambda: _parse_int(os.getenv('LOG_MAX_BYTES', '10485760'), 10485760))  # 10MB
    LOG_BACKUP_COUNT: int = field(default_factory=lambda: _parse_int(os.getenv('LOG_BACKUP_COUNT', '5'), 5))
    LOG_JSON: bool = field(default_factory=lambda: _parse_bool(os.getenv('LOG_JSON', 'False')))

    # Output Configuration
    OUTPUT_DIR: str = field(default_factory=lambda: os.getenv('OUTPUT_DIR', ''))

    # Validity guards
    SLOPE_HARD_LIMIT: float = field(default_factory=lambda: _parse_float(os.getenv('SLOPE_HARD_LIMIT', '1.0'), 1.0))
    SLOPE_WARN_LIMIT: float = field(default_factory=lambda: _parse_float(os.getenv('SLOPE_WARN_LIMIT', '0.5'), 0.5))
    J_ABORT_LIMIT: float = field(default_factory=lambda: _parse_float(os.getenv('J_ABORT_LIMIT', '0.1'), 0.1))
    J_WARN_LIMIT: float = field(default_factory=lambda: _parse_float(os.getenv('J_WARN_LIMIT', '0.5'), 0.5))

    def validate(self) -> List[str]:
        """Validate configuration and return list of errors"""
        errors = []

        if self.SIM_THREADS < 1:
            errors.append("SIM_THREADS must be at least 1")

        valid_log_levels = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        if self.LOG_LEVEL.upper() not in valid_log_levels:
            errors.append(f"LOG_LEVEL must be one of: {', '.join(valid_log_levels)}")

        if self.LOG_MAX_BYTES <= 0:
            errors.append("LOG_MAX_BYTES must be positive")

        if self.LOG_BACKUP_COUNT < 0:
            errors.append("LOG_BACKUP_COUNT must be 0 or greater")

        if not 0.0 < self.SLOPE_WARN_LIMIT <= self.SLOPE_HARD_LIMIT:
            errors.append("SLOPE_WARN_LIMIT must be positive and not above SLOPE_HARD_LIMIT")

        if not 0.0 <= self.J_ABORT_LIMIT <= self.J_WARN_LIMIT < 1.0:
            errors.append("J limits must satisfy 0 <= J_ABORT_LIMIT <= J_WARN_LIMIT < 1")

        return errors

    def get_logging_config(self) -> dict:
        """Get logging configuration dictionary"""
        return {
            'log_level': self.LOG_LEVEL,
            'log_dir': self.LOG_DIR or None,
            'max_bytes': self.LOG_MAX_BYTES,
            'backup_count': self.LOG_BACKUP_COUNT,
            'json_format': self.LOG_JSON
        }

    def get_guard_config(self) -> dict:
        """Get validity guard thresholds"""
        return {
            'slope_hard': self.SLOPE_HARD_LIMIT,
            'slope_warn': self.SLOPE_WARN_LIMIT,
            'j_abort': self.J_ABORT_LIMIT,
            'j_warn': self.J_WARN_LIMIT
        }

    def get_fft_config(self) -> dict:
        """Get FFT worker configuration"""
        return {'workers': max(1, self.SIM_THREADS)}


def load_config() -> Config:
    """Load and validate configuration"""
    config = Config()

    errors = config.validate()
    if errors:
        print("Configuration errors:")
        for error in errors:
            print(f"   - {error}")
        raise ValueError("Invalid configuration")

    return config
