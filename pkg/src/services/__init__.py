#!/usr/bin/env python3
"""
Services package for the surfactant simulator
Run orchestration, verification suites and state export
"""

from .simulation_service import SimulationService
from .verification_service import VerificationService, CheckResult, SUITES
from .export_service import ExportService

__all__ = [
    'SimulationService',
    'VerificationService',
    'CheckResult',
    'SUITES',
    'ExportService'
]
