#!/usr/bin/env python3
"""
Error types for the surfactant free-surface simulator
Every numerical failure the kernels can signal derives from SimulationError
"""

from typing import Any, Dict, Optional


class SimulationError(Exception):
    """Base class for simulator errors"""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.context = dict(context or {})


class ConfigError(SimulationError):
    """Run configuration could not be read or validated"""


class GridMismatch(SimulationError, ValueError):
    """Fields live on different grids or have incompatible shapes"""


class NumericalAbort(SimulationError):
    """Errors that stop a run and trigger a state dump"""


class SlopeTooLarge(NumericalAbort):
    """max |grad eta| left the small-slope regime"""


class DegenerateMap(NumericalAbort):
    """The flattening map is no longer a diffeomorphism (J too small)"""


class SingularMode(NumericalAbort):
    """A per-mode linear system could not be factorized"""


class InvalidConcentration(NumericalAbort):
    """Surfactant concentration is not strictly positive"""


class IncompatibleData(SimulationError):
    """Boundary-value data violate the mean-mode solvability condition"""


class CompatibilityFailed(SimulationError):
    """Fixed-point construction of compatible initial velocity did not converge"""


class OutOfRange(SimulationError, ValueError):
    """Argument outside the validity window of the tension model"""


class Singular(SimulationError, ZeroDivisionError):
    """Evaluation at a point where the formula is singular"""


class FitDomainError(SimulationError, ValueError):
    """Decay fit requested on a non-positive series"""


class InsufficientHistory(SimulationError):
    """Not enough samples or stored states for a finite difference"""
