#!/usr/bin/env python3
"""
Typed run configuration produced by the RunConfig schema
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from ..numerics.dynamics import InitialDataSpec
from ..numerics.spectral import GridSpec
from ..numerics.tension import TensionModel

OUTPUT_FORMATS = ('csv', 'json', 'dump')


@dataclass(frozen=True)
class SteppingConfig:
    dt: float
    t_end: float
    scheme: str = 'imex1'
    stride: int = 1
    corrector: bool = False

    @property
    def steps(self) -> int:
        """Number of steps to reach t_end (the last one may overshoot by less than dt)"""
        return max(1, int(round(self.t_end / self.dt)))


@dataclass(frozen=True)
class DiagnosticsConfig:
    sobolev: bool = True
    partial_budgets: bool = True
    transient: float = 0.2


@dataclass(frozen=True)
class OutputConfig:
    directory: Optional[str] = None  # resolved by the run service
    formats: Tuple[str, ...] = ('csv', 'json')
    checkpoint_every: int = 0


@dataclass(frozen=True)
class RunConfig:
    """One validated simulation run"""
    name: str
    seed: int
    grid: GridSpec
    model: TensionModel
    gamma: float
    initial: InitialDataSpec
    stepping: SteppingConfig
    diagnostics: DiagnosticsConfig
    output: OutputConfig
    raw: Dict[str, Any] = field(default_factory=dict, compare=False)
