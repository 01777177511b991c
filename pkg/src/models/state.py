#!/usr/bin/env python3
"""
State models for the surfactant simulator
Flow state, explicit forcing pack and budget samples
"""

import math
from dataclasses import dataclass, field, fields
from typing import Dict, Optional, Tuple

import numpy as np

from ..numerics.spectral import BulkField, GridSpec, SurfaceField

BulkVector = Tuple[BulkField, BulkField, BulkField]
SurfaceVector = Tuple[SurfaceField, SurfaceField, SurfaceField]


@dataclass
class FlowState:
    """Complete simulation state in flattened coordinates"""
    u: BulkVector
    p: BulkField
    eta: SurfaceField
    ctilde: SurfaceField
    t: float = 0.0
    step: int = 0

    @property
    def grid(self) -> GridSpec:
        return self.eta.grid

    def perturbation(self, c0: float) -> SurfaceField:
        """c = ctilde - c0"""
        return self.ctilde - c0

    def copy(self) -> 'FlowState':
        return FlowState(
            u=tuple(ui.copy() for ui in self.u),
            p=self.p.copy(),
            eta=self.eta.copy(),
            ctilde=self.ctilde.copy(),
            t=self.t,
            step=self.step,
        )

    def scaled(self, epsilon: float, c0: float) -> 'FlowState':
        """State with every perturbation multiplied by epsilon (ctilde about c0)"""
        return FlowState(
            u=tuple(ui * epsilon for ui in self.u),
            p=self.p * epsilon,
            eta=self.eta * epsilon,
            ctilde=(self.ctilde - c0) * epsilon + c0,
            t=self.t,
            step=self.step,
        )

    @classmethod
    def equilibrium(cls, grid: GridSpec, c0: float) -> 'FlowState':
        return cls(
            u=tuple(BulkField.zeros(grid) for _ in range(3)),
            p=BulkField.zeros(grid),
            eta=SurfaceField.zeros(grid),
            ctilde=SurfaceField.constant(grid, c0),
        )

    def arrays(self) -> Dict[str, np.ndarray]:
        """Named coefficient arrays, the layout used by state dumps"""
        return {
            'u1': self.u[0].coeffs, 'u2': self.u[1].coeffs, 'u3': self.u[2].coeffs,
            'p': self.p.coeffs, 'eta': self.eta.coeffs, 'ctilde': self.ctilde.coeffs,
        }

    @classmethod
    def from_arrays(cls, grid: GridSpec, arrays: Dict[str, np.ndarray], t: float, step: int) -> 'FlowState':
        return cls(
            u=tuple(BulkField(grid, arrays[name]) for name in ('u1', 'u2', 'u3')),
            p=BulkField(grid, arrays['p']),
            eta=SurfaceField(grid, arrays['eta']),
            ctilde=SurfaceField(grid, arrays['ctilde']),
            t=float(t),
            step=int(step),
        )


@dataclass
class ForcingPack:
    """Explicit right-hand sides G1..G5; `blocks` keeps the named sub-terms"""
    G1: BulkVector
    G2: BulkField
    G3: SurfaceVector
    G4: SurfaceField
    G5: SurfaceField
    blocks: Dict[str, tuple] = field(default_factory=dict)

    def combine(self, other: 'ForcingPack', a: float, b: float) -> 'ForcingPack':
        """a * self + b * other, sub-terms dropped"""
        return ForcingPack(
            G1=tuple(x * a + y * b for x, y in zip(self.G1, other.G1)),
            G2=self.G2 * a + other.G2 * b,
            G3=tuple(x * a + y * b for x, y in zip(self.G3, other.G3)),
            G4=self.G4 * a + other.G4 * b,
            G5=self.G5 * a + other.G5 * b,
        )

    def max_abs(self) -> float:
        parts = list(self.G1) + [self.G2] + list(self.G3) + [self.G4, self.G5]
        return max(part.max_abs() for part in parts)


CSV_COLUMNS = ('t', 'E_phys', 'D_phys', 'mass', 'E_sob', 'D_sob', 'eta_mean', 'compat', 'residual')


@dataclass
class BudgetSample:
    """One row of the budget time series"""
    t: float
    E_phys: float
    D_phys: float
    mass: float
    E_sob: Optional[float] = None
    D_sob: Optional[float] = None
    eta_mean: float = 0.0
    compat: float = 0.0
    residual: Optional[float] = None
    partial: Dict[str, float] = field(default_factory=dict)

    def row(self) -> Dict[str, float]:
        """CSV row in column order; undefined values become nan"""
        return {name: (math.nan if getattr(self, name) is None else float(getattr(self, name)))
                for name in CSV_COLUMNS}

    def to_dict(self) -> Dict[str, object]:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['partial'] = dict(self.partial)
        return data
