#!/usr/bin/env python3
"""
Energy, dissipation and mass diagnostics with their budgets
Physical energy-dissipation balance, Sobolev functionals and decay-rate fitting
"""

import logging
from collections import deque
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.state import BudgetSample, FlowState
from .errors import FitDomainError, InsufficientHistory
from .geometry import GeometryPack, calA_sym_grad_values
from .spectral import (
    SurfaceField,
    deriv_horizontal,
    integrate_bulk_values,
    integrate_surface,
    integrate_surface_values,
    sobolev_norm_bulk,
    sobolev_norm_surface,
)
from .surface_ops import SurfaceGeometry, div_gamma, surface_mass
from .tension import TensionModel, xi, xi_second

logger = logging.getLogger(__name__)

DEFAULT_TRANSIENT = 0.2
PARTIAL_KEYS = ('E_fluid', 'D_fluid', 'X_fluid', 'E_surf', 'D_surf', 'X_surf')


def _grad_gamma_sq(ctilde: SurfaceField, geom: SurfaceGeometry) -> np.ndarray:
    c1 = deriv_horizontal(ctilde, 1).padded_values()
    c2 = deriv_horizontal(ctilde, 2).padded_values()
    n1, n2, n3 = geom.nu_phys
    s = n1 * c1 + n2 * c2
    return (c1 - n1 * s) ** 2 + (c2 - n2 * s) ** 2 + (n3 * s) ** 2


def _kinetic(state: FlowState, pack: GeometryPack) -> float:
    speed = sum(ui.padded_values() ** 2 for ui in state.u)
    return 0.5 * integrate_bulk_values(speed * pack.J_phys, state.grid)


def _viscous(state: FlowState, pack: GeometryPack) -> float:
    D = calA_sym_grad_values(pack, state.u)
    return 0.5 * integrate_bulk_values(np.sum(D ** 2, axis=(0, 1)) * pack.J_phys, state.grid)


def physical_budget(state: FlowState, pack: GeometryPack, geom: SurfaceGeometry,
                    model: TensionModel, gamma: float) -> BudgetSample:
    """Energy, dissipation and surfactant mass of one state

    The constant sigma(c0)|Sigma| is subtracted from the entropy so the
    equilibrium energy is zero.
    """
    grid = state.grid
    c0 = float(model.c0)
    ct = state.ctilde.padded_values()
    area = geom.area_phys

    eta = state.eta.padded_values()
    entropy = integrate_surface_values(np.asarray(xi(model, c0, ct)) * area, grid)
    E_phys = _kinetic(state, pack) + 0.5 * integrate_surface_values(eta ** 2, grid) \
        + entropy - float(model.sigma(c0)) * grid.area

    grad_sq = _grad_gamma_sq(state.ctilde, geom)
    surfactant = integrate_surface_values(gamma * np.asarray(xi_second(model, c0, ct)) * grad_sq * area, grid)
    D_phys = _viscous(state, pack) + surfactant

    return BudgetSample(
        t=state.t,
        E_phys=float(E_phys),
        D_phys=float(D_phys),
        mass=surface_mass(state.ctilde, geom),
        eta_mean=state.eta.mean,
    )


def exchange_budgets(state: FlowState, pack: GeometryPack, geom: SurfaceGeometry,
                     model: TensionModel, gamma: float) -> Dict[str, float]:
    """Terms of the separate fluid and surfactant balances

    Fluid: d/dt E_fluid + D_fluid = X_fluid; surfactant L2: d/dt E_surf + D_surf = X_surf.
    """
    grid = state.grid
    area = geom.area_phys
    ct = state.ctilde.padded_values()
    div_u = div_gamma([ui.trace_top() for ui in state.u], geom).padded_values()
    eta = state.eta.padded_values()
    return {
        'E_fluid': _kinetic(state, pack) + 0.5 * integrate_surface_values(eta ** 2, grid),
        'D_fluid': _viscous(state, pack),
        'X_fluid': -integrate_surface_values(model.sigma(ct) * div_u * area, grid),
        'E_surf': 0.5 * integrate_surface_values(ct ** 2 * area, grid),
        'D_surf': gamma * integrate_surface_values(_grad_gamma_sq(state.ctilde, geom) * area, grid),
        'X_surf': -0.5 * integrate_surface_values(ct ** 2 * div_u * area, grid),
    }


def _centered(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    return (values[2:] - values[:-2]) / (times[2:] - times[:-2])


def budget_residual(samples: Sequence[BudgetSample]) -> List[Tuple[float, float]]:
    """dE/dt + D at interior sample times, dE/dt by centered differences"""
    if len(samples) < 3:
        raise InsufficientHistory("budget residual needs at least 3 samples")
    t = np.array([s.t for s in samples])
    E = np.array([s.E_phys for s in samples])
    D = np.array([s.D_phys for s in samples])
    residual = _centered(t, E) + D[1:-1]
    return list(zip(t[1:-1].tolist(), residual.tolist()))


def partial_residuals(samples: Sequence[BudgetSample]) -> Dict[str, List[float]]:
    """Residual series of the fluid and surfactant balances from samples carrying exchange terms"""
    if len(samples) < 3:
        raise InsufficientHistory("partial balances need at least 3 samples")
    t = np.array([s.t for s in samples])
    out = {}
    for kind in ('fluid', 'surf'):
        E = np.array([s.partial[f'E_{kind}'] for s in samples])
        D = np.array([s.partial[f'D_{kind}'] for s in samples])
        X = np.array([s.partial[f'X_{kind}'] for s in samples])
        out[kind] = (_centered(t, E) + D[1:-1] - X[1:-1]).tolist()
    return out


def sobolev_functionals(state: FlowState, history: Sequence[FlowState], dt: float,
                        c0: float) -> Dict[str, object]:
    """Discrete high-order energy and dissipation

    history holds earlier states, most recent last, spaced by dt. Time
    derivatives are backward differences; terms whose history is missing are
    left out and the result is flagged incomplete.
    """
    c = state.perturbation(c0)
    E = (sobolev_norm_bulk(state.u[0], 2) ** 2 + sobolev_norm_bulk(state.u[1], 2) ** 2
         + sobolev_norm_bulk(state.u[2], 2) ** 2
         + sobolev_norm_bulk(state.p, 1) ** 2
         + sobolev_norm_surface(state.eta, 3) ** 2
         + sobolev_norm_surface(c, 2) ** 2)
    D = (sum(sobolev_norm_bulk(ui, 3) ** 2 for ui in state.u)
         + sobolev_norm_bulk(state.p, 2) ** 2
         + sobolev_norm_surface(state.eta, 3.5) ** 2
         + sobolev_norm_surface(c, 3) ** 2)

    complete = len(history) >= 2
    if history:
        prev = history[-1]
        u_t = [(a - b) / dt for a, b in zip(state.u, prev.u)]
        eta_t = (state.eta - prev.eta) / dt
        c_t = (c - prev.perturbation(c0)) / dt
        E += (sum(sobolev_norm_bulk(v, 0) ** 2 for v in u_t)
              + sobolev_norm_surface(eta_t, 1.5) ** 2
              + sobolev_norm_surface(c_t, 0) ** 2)
        D += (sum(sobolev_norm_bulk(v, 1) ** 2 for v in u_t)
              + sobolev_norm_surface(eta_t, 2.5) ** 2
              + sobolev_norm_surface(c_t, 1) ** 2)
    if complete:
        older = history[-2]
        eta_tt = (state.eta - history[-1].eta * 2.0 + older.eta) / dt ** 2
        E += sobolev_norm_surface(eta_tt, -0.5) ** 2
        D += sobolev_norm_surface(eta_tt, 0.5) ** 2
    return {'E_sob': float(E), 'D_sob': float(D), 'complete': complete}


def decay_fit(times: Sequence[float], values: Sequence[float],
              transient: float = DEFAULT_TRANSIENT) -> Tuple[float, float]:
    """Least-squares exponential rate: log E ~ a - lambda t on the post-transient window

    Returns (lambda, r_squared).
    """
    t = np.asarray(times, dtype=float)
    E = np.asarray(values, dtype=float)
    if t.size != E.size or t.size < 2:
        raise FitDomainError("decay fit needs matching series with at least 2 points")
    start = t[0] + transient * (t[-1] - t[0])
    window = t >= start
    t, E = t[window], E[window]
    if t.size < 2:
        raise FitDomainError("fewer than 2 points after the transient window")
    if np.any(E <= 0.0) or not np.all(np.isfinite(E)):
        raise FitDomainError("energy must be positive on the fit window",
                             context={'min': float(np.min(E))})
    logE = np.log(E)
    slope, intercept = np.polyfit(t, logE, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((logE - fitted) ** 2))
    ss_tot = float(np.sum((logE - np.mean(logE)) ** 2))
    r_squared = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    lam = -float(slope)
    if abs(lam) < 1e-14:
        lam = 0.0
    return lam, r_squared


def mean_c_check(state: FlowState, geom: SurfaceGeometry, c0: float) -> Dict[str, float]:
    """int c next to int ctilde (1 - sqrt(1+|grad eta|^2)); equal when the mass is c0 |Sigma|"""
    mean_c = integrate_surface(state.perturbation(c0))
    identity = integrate_surface_values(state.ctilde.padded_values() * (1.0 - geom.area_phys), state.grid)
    return {'mean_c': abs(mean_c), 'identity': identity, 'gap': abs(mean_c - identity)}


class BudgetHistory:
    """Budget samples of a run plus the last few states for backward differences"""

    def __init__(self, depth: int = 3):
        self.samples: List[BudgetSample] = []
        self.states: Deque[FlowState] = deque(maxlen=depth)

    def __len__(self) -> int:
        return len(self.samples)

    def previous_states(self) -> List[FlowState]:
        return list(self.states)

    def push(self, state: FlowState, sample: Optional[BudgetSample] = None) -> None:
        self.states.append(state)
        if sample is not None:
            self.samples.append(sample)

    def energies(self) -> Tuple[np.ndarray, np.ndarray]:
        return (np.array([s.t for s in self.samples]),
                np.array([s.E_phys for s in self.samples]))

    def sobolev_series(self) -> Tuple[np.ndarray, np.ndarray]:
        rows = [(s.t, s.E_sob) for s in self.samples if s.E_sob is not None]
        if not rows:
            return np.array([]), np.array([])
        t, E = zip(*rows)
        return np.array(t), np.array(E)

    def residuals(self) -> List[Tuple[float, float]]:
        return budget_residual(self.samples) if len(self.samples) >= 3 else []

    def mass_drift(self) -> float:
        if not self.samples:
            return 0.0
        m0 = self.samples[0].mass
        return max(abs(s.mass - m0) for s in self.samples) / abs(m0)
