#!/usr/bin/env python3
"""
Manufactured solutions used by the verification suites
Closed-form single-mode solutions of the linear system and smooth surface paths
for the transport and area-rate identities
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from ..models.state import ForcingPack
from .linear_core import (
    LinearParameters,
    solve_stokes_dirichlet,
    solve_stokes_stress,
    step_linear,
)
from .spectral import (
    BulkField,
    GridSpec,
    SurfaceField,
    deriv_horizontal,
    integrate_surface_values,
    spectral_basis,
)
from .surface_ops import (
    SurfaceGeometry,
    area_rate,
    build_geometry,
    div_gamma,
    laplace_gamma,
    transport_rhs,
)

logger = logging.getLogger(__name__)

Functional = Tuple[Callable[[np.ndarray], np.ndarray], ...]

# f, f', f'' for the transport identity
FUNCTIONALS: Dict[str, Functional] = {
    'linear': (lambda z: z, np.ones_like, np.zeros_like),
    'quadratic': (lambda z: 0.5 * z * z, lambda z: z, np.ones_like),
}


@dataclass(frozen=True)
class LinearModeSolution:
    """Exact solution of the linear system in the horizontal mode (1, 0)

    With s = x3 + b:
      u1 = e^-t sin(s) sin(k x1), u2 = 0, u3 = e^-t s^2 cos(k x1),
      p = e^-t cos(x3) cos(k x1), eta = e^-t eta_hat cos(k x1), c = e^-t c_hat cos(k x1)
    and the forcing that makes it exact. Both velocity components vanish on the bottom.
    """

    grid: GridSpec
    params: LinearParameters
    eta_hat: float = 0.5
    c_hat: float = 0.3

    @property
    def k(self) -> float:
        return 2.0 * np.pi / self.grid.L1

    def _bulk(self):
        x1, _, z = spectral_basis(self.grid).bulk_coordinates()
        return x1, z + self.grid.b, z

    def _surface(self):
        x1, _ = spectral_basis(self.grid).physical_coordinates()
        return x1

    def fields(self, t: float = 0.0):
        """(u, p, eta, c) at time t"""
        grid, decay = self.grid, np.exp(-t)
        x1, s, z = self._bulk()
        kx = self.k * x1
        u = (BulkField.from_values(grid, decay * np.sin(s) * np.sin(kx)),
             BulkField.zeros(grid),
             BulkField.from_values(grid, decay * s ** 2 * np.cos(kx)))
        p = BulkField.from_values(grid, decay * np.cos(z) * np.cos(kx))
        y1 = self.k * self._surface()
        eta = SurfaceField.from_values(grid, decay * self.eta_hat * np.cos(y1))
        c = SurfaceField.from_values(grid, decay * self.c_hat * np.cos(y1))
        return u, p, eta, c

    def _stationary_bulk(self):
        """f and h of -Lap u + grad p = f, div u = h (time factor dropped)"""
        grid, k = self.grid, self.k
        x1, s, z = self._bulk()
        kx = k * x1
        a, w, q = np.sin(s), s ** 2, np.cos(z)
        f = (BulkField.from_values(grid, ((1.0 + k * k) * a - k * q) * np.sin(kx)),
             BulkField.zeros(grid),
             BulkField.from_values(grid, (k * k * w - 2.0 - np.sin(z)) * np.cos(kx)))
        h = BulkField.from_values(grid, (k * a + 2.0 * s) * np.cos(kx))
        return f, h

    def _stress_traction(self):
        """(pI - Du) e3 of the velocity and pressure at the surface (time factor dropped)"""
        grid, b, k = self.grid, self.grid.b, self.k
        y1 = k * self._surface()
        return (SurfaceField.from_values(grid, (k * b * b - np.cos(b)) * np.sin(y1)),
                SurfaceField.zeros(grid),
                SurfaceField.from_values(grid, (1.0 - 4.0 * b) * np.cos(y1)))

    def stokes_stress_data(self):
        """(f, h, alpha) of the stationary stress problem solved by fields(0)[:2]"""
        f, h = self._stationary_bulk()
        return f, h, self._stress_traction()

    def stokes_dirichlet_data(self):
        """(f, h, phi1) of the stationary Dirichlet problem solved by fields(0)[:2]"""
        f, h = self._stationary_bulk()
        u, _, _, _ = self.fields(0.0)
        return f, h, tuple(ui.trace_top() for ui in u)

    def forcing(self, t: float) -> ForcingPack:
        """G1..G5 at time t for the evolving linear system"""
        grid, b, k = self.grid, self.grid.b, self.k
        P = self.params
        decay = np.exp(-t)
        u, _, _, _ = self.fields(t)
        f, h = self._stationary_bulk()
        G1 = tuple(fi * decay - ui for fi, ui in zip(f, u))
        alpha = self._stress_traction()
        y1 = k * self._surface()
        G3 = (alpha[0] * decay - SurfaceField.from_values(
                  grid, decay * P.sigma0_prime * k * self.c_hat * np.sin(y1)),
              SurfaceField.zeros(grid),
              alpha[2] * decay - SurfaceField.from_values(
                  grid, decay * (1.0 + P.sigma0 * k * k) * self.eta_hat * np.cos(y1)))
        G4 = SurfaceField.from_values(grid, -decay * (self.eta_hat + b * b) * np.cos(y1))
        G5 = SurfaceField.from_values(
            grid, decay * (-self.c_hat + P.gamma * k * k * self.c_hat + P.c0 * k * np.sin(b)) * np.cos(y1))
        return ForcingPack(G1=G1, G2=h * decay, G3=G3, G4=G4, G5=G5)


def _field_error(computed, exact) -> float:
    return max((a - b).max_abs() for a, b in zip(computed, exact))


def stokes_recovery_error(solution: LinearModeSolution, top: str = 'stress') -> float:
    """Max error of the stationary solvers against the manufactured velocity and pressure"""
    u, p, _, _ = solution.fields(0.0)
    if top == 'stress':
        f, h, alpha = solution.stokes_stress_data()
        u_h, p_h = solve_stokes_stress(f, h, alpha, solution.grid)
    else:
        f, h, phi1 = solution.stokes_dirichlet_data()
        u_h, p_h = solve_stokes_dirichlet(f, h, phi1, solution.grid)
    return _field_error(tuple(u_h) + (p_h,), tuple(u) + (p,))


def linear_recovery_error(solution: LinearModeSolution, dt: float, t_end: float) -> float:
    """Max error at t_end of implicit Euler steps driven by the manufactured forcing"""
    steps = int(round(t_end / dt))
    u, _, eta, c = solution.fields(0.0)
    t = 0.0
    for _ in range(steps):
        t += dt
        u, _, eta, c = step_linear(u, eta, c, solution.forcing(t), dt, solution.params)
    u_x, _, eta_x, c_x = solution.fields(t)
    return _field_error(tuple(u) + (eta, c), tuple(u_x) + (eta_x, c_x))


@dataclass(frozen=True)
class SurfacePath:
    """Smooth surface, surface velocity and concentration depending on time

    The vertical velocity is chosen so that the kinematic condition
    d_t eta = u . N holds exactly.
    """

    grid: GridSpec
    amplitude: float = 0.1
    c0: float = 1.0
    gamma: float = 1.0

    def _phases(self, t: float):
        x1, x2 = spectral_basis(self.grid).physical_coordinates()
        s1, s2 = 2.0 * np.pi / self.grid.L1, 2.0 * np.pi / self.grid.L2
        return s1, s2, s1 * x1 + t, s2 * x2 - 0.5 * t, s1 * x1 + s2 * x2 - t

    def eta(self, t: float) -> SurfaceField:
        _, _, a, b, _ = self._phases(t)
        return SurfaceField.from_values(self.grid, self.amplitude * (np.cos(a) + 0.5 * np.sin(b)))

    def eta_t(self, t: float) -> SurfaceField:
        _, _, a, b, _ = self._phases(t)
        return SurfaceField.from_values(self.grid, self.amplitude * (-np.sin(a) - 0.25 * np.cos(b)))

    def u_trace(self, t: float) -> Tuple[SurfaceField, SurfaceField, SurfaceField]:
        s1, s2, a, b, _ = self._phases(t)
        x1, x2 = spectral_basis(self.grid).physical_coordinates()
        u1 = 0.3 * np.sin(s2 * x2 + t)
        u2 = 0.2 * np.cos(s1 * x1 - t)
        e1 = -self.amplitude * s1 * np.sin(a)
        e2 = 0.5 * self.amplitude * s2 * np.cos(b)
        u3 = self.amplitude * (-np.sin(a) - 0.25 * np.cos(b)) + u1 * e1 + u2 * e2
        return tuple(SurfaceField.from_values(self.grid, v) for v in (u1, u2, u3))

    def ctilde(self, t: float) -> SurfaceField:
        *_, c = self._phases(t)
        return SurfaceField.from_values(self.grid, self.c0 * (1.0 + 0.2 * np.cos(c)))

    def ctilde_t(self, t: float) -> SurfaceField:
        *_, c = self._phases(t)
        return SurfaceField.from_values(self.grid, 0.2 * self.c0 * np.sin(c))

    def geometry(self, t: float) -> SurfaceGeometry:
        return build_geometry(self.eta(t))

    def source(self, t: float, geom: SurfaceGeometry) -> SurfaceField:
        """d_t c + u_* . grad_* c + c div_Gamma u - gamma Lap_Gamma c along the path"""
        ctilde = self.ctilde(t)
        u = self.u_trace(t)
        advection = u[0] * deriv_horizontal(ctilde, 1) + u[1] * deriv_horizontal(ctilde, 2)
        stretching = ctilde * div_gamma(u, geom)
        return self.ctilde_t(t) + advection + stretching - laplace_gamma(ctilde, geom) * self.gamma


def _functional_integral(path: SurfacePath, f, t: float) -> float:
    geom = path.geometry(t)
    return integrate_surface_values(f(path.ctilde(t).padded_values()) * geom.area_phys, path.grid)


def transport_residual(path: SurfacePath, functional: str, t: float, dt: float) -> float:
    """Centered difference of int f(c) sqrt(1+|grad eta|^2) minus the transport right-hand side

    The manufactured source enters as int f'(c) S sqrt(...).
    """
    f, f_prime, f_second = FUNCTIONALS[functional]
    rate = (_functional_integral(path, f, t + dt) - _functional_integral(path, f, t - dt)) / (2.0 * dt)
    geom = path.geometry(t)
    ctilde = path.ctilde(t)
    rhs = transport_rhs(f, f_prime, f_second, ctilde, path.u_trace(t), geom, path.gamma)
    forced = integrate_surface_values(
        f_prime(ctilde.padded_values()) * path.source(t, geom).padded_values() * geom.area_phys, path.grid)
    return float(rate - rhs - forced)


def area_rate_residual(path: SurfacePath, t: float, dt: float) -> float:
    """L2 gap between the centered difference of sqrt(1+|grad eta|^2) and area_rate"""
    ahead = path.geometry(t + dt).area_phys
    behind = path.geometry(t - dt).area_phys
    exact = area_rate(path.eta_t(t), path.geometry(t)).padded_values()
    gap = (ahead - behind) / (2.0 * dt) - exact
    return float(np.sqrt(integrate_surface_values(gap ** 2, path.grid)))


def observed_order(steps, errors) -> float:
    """Least-squares slope of log(error) against log(step)"""
    return float(np.polyfit(np.log(np.asarray(steps, dtype=float)),
                            np.log(np.abs(np.asarray(errors, dtype=float))), 1)[0])
