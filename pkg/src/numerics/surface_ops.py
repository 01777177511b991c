#!/usr/bin/env python3
"""
Surface geometry and calculus on the free surface, pulled back to Sigma
Normals, mean curvature, tangential gradient/divergence/Laplacian and their identities
"""

import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np

from .errors import SlopeTooLarge
from .spectral import (
    SurfaceField,
    deriv_horizontal,
    pointwise,
    spectral_basis,
)

logger = logging.getLogger(__name__)

SLOPE_HARD_LIMIT = 1.0
SLOPE_WARN_LIMIT = 0.5

Vector = Tuple[SurfaceField, SurfaceField, SurfaceField]


@dataclass(frozen=True, eq=False)
class SurfaceGeometry:
    """Geometry of the graph x3 = eta(x1, x2)

    Fields are truncated to the retained modes. The *_phys arrays hold the
    same quantities evaluated pointwise on the dealiasing grid before
    truncation; |nu| = 1 and N = area * nu hold exactly on them.
    """

    eta: SurfaceField
    grad_eta: Tuple[SurfaceField, SurfaceField]
    area_element: SurfaceField
    nu: Vector
    cal_N: Vector
    H: SurfaceField
    max_slope: float
    slope_flag: bool
    area_phys: np.ndarray
    nu_phys: Tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def grid(self):
        return self.eta.grid

    def unit_normal_values(self) -> np.ndarray:
        """nu on the dealiasing grid, normalized in physical space"""
        stacked = np.stack(self.nu_phys)
        return stacked / np.sqrt(np.sum(stacked ** 2, axis=0))

    def cal_N_values(self) -> np.ndarray:
        e1, e2 = (g.padded_values() for g in self.grad_eta)
        return np.stack((-e1, -e2, np.ones_like(e1)))


def _flat_geometry(eta: SurfaceField) -> SurfaceGeometry:
    grid = eta.grid
    zero = SurfaceField.zeros(grid)
    one = SurfaceField.constant(grid, 1.0)
    shape = spectral_basis(grid).phys_shape
    return SurfaceGeometry(
        eta=eta,
        grad_eta=(zero, zero),
        area_element=one,
        nu=(zero, zero, one),
        cal_N=(zero, zero, one),
        H=zero,
        max_slope=0.0,
        slope_flag=False,
        area_phys=np.ones(shape),
        nu_phys=(np.zeros(shape), np.zeros(shape), np.ones(shape)),
    )


def build_geometry(eta: SurfaceField,
                   slope_limit: float = SLOPE_HARD_LIMIT,
                   slope_warn: float = SLOPE_WARN_LIMIT,
                   allow_steep: bool = False) -> SurfaceGeometry:
    """Normals, area element and mean curvature of the surface eta"""
    if not np.any(eta.coeffs[np.asarray(spectral_basis(eta.grid).kmag) > 0]):
        return _flat_geometry(eta)

    e1 = deriv_horizontal(eta, 1)
    e2 = deriv_horizontal(eta, 2)
    g1, g2 = e1.padded_values(), e2.padded_values()
    area = np.sqrt(1.0 + g1 * g1 + g2 * g2)
    max_slope = float(np.max(np.hypot(g1, g2)))

    slope_flag = False
    if max_slope >= slope_limit:
        if not allow_steep:
            raise SlopeTooLarge(
                f"max |grad eta| = {max_slope:.4f} exceeds the hard limit {slope_limit}",
                context={'max_slope': max_slope, 'limit': slope_limit}
            )
        slope_flag = True
        logger.warning("Surface slope %.4f beyond hard limit %.2f (continuing)", max_slope, slope_limit)
    elif max_slope >= slope_warn:
        slope_flag = True
        logger.warning("Surface slope %.4f beyond soft limit %.2f", max_slope, slope_warn)

    nu_phys = (-g1 / area, -g2 / area, 1.0 / area)
    area_f, nu1, nu2, nu3 = pointwise(lambda a, b: (np.sqrt(1.0 + a * a + b * b),
                                                    -a / np.sqrt(1.0 + a * a + b * b),
                                                    -b / np.sqrt(1.0 + a * a + b * b),
                                                    1.0 / np.sqrt(1.0 + a * a + b * b)), e1, e2)
    # H = div_*(grad eta / sqrt(1 + |grad eta|^2)) = -(d1 nu1 + d2 nu2)
    H = -(deriv_horizontal(nu1, 1) + deriv_horizontal(nu2, 2))
    one = SurfaceField.constant(eta.grid, 1.0)
    return SurfaceGeometry(
        eta=eta,
        grad_eta=(e1, e2),
        area_element=area_f,
        nu=(nu1, nu2, nu3),
        cal_N=(-e1, -e2, one),
        H=H,
        max_slope=max_slope,
        slope_flag=slope_flag,
        area_phys=area,
        nu_phys=nu_phys,
    )


def _tangential(geom: SurfaceGeometry, func: Callable, *fields: SurfaceField):
    """pointwise() with the exact normal arrays appended to the arguments"""
    n1, n2, n3 = geom.nu_phys
    return pointwise(lambda *arrays: func(*arrays, n1, n2, n3), *fields)


def grad_gamma(f: SurfaceField, geom: SurfaceGeometry) -> Vector:
    """Tangential gradient: d_i f - nu_i (nu_* . grad_* f), third component -nu_3 (nu_* . grad_* f)"""
    def kernel(f1, f2, n1, n2, n3):
        s = n1 * f1 + n2 * f2
        return f1 - n1 * s, f2 - n2 * s, -n3 * s

    return _tangential(geom, kernel, deriv_horizontal(f, 1), deriv_horizontal(f, 2))


def div_gamma(X: Sequence[SurfaceField], geom: SurfaceGeometry) -> SurfaceField:
    """Surface divergence sum_i d_{Gamma,i} X_i"""
    x1, x2, x3 = X
    def kernel(a11, a12, a21, a22, a31, a32, n1, n2, n3):
        return (a11 - n1 * (n1 * a11 + n2 * a12)
                + a22 - n2 * (n1 * a21 + n2 * a22)
                - n3 * (n1 * a31 + n2 * a32))

    return _tangential(
        geom, kernel,
        deriv_horizontal(x1, 1), deriv_horizontal(x1, 2),
        deriv_horizontal(x2, 1), deriv_horizontal(x2, 2),
        deriv_horizontal(x3, 1), deriv_horizontal(x3, 2),
    )


def laplace_gamma(f: SurfaceField, geom: SurfaceGeometry) -> SurfaceField:
    return div_gamma(grad_gamma(f, geom), geom)


def projector_tangent(v: Sequence[SurfaceField], geom: SurfaceGeometry) -> Vector:
    """v - (v . N) N / |N|^2 with the non-unit normal N = (-grad eta, 1)"""
    e1, e2 = geom.grad_eta
    def kernel(v1, v2, v3, a, b):
        n1, n2 = -a, -b
        scale = (v1 * n1 + v2 * n2 + v3) / (n1 * n1 + n2 * n2 + 1.0)
        return v1 - scale * n1, v2 - scale * n2, v3 - scale

    return pointwise(kernel, v[0], v[1], v[2], e1, e2)


def _surface_integral(values: np.ndarray, geom: SurfaceGeometry) -> float:
    return geom.grid.area * float(np.mean(values))


def ibp_residual(f: SurfaceField, g: SurfaceField, geom: SurfaceGeometry, i: int) -> float:
    """Signed residual of int (d_{Gamma,i} f g + f d_{Gamma,i} g + f g nu_i H) sqrt(1+|grad eta|^2)"""
    if i not in (1, 2, 3):
        raise ValueError("component must be 1, 2 or 3")
    df = grad_gamma(f, geom)[i - 1].padded_values()
    dg = grad_gamma(g, geom)[i - 1].padded_values()
    fv, gv, H = f.padded_values(), g.padded_values(), geom.H.padded_values()
    integrand = (df * gv + fv * dg + fv * gv * geom.nu_phys[i - 1] * H) * geom.area_phys
    return _surface_integral(integrand, geom)


def ibp_vector_residual(X: Sequence[SurfaceField], geom: SurfaceGeometry) -> float:
    """Signed residual of int (div_Gamma X + X . nu H) sqrt(1+|grad eta|^2)"""
    div = div_gamma(X, geom).padded_values()
    H = geom.H.padded_values()
    normal = sum(x.padded_values() * n for x, n in zip(X, geom.nu_phys))
    return _surface_integral((div + normal * H) * geom.area_phys, geom)


def area_gradient_residual(geom: SurfaceGeometry) -> float:
    """max_i || d_i sqrt(1+|grad eta|^2) + nu_* . grad_* d_i eta ||_L2"""
    e1, e2 = geom.grad_eta
    worst = 0.0
    for i, ei in ((1, e1), (2, e2)):
        lhs = deriv_horizontal(geom.area_element, i).padded_values()
        d1 = deriv_horizontal(ei, 1).padded_values()
        d2 = deriv_horizontal(ei, 2).padded_values()
        residual = lhs + geom.nu_phys[0] * d1 + geom.nu_phys[1] * d2
        worst = max(worst, np.sqrt(_surface_integral(residual ** 2, geom)))
    return worst


def normal_curvature_residual(geom: SurfaceGeometry) -> float:
    """|| div_Gamma nu + H ||_L2"""
    residual = div_gamma(geom.nu, geom).padded_values() + geom.H.padded_values()
    return float(np.sqrt(_surface_integral(residual ** 2, geom)))


def tangential_gradient_residual(f: SurfaceField, geom: SurfaceGeometry) -> float:
    """|| grad_Gamma f . nu ||_L2"""
    normal = sum(g.padded_values() * n for g, n in zip(grad_gamma(f, geom), geom.nu_phys))
    return float(np.sqrt(_surface_integral(normal ** 2, geom)))


def area_rate(eta_t: SurfaceField, geom: SurfaceGeometry) -> SurfaceField:
    """Time derivative of the area element: div_*(eta_t grad eta / sqrt) - eta_t H"""
    e1, e2 = geom.grad_eta
    flux1, flux2, sink = pointwise(
        lambda et, a, b, h: (et * a / np.sqrt(1.0 + a * a + b * b),
                             et * b / np.sqrt(1.0 + a * a + b * b),
                             et * h),
        eta_t, e1, e2, geom.H)
    return deriv_horizontal(flux1, 1) + deriv_horizontal(flux2, 2) - sink


def transport_rhs(f: Callable[[np.ndarray], np.ndarray],
                  f_prime: Callable[[np.ndarray], np.ndarray],
                  f_second: Callable[[np.ndarray], np.ndarray],
                  ctilde: SurfaceField,
                  u_trace: Sequence[SurfaceField],
                  geom: SurfaceGeometry,
                  gamma: float) -> float:
    """int [(f(c) - f'(c) c) div_Gamma u - gamma f''(c) |grad_Gamma c|^2] sqrt(1+|grad eta|^2)"""
    div_u = div_gamma(u_trace, geom).padded_values()
    grad_c = [g.padded_values() for g in grad_gamma(ctilde, geom)]
    c = ctilde.padded_values()
    integrand = ((f(c) - f_prime(c) * c) * div_u
                 - gamma * f_second(c) * sum(g * g for g in grad_c)) * geom.area_phys
    return _surface_integral(integrand, geom)


def surface_mass(ctilde: SurfaceField, geom: SurfaceGeometry) -> float:
    """Total surfactant int ctilde sqrt(1+|grad eta|^2)"""
    return _surface_integral(ctilde.padded_values() * geom.area_phys, geom)
