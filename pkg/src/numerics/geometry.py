#!/usr/bin/env python3
"""
Harmonic extension of the surface and the flattening map onto the fixed strip
Geometry coefficients A, B, J, K and the matrix calA = (grad Theta)^-T
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from .errors import DegenerateMap
from .spectral import (
    BulkField,
    GridSpec,
    SurfaceField,
    deriv_horizontal,
    deriv_vertical,
    homogeneous_norm_surface,
    inner_bulk,
    integrate_bulk_values,
    pointwise,
    spectral_basis,
)

logger = logging.getLogger(__name__)

J_ABORT_LIMIT = 0.1
J_WARN_LIMIT = 0.5

BulkVector = Tuple[BulkField, BulkField, BulkField]


def _depth_profiles(grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """(exp(|k| x3) per mode, b_tilde = 1 + x3/b) on the collocation nodes"""
    basis = spectral_basis(grid)
    profile = np.exp(basis.kmag[..., None] * basis.z[None, None, :])
    return profile, 1.0 + basis.z / grid.b


def poisson_extend(f: SurfaceField) -> BulkField:
    """Lower half-space harmonic extension restricted to the strip"""
    profile, _ = _depth_profiles(f.grid)
    return BulkField.from_profile(f, profile)


def _vertical_multiplier(f: BulkField, power: int = 1) -> BulkField:
    """Exact d3 of a Poisson extension: multiply mode n by |k|^power"""
    k = f.basis.kmag[..., None] ** power
    return BulkField(f.grid, f.coeffs * k, f.real)


def _times_depth(f: BulkField, profile: np.ndarray) -> BulkField:
    # functions of x3 alone commute with the horizontal transform, no aliasing
    return BulkField(f.grid, f.coeffs * profile[None, None, :], f.real)


@dataclass(frozen=True, eq=False)
class GeometryPack:
    """Coefficients of the flattening map built from one surface eta

    Fields are truncated spectral objects; the *_phys properties evaluate the
    same coefficients on the dealiasing grid (K_phys = 1/J_phys exactly).
    """

    eta: SurfaceField
    eta_bar: BulkField
    d_eta_bar: BulkVector
    b_tilde: BulkField
    A: BulkField
    B: BulkField
    J: BulkField
    K: BulkField
    dA: BulkVector
    dB: BulkVector
    dJ: BulkVector
    min_J: float
    identity: bool = False

    @property
    def grid(self) -> GridSpec:
        return self.eta.grid

    @cached_property
    def A_phys(self) -> np.ndarray:
        return self.A.padded_values()

    @cached_property
    def B_phys(self) -> np.ndarray:
        return self.B.padded_values()

    @cached_property
    def J_phys(self) -> np.ndarray:
        return self.J.padded_values()

    @cached_property
    def K_phys(self) -> np.ndarray:
        return 1.0 / self.J_phys

    @cached_property
    def AK_phys(self) -> np.ndarray:
        return self.A_phys * self.K_phys

    @cached_property
    def BK_phys(self) -> np.ndarray:
        return self.B_phys * self.K_phys

    @property
    def AK(self) -> BulkField:
        return pointwise(lambda a, j: a / j, self.A, self.J)

    @property
    def BK(self) -> BulkField:
        return pointwise(lambda b, j: b / j, self.B, self.J)

    @property
    def calA(self) -> Tuple[Tuple[BulkField, ...], ...]:
        """Rows ((1, 0, -AK), (0, 1, -BK), (0, 0, K))"""
        one = BulkField.constant(self.grid, 1.0)
        zero = BulkField.zeros(self.grid)
        return ((one, zero, -self.AK), (zero, one, -self.BK), (zero, zero, self.K))

    @cached_property
    def second_order_phys(self) -> np.ndarray:
        """K^2 (1 + A^2 + B^2) - 1, the d33 coefficient of calA-Laplacian minus Laplacian"""
        a, b, k = self.A_phys, self.B_phys, self.K_phys
        return k * k * (1.0 + a * a + b * b) - 1.0

    @cached_property
    def first_order_phys(self) -> np.ndarray:
        """d3 coefficient of the calA-Laplacian"""
        a, b, k = self.A_phys, self.B_phys, self.K_phys
        d1A, d2B, d3A = (f.padded_values() for f in (self.dA[0], self.dB[1], self.dA[2]))
        d3B = self.dB[2].padded_values()
        d1J, d2J, d3J = (f.padded_values() for f in self.dJ)
        return (-k ** 3 * (1.0 + a * a + b * b) * d3J
                + a * k * k * (d1J + d3A)
                + b * k * k * (d2J + d3B)
                - k * (d1A + d2B))


def _identity_pack(eta: SurfaceField) -> GeometryPack:
    grid = eta.grid
    zero = BulkField.zeros(grid)
    one = BulkField.constant(grid, 1.0)
    _, b_tilde = _depth_profiles(grid)
    return GeometryPack(
        eta=eta, eta_bar=BulkField.constant(grid, eta.mean), d_eta_bar=(zero, zero, zero),
        b_tilde=BulkField.from_function_of_depth(grid, lambda z: b_tilde),
        A=zero, B=zero, J=one, K=one,
        dA=(zero, zero, zero), dB=(zero, zero, zero), dJ=(zero, zero, zero),
        min_J=1.0, identity=True,
    )


def build_geometry_pack(eta: SurfaceField,
                        grid: Optional[GridSpec] = None,
                        j_abort: float = 0.0,
                        j_warn: float = J_WARN_LIMIT) -> GeometryPack:
    """A = d1 eta_bar b_tilde, B = d2 eta_bar b_tilde, J = 1 + eta_bar/b + d3 eta_bar b_tilde, K = 1/J

    Raises DegenerateMap when min J <= max(j_abort, 0).
    """
    if grid is not None and grid != eta.grid:
        raise ValueError("eta lives on a different grid")
    grid = eta.grid
    if not np.any(eta.coeffs):
        return _identity_pack(eta)

    _, bt = _depth_profiles(grid)
    eta_bar = poisson_extend(eta)
    d1 = deriv_horizontal(eta_bar, 1)
    d2 = deriv_horizontal(eta_bar, 2)
    d3 = _vertical_multiplier(eta_bar)
    d33 = _vertical_multiplier(eta_bar, 2)

    A = _times_depth(d1, bt)
    B = _times_depth(d2, bt)
    J = eta_bar / grid.b + _times_depth(d3, bt) + 1.0

    # d3 of A, B, J in closed form (eta_bar is a sum of exponentials in x3)
    d3A = _times_depth(_vertical_multiplier(d1), bt) + d1 / grid.b
    d3B = _times_depth(_vertical_multiplier(d2), bt) + d2 / grid.b
    d3J = d3 / grid.b * 2.0 + _times_depth(d33, bt)

    J_values = J.padded_values()
    min_J = float(np.min(J_values))
    threshold = max(j_abort, 0.0)
    if min_J <= threshold:
        raise DegenerateMap(
            f"min J = {min_J:.4f} at or below {threshold}; flattening map is not a diffeomorphism",
            context={'min_J': min_J, 'limit': threshold}
        )
    if min_J < j_warn:
        logger.warning("Jacobian min J = %.4f below soft limit %.2f", min_J, j_warn)

    K = pointwise(lambda j: 1.0 / j, J)
    return GeometryPack(
        eta=eta, eta_bar=eta_bar, d_eta_bar=(d1, d2, d3),
        b_tilde=BulkField.from_function_of_depth(grid, lambda z: bt),
        A=A, B=B, J=J, K=K,
        dA=(deriv_horizontal(A, 1), deriv_horizontal(A, 2), d3A),
        dB=(deriv_horizontal(B, 1), deriv_horizontal(B, 2), d3B),
        dJ=(deriv_horizontal(J, 1), deriv_horizontal(J, 2), d3J),
        min_J=min_J,
    )


# calA-weighted differential operators

def _grad_values(f: BulkField) -> Tuple[BulkField, BulkField, BulkField]:
    return deriv_horizontal(f, 1), deriv_horizontal(f, 2), deriv_vertical(f)


def calA_grad_values(pack: GeometryPack, f: BulkField) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """grad_calA f on the dealiasing grid, without truncation"""
    g1, g2, g3 = (g.padded_values() for g in _grad_values(f))
    return g1 - pack.AK_phys * g3, g2 - pack.BK_phys * g3, pack.K_phys * g3


def apply_calA_grad(pack: GeometryPack, f: BulkField) -> BulkVector:
    """(grad_calA f)_i = calA_ij d_j f"""
    if pack.identity:
        return _grad_values(f)
    ak, bk, k = pack.AK_phys, pack.BK_phys, pack.K_phys
    return pointwise(lambda g1, g2, g3: (g1 - ak * g3, g2 - bk * g3, k * g3), *_grad_values(f))


def apply_calA_div(pack: GeometryPack, X: BulkVector) -> BulkField:
    """div_calA X = calA_ij d_j X_i"""
    x1, x2, x3 = X
    if pack.identity:
        return deriv_horizontal(x1, 1) + deriv_horizontal(x2, 2) + deriv_vertical(x3)
    ak, bk, k = pack.AK_phys, pack.BK_phys, pack.K_phys
    return pointwise(
        lambda a1, a3, b2, b3, c3: a1 - ak * a3 + b2 - bk * b3 + k * c3,
        deriv_horizontal(x1, 1), deriv_vertical(x1),
        deriv_horizontal(x2, 2), deriv_vertical(x2),
        deriv_vertical(x3),
    )


def calA_sym_grad_values(pack: GeometryPack, u: BulkVector) -> np.ndarray:
    """D_calA u = grad_calA u + (grad_calA u)^T as a (3, 3, ...) array on the dealiasing grid"""
    rows = [calA_grad_values(pack, ui) for ui in u]  # rows[j][i] = (grad_calA u_j)_i
    G = np.array([[rows[j][i] for j in range(3)] for i in range(3)])
    return G + np.swapaxes(G, 0, 1)


def sym_grad_values(u: BulkVector) -> np.ndarray:
    """Flat symmetric gradient Du on the dealiasing grid, shape (3, 3, ...)"""
    rows = [[g.padded_values() for g in _grad_values(ui)] for ui in u]
    G = np.array([[rows[j][i] for j in range(3)] for i in range(3)])
    return G + np.swapaxes(G, 0, 1)


def apply_calA_sym_grad(pack: GeometryPack, u: BulkVector) -> Tuple[Tuple[BulkField, ...], ...]:
    """Symmetric gradient D_calA u as a 3 x 3 nested tuple of fields"""
    D = calA_sym_grad_values(pack, u)
    return tuple(tuple(BulkField.from_padded_values(pack.grid, D[i, j]) for j in range(3))
                 for i in range(3))


def laplacian_remainder(pack: GeometryPack, f: BulkField) -> Tuple[BulkField, BulkField]:
    """Split Delta_calA f - Delta f into (second-order part, first-order part)

    second = [K^2(1+A^2+B^2) - 1] d33 f - 2 AK d13 f - 2 BK d23 f
    first  = [-K^3(1+A^2+B^2) d3J + AK^2(d1J + d3A) + BK^2(d2J + d3B) - K(d1A + d2B)] d3 f
    """
    if pack.identity:
        zero = BulkField.zeros(f.grid)
        return zero, zero
    f3 = deriv_vertical(f)
    c2, c1 = pack.second_order_phys, pack.first_order_phys
    ak, bk = pack.AK_phys, pack.BK_phys
    return pointwise(
        lambda f33, f13, f23, g3: (c2 * f33 - 2.0 * ak * f13 - 2.0 * bk * f23, c1 * g3),
        deriv_vertical(f, 2), deriv_horizontal(f3, 1), deriv_horizontal(f3, 2), f3,
    )


# mapping and checks

def theta(pack: GeometryPack) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Physical coordinates y = Theta(x) = (x1, x2, x3 + eta_bar b_tilde) at every node"""
    basis = spectral_basis(pack.grid)
    y1, y2, x3 = basis.bulk_coordinates()
    _, bt = _depth_profiles(pack.grid)
    lift = pack.eta_bar.values * bt[None, None, :]
    if pack.identity:
        lift = np.zeros_like(x3)
    return y1, y2, x3 + lift


def grad_theta_matrices(pack: GeometryPack) -> np.ndarray:
    """grad Theta at every node as an (N1, N2, Nz, 3, 3) array, third row by direct differentiation"""
    grid = pack.grid
    _, bt = _depth_profiles(grid)
    theta3 = (BulkField.from_function_of_depth(grid, lambda z: z)
              + BulkField(grid, pack.eta_bar.coeffs * bt[None, None, :]))
    if pack.identity:
        theta3 = BulkField.from_function_of_depth(grid, lambda z: z)
    t1, t2, t3 = (g.values for g in _grad_values(theta3))
    mats = np.zeros(grid.bulk_shape + (3, 3))
    mats[..., 0, 0] = 1.0
    mats[..., 1, 1] = 1.0
    mats[..., 2, 0] = t1
    mats[..., 2, 1] = t2
    mats[..., 2, 2] = t3
    return mats


def det_grad_theta(pack: GeometryPack) -> np.ndarray:
    return np.linalg.det(grad_theta_matrices(pack))


def harmonicity_residual(f: SurfaceField) -> float:
    """L2 norm of the collocated Laplacian of the Poisson extension at interior nodes"""
    ext = poisson_extend(f)
    lap = deriv_vertical(ext, 2).coeffs - f.basis.kmag[..., None] ** 2 * ext.coeffs
    lap[..., 0] = 0.0
    lap[..., -1] = 0.0
    return float(np.sqrt(max(inner_bulk(BulkField(f.grid, lap), BulkField(f.grid, lap)), 0.0)))


def poisson_gradient_ratio(f: SurfaceField) -> float:
    """||grad P f||_L2(strip) / ||f||_{H^1/2 homogeneous}"""
    denominator = homogeneous_norm_surface(f, 0.5)
    if denominator == 0.0:
        raise ValueError("ratio undefined for a constant surface field")
    ext = poisson_extend(f)
    grads = (deriv_horizontal(ext, 1), deriv_horizontal(ext, 2), _vertical_multiplier(ext))
    numerator = np.sqrt(sum(inner_bulk(g, g) for g in grads))
    return float(numerator / denominator)


def infinity_bound(pack: GeometryPack) -> float:
    """||J - 1||_inf^2 + ||A||_inf^2 + ||B||_inf^2"""
    return float(np.max(np.abs(pack.J_phys - 1.0)) ** 2
                 + np.max(np.abs(pack.A_phys)) ** 2
                 + np.max(np.abs(pack.B_phys)) ** 2)


def jacobian_volume(pack: GeometryPack) -> float:
    """Volume of the physical domain, int J over the strip"""
    return integrate_bulk_values(pack.J_phys, pack.grid)
