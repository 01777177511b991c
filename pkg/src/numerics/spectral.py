#!/usr/bin/env python3
"""
Discrete function spaces for the flattened fluid layer
Periodic Fourier layer on the cross-section, Chebyshev collocation in depth
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import product as index_product
from typing import Callable, Tuple, Union

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatch

logger = logging.getLogger(__name__)

DEALIAS_RULES = ('two_thirds', 'three_halves')
MAX_HORIZONTAL_ORDER = 4
MAX_BULK_SOBOLEV_ORDER = 3

_FFT_WORKERS = 1


def set_fft_workers(workers: int) -> None:
    """Set the scipy.fft worker count used by every transform"""
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(workers))


def get_fft_workers() -> int:
    return _FFT_WORKERS


@dataclass(frozen=True)
class GridSpec:
    """Grid on Sigma x (-b, 0)

    Horizontal counts are even and at least 8. Vertical nodes are the
    Chebyshev-Gauss-Lobatto points mapped onto [-b, 0]; node 0 is the
    surface x3 = 0 and node Nz-1 is the bottom x3 = -b.
    """

    L1: float
    L2: float
    N1: int
    N2: int
    Nz: int
    b: float
    dealias_rule: str = 'two_thirds'

    def __post_init__(self):
        errors = []
        for name in ('L1', 'L2', 'b'):
            if not float(getattr(self, name)) > 0.0:
                errors.append(f"{name} must be positive")
        for name in ('N1', 'N2'):
            count = getattr(self, name)
            if int(count) != count or count < 8 or count % 2:
                errors.append(f"{name} must be an even integer >= 8")
        if int(self.Nz) != self.Nz or self.Nz < 8:
            errors.append("Nz must be an integer >= 8")
        if self.dealias_rule not in DEALIAS_RULES:
            errors.append(f"dealias_rule must be one of {DEALIAS_RULES}")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def area(self) -> float:
        return float(self.L1) * float(self.L2)

    @property
    def volume(self) -> float:
        return self.area * float(self.b)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.N1, self.N2)

    @property
    def bulk_shape(self) -> Tuple[int, int, int]:
        return (self.N1, self.N2, self.Nz)

    @property
    def basis(self) -> 'SpectralBasis':
        return spectral_basis(self)

    def to_dict(self) -> dict:
        return {
            'L1': float(self.L1), 'L2': float(self.L2),
            'N1': int(self.N1), 'N2': int(self.N2), 'Nz': int(self.Nz),
            'b': float(self.b), 'dealias_rule': self.dealias_rule,
        }


def chebdiff(N: int) -> Tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Gauss-Lobatto nodes x_j = cos(pi j / N) and the differentiation matrix"""
    n = np.arange(N + 1)
    x = np.cos(np.pi * n / N)
    c = np.hstack((2.0, np.ones(N - 1), 2.0)) * (-1.0) ** n
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D = D - np.diag(np.sum(D, axis=1))
    return x, D


def clenshaw_curtis_weights(N: int) -> np.ndarray:
    """Quadrature weights on [-1, 1] for the N+1 Gauss-Lobatto nodes, exact to degree N"""
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    inner = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N ** 2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(N * theta[inner]) / (N ** 2 - 1)
    else:
        w[0] = w[N] = 1.0 / N ** 2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / N
    return w


def chebyshev_coefficients(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients along the last axis from Gauss-Lobatto node values"""
    N = values.shape[-1] - 1
    coeffs = sfft.dct(values, type=1, axis=-1) / N
    coeffs[..., 0] *= 0.5
    coeffs[..., N] *= 0.5
    return coeffs


class SpectralBasis:
    """Everything derived once per GridSpec: wavenumbers, masks, nodes, matrices"""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        N1, N2, Nz = grid.N1, grid.N2, grid.Nz

        # integer mode indices in fft order
        self.m1 = sfft.fftfreq(N1, 1.0 / N1).astype(int)
        self.m2 = sfft.fftfreq(N2, 1.0 / N2).astype(int)
        self.n1 = self.m1 / grid.L1
        self.n2 = self.m2 / grid.L2
        self.k1 = 2.0 * np.pi * self.n1[:, None] * np.ones((1, N2))
        self.k2 = 2.0 * np.pi * self.n2[None, :] * np.ones((N1, 1))
        self.kmag = np.hypot(self.k1, self.k2)

        M1, M2 = np.meshgrid(self.m1, self.m2, indexing='ij')
        self.nyquist = (np.abs(M1) == N1 // 2) | (np.abs(M2) == N2 // 2)
        if grid.dealias_rule == 'two_thirds':
            self.mask = (np.abs(M1) < N1 / 3.0) & (np.abs(M2) < N2 / 3.0)
            self.phys_shape = (N1, N2)
        else:
            self.mask = ~self.nyquist
            self.phys_shape = (3 * N1 // 2, 3 * N2 // 2)
        self.retained = np.argwhere(self.mask)

        # signed modes (Nyquist excluded) and their slots on the padded grid
        keep1 = np.abs(self.m1) < N1 // 2
        keep2 = np.abs(self.m2) < N2 // 2
        self.src1 = np.nonzero(keep1)[0]
        self.src2 = np.nonzero(keep2)[0]
        self.dst1 = np.mod(self.m1[keep1], self.phys_shape[0])
        self.dst2 = np.mod(self.m2[keep2], self.phys_shape[1])

        x, Dx = chebdiff(Nz - 1)
        scale = 2.0 / grid.b
        self.cheb_x = x
        self.z = 0.5 * grid.b * (x - 1.0)
        self.D = scale * Dx
        self.D2 = self.D @ self.D
        self.weights = 0.5 * grid.b * clenshaw_curtis_weights(Nz - 1)
        self.cheb_forward = chebyshev_coefficients(np.eye(Nz)).T

        self.x1 = np.arange(N1) * grid.L1 / N1
        self.x2 = np.arange(N2) * grid.L2 / N2

    def physical_coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing='ij')

    def bulk_coordinates(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, self.z, indexing='ij')


@lru_cache(maxsize=32)
def spectral_basis(grid: GridSpec) -> SpectralBasis:
    logger.debug("Planning spectral basis for %s", grid)
    return SpectralBasis(grid)


def _forward(values: np.ndarray) -> np.ndarray:
    return sfft.fft2(values, axes=(0, 1), norm='forward', workers=_FFT_WORKERS)


def _inverse(coeffs: np.ndarray) -> np.ndarray:
    return sfft.ifft2(coeffs, axes=(0, 1), norm='forward', workers=_FFT_WORKERS)


def _pad(coeffs: np.ndarray, basis: SpectralBasis) -> np.ndarray:
    if basis.phys_shape == coeffs.shape[:2]:
        return coeffs
    padded = np.zeros(basis.phys_shape + coeffs.shape[2:], dtype=complex)
    padded[np.ix_(basis.dst1, basis.dst2)] = coeffs[np.ix_(basis.src1, basis.src2)]
    return padded


def _truncate(coeffs: np.ndarray, basis: SpectralBasis) -> np.ndarray:
    grid = basis.grid
    if coeffs.shape[:2] == grid.shape:
        out = coeffs
    else:
        out = np.zeros(grid.shape + coeffs.shape[2:], dtype=complex)
        out[np.ix_(basis.src1, basis.src2)] = coeffs[np.ix_(basis.dst1, basis.dst2)]
    return apply_mask(out, basis)


def apply_mask(coeffs: np.ndarray, basis: SpectralBasis) -> np.ndarray:
    mask = basis.mask if coeffs.ndim == 2 else basis.mask[..., None]
    return np.where(mask, coeffs, 0.0)


class _Field:
    """Shared arithmetic for surface and bulk fields (coefficients are never mutated)"""

    __slots__ = ('grid', 'coeffs', 'real')
    ndim = 2

    def __init__(self, grid: GridSpec, coeffs: np.ndarray, real: bool = True):
        coeffs = np.asarray(coeffs, dtype=complex)
        expected = grid.shape if self.ndim == 2 else grid.bulk_shape
        if coeffs.shape != expected:
            raise GridMismatch(f"{type(self).__name__} expects shape {expected}, got {coeffs.shape}")
        self.grid = grid
        self.coeffs = coeffs
        self.real = real

    @property
    def basis(self) -> SpectralBasis:
        return spectral_basis(self.grid)

    @classmethod
    def zeros(cls, grid: GridSpec):
        shape = grid.shape if cls.ndim == 2 else grid.bulk_shape
        return cls(grid, np.zeros(shape, dtype=complex))

    @classmethod
    def constant(cls, grid: GridSpec, value: float):
        out = cls.zeros(grid)
        out.coeffs[0, 0, ...] = value
        return out

    @classmethod
    def from_values(cls, grid: GridSpec, values: np.ndarray, real: bool = True):
        values = np.asarray(values)
        if real:
            values = values.real
        return cls(grid, _forward(values), real=real)

    @classmethod
    def from_padded_values(cls, grid: GridSpec, values: np.ndarray):
        """Truncate real values sampled on the dealiasing grid back to the retained modes"""
        basis = spectral_basis(grid)
        return cls(grid, _truncate(_forward(np.asarray(values, dtype=float)), basis))

    @property
    def values(self) -> np.ndarray:
        physical = _inverse(self.coeffs)
        return physical.real if self.real else physical

    def padded_values(self) -> np.ndarray:
        """Physical values on the dealiasing grid of the rule"""
        physical = _inverse(_pad(self.coeffs, self.basis))
        return physical.real if self.real else physical

    def masked(self):
        return type(self)(self.grid, apply_mask(self.coeffs, self.basis), self.real)

    def symmetrized(self):
        """Project onto real physical values (restores Hermitian symmetry)"""
        return type(self)(self.grid, _forward(_inverse(self.coeffs).real), True)

    def copy(self):
        return type(self)(self.grid, self.coeffs.copy(), self.real)

    def _check(self, other):
        if not isinstance(other, type(self)):
            raise GridMismatch(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.grid != self.grid:
            raise GridMismatch("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            out = self.coeffs.copy()
            out[0, 0, ...] += other
            return type(self)(self.grid, out, self.real)
        self._check(other)
        return type(self)(self.grid, self.coeffs + other.coeffs, self.real and other.real)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return type(self)(self.grid, -self.coeffs, self.real)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return type(self)(self.grid, self.coeffs * float(other), self.real)
        return product(self, other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return type(self)(self.grid, self.coeffs / float(scalar), self.real)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


class SurfaceField(_Field):
    """Scalar field on the periodic cross-section, stored as forward-normalized fft2 coefficients"""

    ndim = 2

    @property
    def mean(self) -> float:
        return float(self.coeffs[0, 0].real)


class BulkField(_Field):
    """Scalar field on the strip: horizontal Fourier coefficients at each vertical node"""

    ndim = 3

    def trace_top(self) -> SurfaceField:
        return SurfaceField(self.grid, self.coeffs[..., 0].copy(), self.real)

    def trace_bottom(self) -> SurfaceField:
        return SurfaceField(self.grid, self.coeffs[..., -1].copy(), self.real)

    @classmethod
    def from_profile(cls, surface: SurfaceField, profile: np.ndarray) -> 'BulkField':
        """Lift a surface field with a vertical profile (Nz,) or per-mode profiles (N1, N2, Nz)"""
        profile = np.asarray(profile)
        if profile.ndim == 1:
            profile = profile[None, None, :]
        return cls(surface.grid, surface.coeffs[..., None] * profile, surface.real)

    @classmethod
    def from_function_of_depth(cls, grid: GridSpec, func: Callable[[np.ndarray], np.ndarray]) -> 'BulkField':
        out = cls.zeros(grid)
        out.coeffs[0, 0, :] = func(spectral_basis(grid).z)
        return out


Field = Union[SurfaceField, BulkField]


def _same_grid(fields) -> GridSpec:
    first = fields[0]
    for other in fields[1:]:
        first._check(other)
    return first.grid


def pointwise(func: Callable[..., Union[np.ndarray, Tuple[np.ndarray, ...]]], *fields: Field):
    """Evaluate a pointwise nonlinearity on the dealiasing grid, then truncate

    func receives physical arrays and may return one array or a tuple of
    arrays; the result has the same field type as the inputs.
    """
    if not fields:
        raise ValueError("pointwise needs at least one field")
    grid = _same_grid(fields)
    basis = spectral_basis(grid)
    kind = type(fields[0])
    physical = [f.padded_values() for f in fields]
    result = func(*physical)

    def lower(array):
        return kind.from_padded_values(grid, array)

    if isinstance(result, tuple):
        return tuple(lower(r) for r in result)
    return lower(result)


def product(f: Field, g: Field) -> Field:
    """Dealiased pointwise product"""
    return pointwise(np.multiply, f, g)


def deriv_horizontal(f: Field, axis: int, order: int = 1) -> Field:
    """Spectral derivative along x1 (axis=1) or x2 (axis=2)"""
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    if int(order) != order or order < 1 or order > MAX_HORIZONTAL_ORDER:
        raise ValueError(f"derivative order must be in 1..{MAX_HORIZONTAL_ORDER}")
    basis = f.basis
    k = basis.k1 if axis == 1 else basis.k2
    multiplier = (1j * k) ** order
    if order % 2:
        multiplier = np.where(basis.nyquist, 0.0, multiplier)
    if f.ndim == 3:
        multiplier = multiplier[..., None]
    return type(f)(f.grid, f.coeffs * multiplier, f.real)


def deriv_vertical(f: BulkField, order: int = 1) -> BulkField:
    """Chebyshev collocation derivative in x3"""
    if not isinstance(f, BulkField):
        raise GridMismatch("vertical derivatives need a BulkField")
    if order not in (1, 2):
        raise ValueError("vertical derivative order must be 1 or 2")
    matrix = f.basis.D if order == 1 else f.basis.D2
    return BulkField(f.grid, f.coeffs @ matrix.T, f.real)


def laplacian_horizontal(f: Field) -> Field:
    multiplier = -f.basis.kmag ** 2
    if f.ndim == 3:
        multiplier = multiplier[..., None]
    return type(f)(f.grid, f.coeffs * multiplier, f.real)


def gradient_horizontal(f: Field) -> Tuple[Field, Field]:
    return deriv_horizontal(f, 1), deriv_horizontal(f, 2)


def integrate_surface(f: SurfaceField) -> float:
    return f.grid.area * float(f.coeffs[0, 0].real)


def integrate_bulk(f: BulkField) -> float:
    return f.grid.area * float(np.dot(f.basis.weights, f.coeffs[0, 0, :].real))


def integrate_surface_values(values: np.ndarray, grid: GridSpec) -> float:
    """Trapezoidal (exact for band-limited data) integral of physical surface values"""
    return grid.area * float(np.mean(values))


def integrate_bulk_values(values: np.ndarray, grid: GridSpec) -> float:
    basis = spectral_basis(grid)
    return grid.area * float(np.dot(basis.weights, np.mean(values, axis=(0, 1))))


def integrate_pointwise(func: Callable[..., np.ndarray], *fields: Field) -> float:
    """Integral of a pointwise expression sampled on the dealiasing grid"""
    grid = _same_grid(fields)
    values = func(*[f.padded_values() for f in fields])
    if fields[0].ndim == 2:
        return grid.area * float(np.mean(values))
    return grid.area * float(np.dot(spectral_basis(grid).weights, np.mean(values, axis=(0, 1))))


def inner_surface(f: SurfaceField, g: SurfaceField) -> float:
    f._check(g)
    return f.grid.area * float(np.sum(f.coeffs * np.conj(g.coeffs)).real)


def inner_bulk(f: BulkField, g: BulkField) -> float:
    f._check(g)
    per_node = np.sum(f.coeffs * np.conj(g.coeffs), axis=(0, 1)).real
    return f.grid.area * float(np.dot(f.basis.weights, per_node))


def sobolev_norm_surface(f: SurfaceField, s: float) -> float:
    """Fourier-multiplier H^s norm on the torus (any real s)"""
    weight = (1.0 + f.basis.kmag ** 2) ** s
    return float(np.sqrt(f.grid.area * np.sum(weight * np.abs(f.coeffs) ** 2)))


def homogeneous_norm_surface(f: SurfaceField, s: float) -> float:
    """|k|^s weighted seminorm, the mean mode carries no weight"""
    kmag = f.basis.kmag
    weight = np.where(kmag > 0, kmag, 1.0) ** (2 * s)
    weight = np.where(kmag > 0, weight, 0.0)
    return float(np.sqrt(f.grid.area * np.sum(weight * np.abs(f.coeffs) ** 2)))


def sobolev_norm_bulk(f: BulkField, k: int) -> float:
    """Integer-order H^k norm by summing all derivatives with |alpha| <= k

    Horizontal derivatives are spectral, vertical ones use the Chebyshev
    matrix; the result is a discrete norm equivalent to H^k(Omega).
    """
    if int(k) != k or k < 0 or k > MAX_BULK_SOBOLEV_ORDER:
        raise ValueError(f"bulk Sobolev order must be in 0..{MAX_BULK_SOBOLEV_ORDER}")
    basis = f.basis
    vertical = [f.coeffs]
    for _ in range(k):
        vertical.append(vertical[-1] @ basis.D.T)
    total = 0.0
    for a1, a2, a3 in index_product(range(k + 1), repeat=3):
        if a1 + a2 + a3 > k:
            continue
        multiplier = ((1j * basis.k1) ** a1 * (1j * basis.k2) ** a2)[..., None]
        per_node = np.sum(np.abs(multiplier * vertical[a3]) ** 2, axis=(0, 1))
        total += float(np.dot(basis.weights, per_node))
    return float(np.sqrt(f.grid.area * total))
