#!/usr/bin/env python3
"""
Surface-tension closure sigma(c), the equilibrium concentration and the entropy xi_r
"""

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Tuple, Union

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from .errors import InvalidConcentration, OutOfRange, Singular
from .spectral import SurfaceField, integrate_pointwise, deriv_horizontal

logger = logging.getLogger(__name__)

TENSION_KINDS = ('linear', 'exponential', 'tabulated')
QUAD_TOLERANCE = 1e-12

ArrayLike = Union[float, np.ndarray]


@lru_cache(maxsize=8)
def _spline(table_x: Tuple[float, ...], table_sigma: Tuple[float, ...]) -> CubicSpline:
    return CubicSpline(np.asarray(table_x), np.asarray(table_sigma))


@dataclass(frozen=True)
class TensionModel:
    """Constitutive law sigma(c) with an optional frozen equilibrium concentration c0

    linear: sigma = sigma_s - beta x, valid on [0, sigma_s / beta)
    exponential: sigma = sigma_s exp(-beta x), valid on [0, inf)
    tabulated: cubic spline through (table_x, table_sigma), valid on the table range
    """

    kind: str = 'linear'
    sigma_s: float = 1.0
    beta: float = 0.25
    table_x: Tuple[float, ...] = ()
    table_sigma: Tuple[float, ...] = ()
    c0: Optional[float] = None

    def __post_init__(self):
        if self.kind not in TENSION_KINDS:
            raise ValueError(f"unknown tension kind '{self.kind}'")
        if self.kind == 'tabulated':
            xs = np.asarray(self.table_x, dtype=float)
            if xs.size < 4 or xs.size != len(self.table_sigma) or np.any(np.diff(xs) <= 0):
                raise ValueError("tabulated tension needs >= 4 strictly increasing samples")
            if np.any(np.asarray(self.table_sigma) <= 0):
                raise ValueError("tabulated tension must be positive")
            sample = np.linspace(xs[0], xs[-1], 8 * xs.size)
            if np.any(_spline(self.table_x, self.table_sigma)(sample, 1) >= 0):
                raise ValueError("tabulated tension must be strictly decreasing")
        elif not (self.sigma_s > 0 and self.beta > 0):
            raise ValueError("sigma_s and beta must be positive")
        if self.c0 is not None and not self.c0 > 0:
            raise ValueError("c0 must be positive")

    # validity window

    @property
    def window(self) -> Tuple[float, float]:
        """Admissible concentrations [lo, hi]; the linear law reaches sigma = 0 at hi"""
        if self.kind == 'linear':
            return 0.0, self.sigma_s / self.beta
        if self.kind == 'exponential':
            return 0.0, np.inf
        return float(self.table_x[0]), float(self.table_x[-1])

    def check_window(self, x: ArrayLike) -> None:
        lo, hi = self.window
        x = np.asarray(x, dtype=float)
        if np.any(x < lo) or np.any(x > hi) or np.any(~np.isfinite(x)):
            raise OutOfRange(
                f"concentration outside the {self.kind} validity window [{lo}, {hi}]",
                context={'min': float(np.min(x)), 'max': float(np.max(x))}
            )

    # sigma and derivatives

    def sigma(self, x: ArrayLike) -> ArrayLike:
        if self.kind == 'linear':
            return self.sigma_s - self.beta * np.asarray(x, dtype=float)
        if self.kind == 'exponential':
            return self.sigma_s * np.exp(-self.beta * np.asarray(x, dtype=float))
        return _spline(self.table_x, self.table_sigma)(x)

    def sigma_prime(self, x: ArrayLike) -> ArrayLike:
        if self.kind == 'linear':
            return -self.beta * np.ones_like(np.asarray(x, dtype=float))
        if self.kind == 'exponential':
            return -self.beta * self.sigma_s * np.exp(-self.beta * np.asarray(x, dtype=float))
        return _spline(self.table_x, self.table_sigma)(x, 1)

    def sigma_second(self, x: ArrayLike) -> ArrayLike:
        if self.kind == 'linear':
            return np.zeros_like(np.asarray(x, dtype=float))
        if self.kind == 'exponential':
            return self.beta ** 2 * self.sigma_s * np.exp(-self.beta * np.asarray(x, dtype=float))
        return _spline(self.table_x, self.table_sigma)(x, 2)

    # linearization about c0

    def _require_c0(self) -> float:
        if self.c0 is None:
            raise ValueError("equilibrium concentration c0 not set on this model")
        return float(self.c0)

    @property
    def sigma0(self) -> float:
        return float(self.sigma(self._require_c0()))

    @property
    def sigma0_prime(self) -> float:
        return float(self.sigma_prime(self._require_c0()))

    def with_c0(self, c0: float) -> 'TensionModel':
        self.check_window(c0)
        return replace(self, c0=float(c0))

    @property
    def regime_window(self) -> Tuple[float, float]:
        c0 = self._require_c0()
        return 0.5 * c0, 1.5 * c0

    @property
    def fingerprint(self) -> tuple:
        return (self.kind, self.sigma_s, self.beta, self.table_x, self.table_sigma, self.c0)

    def to_dict(self) -> dict:
        data = {'kind': self.kind, 'c0': self.c0}
        if self.kind == 'tabulated':
            data.update(table_x=list(self.table_x), table_sigma=list(self.table_sigma))
        else:
            data.update(sigma_s=self.sigma_s, beta=self.beta)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'TensionModel':
        return cls(
            kind=data.get('kind', 'linear'),
            sigma_s=float(data.get('sigma_s', 1.0)),
            beta=float(data.get('beta', 0.25)),
            table_x=tuple(float(x) for x in data.get('table_x', ())),
            table_sigma=tuple(float(s) for s in data.get('table_sigma', ())),
            c0=None if data.get('c0') is None else float(data['c0']),
        )


def equilibrium_concentration(eta0: SurfaceField, ctilde0: SurfaceField) -> float:
    """c0 = |Sigma|^-1 * integral of ctilde0 * sqrt(1 + |grad eta0|^2)"""
    if np.any(ctilde0.values <= 0.0):
        raise InvalidConcentration(
            "initial concentration must be positive everywhere",
            context={'min': float(np.min(ctilde0.values))}
        )
    if abs(eta0.mean) > 1e-14:
        # the area element ignores the mean, only the bookkeeping is affected
        logger.warning("eta0 has mean %.3e; zero-average condition assumes it is removed", eta0.mean)
    e1 = deriv_horizontal(eta0, 1)
    e2 = deriv_horizontal(eta0, 2)
    mass = integrate_pointwise(lambda c, a, b: c * np.sqrt(1.0 + a * a + b * b), ctilde0, e1, e2)
    return mass / eta0.grid.area


def _as_array(x: ArrayLike) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _finish(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values[0]) if scalar else values


def _quad(func, lo: float, hi: float) -> float:
    value, _ = integrate.quad(func, lo, hi, epsabs=QUAD_TOLERANCE, epsrel=QUAD_TOLERANCE, limit=200)
    return value


def xi_prime(model: TensionModel, r: float, x: ArrayLike) -> ArrayLike:
    """xi_r'(x) = -int_r^x sigma'(z)/z dz"""
    model.check_window(r)
    model.check_window(x)
    xs, scalar = _as_array(x)
    if np.any(xs <= 0.0):
        raise Singular("xi_r' is unbounded at x = 0")
    if model.kind == 'linear':
        out = model.beta * np.log(xs / r)
    elif model.kind == 'exponential':
        out = model.beta * model.sigma_s * (special.exp1(model.beta * r) - special.exp1(model.beta * xs))
    else:
        out = np.array([-_quad(lambda z: float(model.sigma_prime(z)) / z, r, point) for point in xs])
    return _finish(out, scalar)


def xi(model: TensionModel, r: float, x: ArrayLike) -> ArrayLike:
    """Entropy xi_r(x) = sigma(x) + x xi_r'(x), continuously extended by xi_r(0) = sigma(0)"""
    if not r > 0:
        raise OutOfRange("reference concentration r must be positive")
    model.check_window(r)
    model.check_window(x)
    xs, scalar = _as_array(x)
    out = np.asarray(model.sigma(xs), dtype=float).copy()
    positive = xs > 0.0
    if np.any(positive):
        out[positive] += xs[positive] * np.atleast_1d(xi_prime(model, r, xs[positive]))
    return _finish(out, scalar)


def xi_quadrature(model: TensionModel, r: float, x: ArrayLike) -> ArrayLike:
    """xi_r(x) = x (sigma(r)/r - int_r^x sigma(z)/z^2 dz) by adaptive quadrature"""
    model.check_window(r)
    model.check_window(x)
    xs, scalar = _as_array(x)
    sigma_r = float(model.sigma(r))
    out = np.empty_like(xs)
    for i, xi_ in enumerate(xs):
        if xi_ == 0.0:
            out[i] = float(model.sigma(0.0))
        else:
            out[i] = xi_ * (sigma_r / r - _quad(lambda z: float(model.sigma(z)) / z ** 2, r, xi_))
    return _finish(out, scalar)


def xi_second(model: TensionModel, r: float, x: ArrayLike) -> ArrayLike:
    """xi_r''(x) = -sigma'(x)/x, independent of r"""
    model.check_window(x)
    xs, scalar = _as_array(x)
    if np.any(xs <= 0.0):
        raise Singular("xi_r'' = -sigma'(x)/x is singular at x = 0")
    return _finish(-np.asarray(model.sigma_prime(xs), dtype=float) / xs, scalar)
