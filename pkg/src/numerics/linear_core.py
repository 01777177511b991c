#!/usr/bin/env python3
"""
Constant-coefficient linear operator of the perturbed system
Per-mode implicit solves for (u, p, eta, c) and the stationary Stokes problems
"""

import logging
import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, LinAlgWarning, eigvals, lu_factor, lu_solve

from .errors import IncompatibleData, SingularMode
from .spectral import (
    BulkField,
    GridSpec,
    SurfaceField,
    deriv_horizontal,
    deriv_vertical,
    inner_bulk,
    inner_surface,
    spectral_basis,
)
from .tension import TensionModel

logger = logging.getLogger(__name__)

TOPS = ('stress', 'dirichlet')
FLUX_TOLERANCE = 1e-10
DIVERGENCE_TAIL_TOLERANCE = 1e-8
CACHE_SIZE = 8


@dataclass(frozen=True)
class LinearParameters:
    """Scalars of the linear operator: diffusivity and the tension linearized at c0"""

    gamma: float
    sigma0: float
    sigma0_prime: float
    c0: float

    @classmethod
    def from_model(cls, model: TensionModel, gamma: float) -> 'LinearParameters':
        return cls(gamma=float(gamma), sigma0=model.sigma0,
                   sigma0_prime=model.sigma0_prime, c0=float(model.c0))


class LinearRows(NamedTuple):
    """Right-hand sides (or operator images) arranged like the unknowns

    mom: three bulk coefficient arrays, node 0 holds the top boundary row and
    node Nz-1 the bottom one; cont: bulk coefficient array whose first and
    last nodes hold the pressure constraints; eta, c: surface arrays or None.
    """

    mom: Tuple[np.ndarray, np.ndarray, np.ndarray]
    cont: np.ndarray
    eta: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None


class _Layout:
    """Unknown ordering per mode: u1, u2, u3, p at Nz nodes each, then eta and c"""

    def __init__(self, Nz: int, surface: bool):
        self.Nz = Nz
        self.p = slice(3 * Nz, 4 * Nz)
        self.eta = 4 * Nz if surface else None
        self.c = 4 * Nz + 1 if surface else None
        self.size = 4 * Nz + (2 if surface else 0)

    def u(self, i: int) -> slice:
        return slice(i * self.Nz, (i + 1) * self.Nz)


def _mode_matrix(k1: float, k2: float, grid: GridSpec, tau: Optional[float],
                 params: Optional[LinearParameters], top: str, surface: bool) -> np.ndarray:
    basis = spectral_basis(grid)
    Nz = grid.Nz
    lay = _Layout(Nz, surface)
    M = np.zeros((lay.size, lay.size), dtype=complex)
    eye = np.eye(Nz)
    D, D2 = basis.D, basis.D2
    cheb = basis.cheb_forward
    kk = k1 * k1 + k2 * k2
    mode0 = kk == 0.0
    ik = (1j * k1, 1j * k2)

    lap = D2 - kk * eye
    if tau is None:
        op, g = -lap, 1.0
    else:
        op, g = eye - tau * lap, tau

    # momentum
    for i in range(3):
        rows = lay.u(i)
        M[rows, rows] = op
        M[rows, lay.p] = g * ik[i] * eye if i < 2 else g * D

    # bottom: u = 0 (or the prescribed bottom velocity)
    for i in range(3):
        row = lay.u(i).start + Nz - 1
        M[row, :] = 0.0
        M[row, row] = 1.0

    # top: stress balance or prescribed velocity
    u3 = lay.u(2)
    for i in range(3):
        row = lay.u(i).start
        M[row, :] = 0.0
        if top == 'dirichlet':
            M[row, row] = 1.0
        elif i < 2:
            M[row, u3.start] = -ik[i]
            M[row, lay.u(i)] -= D[0]
            if surface:
                M[row, lay.c] = params.sigma0_prime * ik[i]
        else:
            M[row, lay.p.start] = 1.0
            M[row, u3] -= 2.0 * D[0]
            if surface:
                M[row, lay.eta] = -(1.0 + params.sigma0 * kk)

    # continuity, with the pressure degree constraints on the end rows
    M[lay.p, lay.u(0)] = ik[0] * eye
    M[lay.p, lay.u(1)] = ik[1] * eye
    M[lay.p, u3] = D
    first, last = lay.p.start, lay.p.start + Nz - 1
    M[first, :] = 0.0
    M[first, lay.p] = cheb[Nz - 1]
    if not mode0:
        M[last, :] = 0.0
        M[last, lay.p] = cheb[Nz - 2]
    elif top == 'dirichlet':
        M[last, :] = 0.0
        M[last, lay.p] = basis.weights

    if surface:
        if tau is None:
            raise ValueError("surface unknowns need a time step")
        M[lay.eta, lay.eta] = 1.0
        if not mode0:
            M[lay.eta, u3.start] = -tau
        M[lay.c, lay.c] = 1.0 + tau * params.gamma * kk
        M[lay.c, lay.u(0).start] = tau * params.c0 * ik[0]
        M[lay.c, lay.u(1).start] = tau * params.c0 * ik[1]
    return M


@dataclass(eq=False)
class ModeSystem:
    """Assembled and factorized linear system of one horizontal mode"""

    mode: Tuple[int, int]
    k: Tuple[float, float]
    dt: Optional[float]
    params: Optional[LinearParameters]
    top: str
    surface: bool
    matrix: np.ndarray
    lu: np.ndarray
    piv: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return lu_solve((self.lu, self.piv), rhs)

    def carry_matrix(self) -> np.ndarray:
        """R: copies the previous u (momentum interior rows), eta and c into the right-hand side"""
        Nz = (self.size - (2 if self.surface else 0)) // 4
        lay = _Layout(Nz, self.surface)
        R = np.zeros((self.size, self.size))
        for i in range(3):
            for j in range(1, Nz - 1):
                idx = lay.u(i).start + j
                R[idx, idx] = 1.0
        if self.surface:
            if self.k[0] ** 2 + self.k[1] ** 2 > 0.0:
                R[lay.eta, lay.eta] = 1.0
            R[lay.c, lay.c] = 1.0
        return R

    def advance(self, x: np.ndarray) -> np.ndarray:
        """One unforced implicit step of this mode"""
        return self.solve(self.carry_matrix() @ x)


def assemble_mode(n: Tuple[int, int], grid: GridSpec, dt: Optional[float],
                  params: Optional[LinearParameters], top: str = 'stress',
                  surface: bool = True) -> ModeSystem:
    """Assemble and factorize the system of mode n = (m1, m2)"""
    if top not in TOPS:
        raise ValueError(f"top must be one of {TOPS}")
    if dt is not None and not dt > 0:
        raise ValueError("dt must be positive")
    if surface and (dt is None or params is None):
        raise ValueError("the evolving system needs dt and parameters")
    k1 = 2.0 * np.pi * n[0] / grid.L1
    k2 = 2.0 * np.pi * n[1] / grid.L2
    M = _mode_matrix(k1, k2, grid, dt, params, top, surface)
    with warnings.catch_warnings():
        warnings.simplefilter('error', LinAlgWarning)
        try:
            lu, piv = lu_factor(M)
        except (LinAlgError, LinAlgWarning, ValueError) as e:
            raise SingularMode(f"mode {n} factorization failed: {e}",
                               context={'mode': list(n), 'dt': dt}) from e
    if not np.all(np.isfinite(lu)) or np.any(np.diag(lu) == 0.0):
        raise SingularMode(f"mode {n} is singular", context={'mode': list(n), 'dt': dt})
    return ModeSystem(mode=(int(n[0]), int(n[1])), k=(k1, k2), dt=dt, params=params,
                      top=top, surface=surface, matrix=M, lu=lu, piv=piv)


class FactorizationCache:
    """Factorized mode systems keyed by (grid, dt, parameters, boundary kind)

    Lookups are lock-free; insertion is exclusive. Least recently inserted
    entries are evicted beyond `capacity`.
    """

    def __init__(self, capacity: int = CACHE_SIZE):
        self.capacity = capacity
        self._systems: 'OrderedDict[tuple, List[ModeSystem]]' = OrderedDict()
        self._lock = threading.Lock()
        self.builds = 0

    def systems(self, grid: GridSpec, dt: Optional[float], params: Optional[LinearParameters],
                top: str = 'stress', surface: bool = True) -> List[ModeSystem]:
        key = (grid, dt, params, top, surface)
        found = self._systems.get(key)
        if found is not None:
            return found
        with self._lock:
            found = self._systems.get(key)
            if found is None:
                basis = spectral_basis(grid)
                logger.debug("Factorizing %d modes (dt=%s, top=%s)", len(basis.retained), dt, top)
                found = [assemble_mode((basis.m1[i1], basis.m2[i2]), grid, dt, params, top, surface)
                         for i1, i2 in basis.retained]
                self._systems[key] = found
                self.builds += 1
                while len(self._systems) > self.capacity:
                    self._systems.popitem(last=False)
        return found

    def clear(self) -> None:
        with self._lock:
            self._systems.clear()


DEFAULT_CACHE = FactorizationCache()


def _pack_rows(rows: LinearRows, basis) -> np.ndarray:
    i1, i2 = basis.retained[:, 0], basis.retained[:, 1]
    parts = [m[i1, i2, :] for m in rows.mom] + [rows.cont[i1, i2, :]]
    if rows.eta is not None:
        parts += [rows.eta[i1, i2][:, None], rows.c[i1, i2][:, None]]
    return np.concatenate(parts, axis=1)


def _unpack(solution: np.ndarray, grid: GridSpec, surface: bool):
    basis = spectral_basis(grid)
    i1, i2 = basis.retained[:, 0], basis.retained[:, 1]
    lay = _Layout(grid.Nz, surface)
    bulk = [np.zeros(grid.bulk_shape, dtype=complex) for _ in range(4)]
    for block, blk_slice in enumerate((lay.u(0), lay.u(1), lay.u(2), lay.p)):
        bulk[block][i1, i2, :] = solution[:, blk_slice]
    if not surface:
        return bulk, None, None
    eta = np.zeros(grid.shape, dtype=complex)
    c = np.zeros(grid.shape, dtype=complex)
    eta[i1, i2] = solution[:, lay.eta]
    c[i1, i2] = solution[:, lay.c]
    return bulk, eta, c


def solve_rows(rows: LinearRows, grid: GridSpec, dt: Optional[float],
               params: Optional[LinearParameters], top: str = 'stress',
               cache: Optional[FactorizationCache] = None):
    """Per-mode solves of the system whose images are `rows`

    Returns coefficient arrays ([u1, u2, u3, p], eta, c); modes outside the
    retained band are zero.
    """
    surface = rows.eta is not None
    systems = (cache or DEFAULT_CACHE).systems(grid, dt, params, top, surface)
    basis = spectral_basis(grid)
    rhs = _pack_rows(rows, basis)
    solution = np.empty_like(rhs)
    for idx, system in enumerate(systems):
        solution[idx] = system.solve(rhs[idx])
    return _unpack(solution, grid, surface)


def apply_linear_operator(u: Sequence[BulkField], p: BulkField,
                          eta: Optional[SurfaceField], c: Optional[SurfaceField],
                          dt: Optional[float], params: Optional[LinearParameters],
                          top: str = 'stress') -> LinearRows:
    """Field-wise image of the per-mode operator, built from the global spectral derivatives"""
    grid = p.grid
    basis = spectral_basis(grid)
    kk = basis.kmag ** 2
    mode0 = kk == 0.0
    ik = (1j * basis.k1, 1j * basis.k2)
    U = [ui.coeffs for ui in u]
    P = p.coeffs
    dU = [deriv_vertical(ui).coeffs for ui in u]
    lap = [deriv_vertical(ui, 2).coeffs - kk[..., None] * Ui for ui, Ui in zip(u, U)]
    grad_p = (deriv_horizontal(p, 1).coeffs, deriv_horizontal(p, 2).coeffs, deriv_vertical(p).coeffs)
    # deriv_horizontal zeroes Nyquist odd derivatives; the mode matrices never see Nyquist
    if dt is None:
        mom = [-lap[i] + grad_p[i] for i in range(3)]
    else:
        mom = [U[i] - dt * lap[i] + dt * grad_p[i] for i in range(3)]

    surface = eta is not None
    for i in range(3):
        mom[i][..., -1] = U[i][..., -1]
        if top == 'dirichlet':
            mom[i][..., 0] = U[i][..., 0]
        elif i < 2:
            mom[i][..., 0] = -(ik[i] * U[2][..., 0] + dU[i][..., 0])
            if surface:
                mom[i][..., 0] += params.sigma0_prime * ik[i] * c.coeffs
        else:
            mom[i][..., 0] = P[..., 0] - 2.0 * dU[2][..., 0]
            if surface:
                mom[i][..., 0] -= (1.0 + params.sigma0 * kk) * eta.coeffs

    cheb = basis.cheb_forward
    cont = ik[0][..., None] * U[0] + ik[1][..., None] * U[1] + dU[2]
    cont[..., 0] = P @ cheb[-1]
    if top == 'dirichlet':
        mode0_last = P @ basis.weights
    else:
        mode0_last = cont[..., -1]
    cont[..., -1] = np.where(mode0, mode0_last, P @ cheb[-2])

    eta_row = c_row = None
    if surface:
        eta_row = np.where(mode0, eta.coeffs, eta.coeffs - dt * U[2][..., 0])
        c_row = (c.coeffs * (1.0 + dt * params.gamma * kk)
                 + dt * params.c0 * (ik[0] * U[0][..., 0] + ik[1] * U[1][..., 0]))
    return LinearRows(mom=tuple(mom), cont=cont, eta=eta_row, c=c_row)


def _fields_from(bulk, eta, c, grid, real=True):
    u = tuple(BulkField(grid, bulk[i], real) for i in range(3))
    p = BulkField(grid, bulk[3], real)
    if eta is None:
        return u, p, None, None
    return u, p, SurfaceField(grid, eta, real), SurfaceField(grid, c, real)


def _symmetrize(u, p, eta=None, c=None):
    u = tuple(ui.symmetrized() for ui in u)
    p = p.symmetrized()
    if eta is None:
        return u, p
    return u, p, eta.symmetrized(), c.symmetrized()


def evolution_rows(u_old: Sequence[BulkField], eta_old: SurfaceField, c_old: SurfaceField,
                   forcing, dt: float) -> LinearRows:
    """Right-hand side of one implicit step; forcing may be None (pure linear step)"""
    grid = eta_old.grid
    mode0 = spectral_basis(grid).kmag == 0.0
    mom = []
    for i in range(3):
        rhs = u_old[i].coeffs.copy()
        if forcing is not None:
            rhs = rhs + dt * forcing.G1[i].coeffs
            rhs[..., 0] = forcing.G3[i].coeffs
        else:
            rhs[..., 0] = 0.0
        rhs[..., -1] = 0.0
        mom.append(rhs)
    if forcing is not None:
        cont = forcing.G2.coeffs.copy()
        eta = eta_old.coeffs + dt * forcing.G4.coeffs
        c = c_old.coeffs + dt * forcing.G5.coeffs
    else:
        cont = np.zeros(grid.bulk_shape, dtype=complex)
        eta, c = eta_old.coeffs.copy(), c_old.coeffs.copy()
    cont[..., 0] = 0.0
    cont[..., -1] = np.where(mode0, cont[..., -1], 0.0)
    eta = np.where(mode0, 0.0, eta)
    return LinearRows(mom=tuple(mom), cont=cont, eta=eta, c=c)


def step_linear(u_old: Sequence[BulkField], eta_old: SurfaceField, c_old: SurfaceField,
                forcing, dt: float, params: LinearParameters,
                cache: Optional[FactorizationCache] = None):
    """One implicit step of the linear system with explicit forcing G1..G5

    Returns (u, p, eta, c) with Hermitian symmetry restored.
    """
    grid = eta_old.grid
    rows = evolution_rows(u_old, eta_old, c_old, forcing, dt)
    bulk, eta, c = solve_rows(rows, grid, dt, params, 'stress', cache)
    return _symmetrize(*_fields_from(bulk, eta, c, grid))


def _zeros_vector(grid, kind):
    return tuple(kind.zeros(grid) for _ in range(3))


def drop_divergence_tail(h: BulkField) -> BulkField:
    """Remove the highest Chebyshev coefficient of the mean-mode profile of h"""
    basis = h.basis
    coeffs = h.coeffs.copy()
    tail = coeffs[0, 0, :] @ basis.cheb_forward[-1]
    # T_N at the Gauss-Lobatto nodes is cos(pi j) = (-1)^j
    coeffs[0, 0, :] -= tail * (-1.0) ** np.arange(h.grid.Nz)
    return BulkField(h.grid, coeffs, h.real)


def solve_stokes_stress(f: Optional[Sequence[BulkField]], h: Optional[BulkField],
                        alpha: Optional[Sequence[SurfaceField]], grid: GridSpec,
                        cache: Optional[FactorizationCache] = None):
    """-Lap u + grad p = f, div u = h, (pI - Du) e3 = alpha on top, u = 0 on the bottom"""
    f = f or _zeros_vector(grid, BulkField)
    h = h if h is not None else BulkField.zeros(grid)
    alpha = alpha or _zeros_vector(grid, SurfaceField)
    profile = h.coeffs[0, 0, :]
    tail = abs(profile @ spectral_basis(grid).cheb_forward[-1])
    scale = max(1.0, float(np.max(np.abs(profile))))
    if tail > DIVERGENCE_TAIL_TOLERANCE * scale:
        raise IncompatibleData(
            "mean-mode divergence has an unresolved top Chebyshev component",
            context={'tail': float(tail)}
        )
    mode0 = spectral_basis(grid).kmag == 0.0
    mom = []
    for i in range(3):
        rhs = f[i].coeffs.copy()
        rhs[..., 0] = alpha[i].coeffs
        rhs[..., -1] = 0.0
        mom.append(rhs)
    cont = h.coeffs.copy()
    cont[..., 0] = 0.0
    cont[..., -1] = np.where(mode0, cont[..., -1], 0.0)
    bulk, _, _ = solve_rows(LinearRows(tuple(mom), cont), grid, None, None, 'stress', cache)
    return _symmetrize(*_fields_from(bulk, None, None, grid)[:2])


def solve_stokes_dirichlet(f: Optional[Sequence[BulkField]], h: Optional[BulkField],
                           phi1: Optional[Sequence[SurfaceField]], grid: GridSpec,
                           phi2: Optional[Sequence[SurfaceField]] = None,
                           cache: Optional[FactorizationCache] = None):
    """-Lap u + grad p = f, div u = h, u = phi1 on top, u = phi2 on the bottom; p has zero mean"""
    f = f or _zeros_vector(grid, BulkField)
    h = h if h is not None else BulkField.zeros(grid)
    phi1 = phi1 or _zeros_vector(grid, SurfaceField)
    phi2 = phi2 or _zeros_vector(grid, SurfaceField)
    basis = spectral_basis(grid)
    flux = float(np.dot(basis.weights, h.coeffs[0, 0, :].real))
    boundary = float(phi1[2].coeffs[0, 0].real - phi2[2].coeffs[0, 0].real)
    if abs(flux - boundary) > FLUX_TOLERANCE * max(1.0, abs(flux), abs(boundary)):
        raise IncompatibleData(
            "net flux of the divergence does not match the boundary velocities",
            context={'flux': flux, 'boundary': boundary}
        )
    mom = []
    for i in range(3):
        rhs = f[i].coeffs.copy()
        rhs[..., 0] = phi1[i].coeffs
        rhs[..., -1] = phi2[i].coeffs
        mom.append(rhs)
    cont = h.coeffs.copy()
    cont[..., 0] = 0.0
    cont[..., -1] = 0.0
    bulk, _, _ = solve_rows(LinearRows(tuple(mom), cont), grid, None, None, 'dirichlet', cache)
    return _symmetrize(*_fields_from(bulk, None, None, grid)[:2])


# energy structure and spectral checks

def linear_energy(u: Sequence[BulkField], eta: SurfaceField, c: SurfaceField,
                  params: LinearParameters) -> float:
    """int |u|^2/2 + int eta^2/2 + sigma0/2 int |grad eta|^2 + (-sigma0'/(2 c0)) int c^2"""
    kinetic = 0.5 * sum(inner_bulk(ui, ui) for ui in u)
    surface = 0.5 * inner_surface(eta, eta)
    slope = sum(inner_surface(g, g) for g in (deriv_horizontal(eta, 1), deriv_horizontal(eta, 2)))
    return (kinetic + surface + 0.5 * params.sigma0 * slope
            - 0.5 * params.sigma0_prime / params.c0 * inner_surface(c, c))


def linear_dissipation(u: Sequence[BulkField], c: SurfaceField, params: LinearParameters) -> float:
    """int |Du|^2/2 + (-gamma sigma0'/c0) int |grad c|^2"""
    grads = [(deriv_horizontal(ui, 1), deriv_horizontal(ui, 2), deriv_vertical(ui)) for ui in u]
    total = 0.0
    for i in range(3):
        for j in range(3):
            sym = grads[j][i] + grads[i][j]
            total += inner_bulk(sym, sym)
    gc = sum(inner_surface(g, g) for g in (deriv_horizontal(c, 1), deriv_horizontal(c, 2)))
    return 0.5 * total - params.gamma * params.sigma0_prime / params.c0 * gc


def propagator(n: Tuple[int, int], grid: GridSpec, dt: float, params: LinearParameters) -> np.ndarray:
    """Dense one-step matrix M^-1 R of the unforced implicit step of mode n"""
    system = assemble_mode(n, grid, dt, params)
    return system.solve(system.carry_matrix())


def spectral_radius(n: Tuple[int, int], grid: GridSpec, dt: float, params: LinearParameters) -> float:
    return float(np.max(np.abs(eigvals(propagator(n, grid, dt, params)))))


def modal_decay_rate(n: Tuple[int, int], grid: GridSpec, dt: float, params: LinearParameters,
                     seed: int = 0, max_steps: int = 50000) -> Dict[str, float]:
    """Decay rate of mode n measured by repeated solves, against the eigenvalue oracle

    The iterate is renormalized every step; the rate is the least-squares
    slope of the accumulated log-norm over the second half of the run.
    """
    system = assemble_mode(n, grid, dt, params)
    radius = float(np.max(np.abs(eigvals(system.solve(system.carry_matrix())))))
    if not 0.0 < radius < 1.0:
        raise ValueError(f"mode {n} does not decay (spectral radius {radius})")
    log_rho = np.log(radius)
    steps = int(min(max_steps, max(200, np.ceil(200.0 / abs(log_rho)))))
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(system.size) + 1j * rng.standard_normal(system.size)
    R = system.carry_matrix()
    x = system.solve(R @ x)
    x /= np.linalg.norm(x)
    log_norm = np.empty(steps)
    total = 0.0
    for step in range(steps):
        x = system.solve(R @ x)
        norm = np.linalg.norm(x)
        total += np.log(norm)
        x /= norm
        log_norm[step] = total
    half = steps // 2
    slope = np.polyfit(np.arange(half, steps) * dt, log_norm[half:], 1)[0]
    return {'measured': float(-slope), 'oracle': float(-log_rho / dt), 'steps': steps}
