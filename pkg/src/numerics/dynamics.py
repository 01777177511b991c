#!/usr/bin/env python3
"""
Nonlinear forcing G1..G5, the IMEX time step and initial data construction
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.state import FlowState, ForcingPack
from .errors import CompatibilityFailed, InvalidConcentration
from .geometry import (
    J_ABORT_LIMIT,
    J_WARN_LIMIT,
    GeometryPack,
    build_geometry_pack,
    calA_grad_values,
    calA_sym_grad_values,
    infinity_bound,
    laplacian_remainder,
    poisson_extend,
    sym_grad_values,
)
from .linear_core import (
    FactorizationCache,
    LinearParameters,
    drop_divergence_tail,
    solve_stokes_stress,
    step_linear,
)
from .spectral import (
    BulkField,
    GridSpec,
    SurfaceField,
    deriv_horizontal,
    deriv_vertical,
    inner_bulk,
    inner_surface,
    integrate_bulk_values,
    integrate_surface_values,
    laplacian_horizontal,
    pointwise,
    spectral_basis,
)
from .surface_ops import (
    SLOPE_HARD_LIMIT,
    SLOPE_WARN_LIMIT,
    SurfaceGeometry,
    build_geometry,
    div_gamma,
    laplace_gamma,
)
from .tension import TensionModel, equilibrium_concentration

logger = logging.getLogger(__name__)

SCHEMES = ('imex1', 'imex-bdf2')
U0_MODES = ('zero', 'stokes-compatible')
FIXED_POINT_MAX_ITER = 50
FIXED_POINT_TOL = 1e-10

BULK_BLOCKS = ('G11', 'G12', 'G13', 'G14', 'G15', 'G2')
SURFACE_BLOCKS = ('G31', 'G32', 'G33', 'G34', 'G4', 'G51', 'G52', 'G53', 'G54')


@dataclass(frozen=True)
class GuardLimits:
    """Validity guards on the surface slope and the flattening Jacobian"""
    slope_hard: float = SLOPE_HARD_LIMIT
    slope_warn: float = SLOPE_WARN_LIMIT
    j_abort: float = J_ABORT_LIMIT
    j_warn: float = J_WARN_LIMIT


PERMISSIVE_GUARDS = GuardLimits(slope_hard=np.inf, slope_warn=np.inf, j_abort=0.0, j_warn=0.0)


def prepare_geometry(eta: SurfaceField,
                     guards: Optional[GuardLimits] = None) -> Tuple[SurfaceGeometry, GeometryPack]:
    guards = guards or GuardLimits()
    geom = build_geometry(eta, guards.slope_hard, guards.slope_warn)
    pack = build_geometry_pack(eta, j_abort=guards.j_abort, j_warn=guards.j_warn)
    return geom, pack


def _depth_profile(pack: GeometryPack) -> np.ndarray:
    return pack.b_tilde.coeffs[0, 0, :].real


def divergence_remainder(u: Sequence[BulkField], pack: GeometryPack) -> BulkField:
    """G2 = AK d3u1 + BK d3u2 + (1 - K) d3u3, so that div u - G2 = div_calA u"""
    ak, bk, k = pack.AK_phys, pack.BK_phys, pack.K_phys
    return pointwise(lambda a, b, c: ak * a + bk * b + (1.0 - k) * c,
                     *(deriv_vertical(ui) for ui in u))


def kinematic_rate(state: FlowState, geom: SurfaceGeometry) -> SurfaceField:
    """d_t eta = u . N at the surface"""
    e1, e2 = geom.grad_eta
    tops = [ui.trace_top() for ui in state.u]
    return pointwise(lambda a, b, v1, v2, v3: v3 - a * v1 - b * v2, e1, e2, *tops)


def eval_G(state: FlowState, pack: GeometryPack, geom: SurfaceGeometry,
           model: TensionModel, gamma: float) -> ForcingPack:
    """Explicit right-hand sides of the perturbed system, with every sub-term kept in `blocks`"""
    c0 = float(model.c0)
    sigma0, sigma0_prime = model.sigma0, model.sigma0_prime
    u = state.u
    grads = [(deriv_horizontal(ui, 1), deriv_horizontal(ui, 2), deriv_vertical(ui)) for ui in u]
    dp3 = deriv_vertical(state.p)
    eta_t_bar = poisson_extend(kinematic_rate(state, geom))
    ak, bk, k = pack.AK_phys, pack.BK_phys, pack.K_phys
    bt = _depth_profile(pack)

    def bulk_kernel(v1, v2, v3, a1, a2, a3, b1, b2, b3, c1, c2, c3, p3, et):
        v = (v1, v2, v3)
        g = ((a1, a2, a3), (b1, b2, b3), (c1, c2, c3))
        g11 = (ak * p3, bk * p3, (1.0 - k) * p3)
        g12 = []
        g15 = []
        for gi in g:
            calA_g = (gi[0] - ak * gi[2], gi[1] - bk * gi[2], k * gi[2])
            g12.append(-(v[0] * calA_g[0] + v[1] * calA_g[1] + v[2] * calA_g[2]))
            g15.append(et * bt * k * gi[2])
        return g11 + tuple(g12) + tuple(g15)

    flat = [d for g in grads for d in g]
    lifted = pointwise(bulk_kernel, *u, *flat, dp3, eta_t_bar)
    G11, G12, G15 = lifted[0:3], lifted[3:6], lifted[6:9]
    remainders = [laplacian_remainder(pack, ui) for ui in u]
    G13 = tuple(r[0] for r in remainders)
    G14 = tuple(r[1] for r in remainders)
    G1 = tuple(G11[i] + G12[i] + G13[i] + G14[i] + G15[i] for i in range(3))
    G2 = divergence_remainder(u, pack)

    # surface terms
    e1, e2 = geom.grad_eta
    c = state.ctilde - c0
    dc1, dc2 = deriv_horizontal(c, 1), deriv_horizontal(c, 2)
    n1, n2, n3 = geom.nu_phys
    area = geom.area_phys
    akt, bkt, kt = ak[..., 0], bk[..., 0], k[..., 0]
    tops = [ui.trace_top() for ui in u]
    top_grads = [g.trace_top() for g in flat]

    def surface_kernel(p, eta, a, b, lap_eta, H, ct, c1, c2, *d):
        (u11, u12, u13, u21, u22, u23, u31, u32, u33) = d
        sig = model.sigma(ct)
        sig_p = model.sigma_prime(ct)
        DA11 = 2.0 * (u11 - akt * u13)
        DA22 = 2.0 * (u22 - bkt * u23)
        DA12 = u12 - akt * u23 + u21 - bkt * u13
        DA13 = u31 - akt * u33 + kt * u13
        DA23 = u32 - bkt * u33 + kt * u23
        DA33 = 2.0 * kt * u33
        D13, D23, D33 = u31 + u13, u32 + u23, 2.0 * u33
        g31 = (a * (p - eta - DA11) - b * DA12 + (DA13 - D13),
               -a * DA12 + b * (p - eta - DA22) + (DA23 - D23),
               -a * DA13 - b * DA23 + (DA33 - D33))
        g32 = (sig * H * a, sig * H * b, sigma0 * lap_eta - sig * H)
        s = n1 * c1 + n2 * c2
        g33 = (sigma0_prime * c1 - area * sig_p * (c1 - n1 * s),
               sigma0_prime * c2 - area * sig_p * (c2 - n2 * s),
               np.zeros_like(s))
        g34 = (np.zeros_like(s), np.zeros_like(s), sig_p * s)
        return g31 + g32 + g33 + g34

    surf = pointwise(surface_kernel, state.p.trace_top(), state.eta, e1, e2,
                     laplacian_horizontal(state.eta), geom.H, state.ctilde, dc1, dc2, *top_grads)
    G31, G32, G33, G34 = surf[0:3], surf[3:6], surf[6:9], surf[9:12]
    G3 = tuple(G31[i] + G32[i] + G33[i] + G34[i] for i in range(3))

    G4 = pointwise(lambda a, b, v1, v2: -(a * v1 + b * v2), e1, e2, tops[0], tops[1])

    div_G = div_gamma(tops, geom)
    div_star = deriv_horizontal(tops[0], 1) + deriv_horizontal(tops[1], 2)
    G51 = pointwise(lambda v1, v2, a, b: -(v1 * a + v2 * b), tops[0], tops[1], dc1, dc2)
    G52 = -(c * div_G)
    G53 = (laplace_gamma(c, geom) - laplacian_horizontal(c)) * float(gamma)
    G54 = (div_G - div_star) * (-c0)
    G5 = G51 + G52 + G53 + G54

    blocks = {
        'G11': G11, 'G12': G12, 'G13': G13, 'G14': G14, 'G15': G15, 'G2': (G2,),
        'G31': G31, 'G32': G32, 'G33': G33, 'G34': G34, 'G4': (G4,),
        'G51': (G51,), 'G52': (G52,), 'G53': (G53,), 'G54': (G54,),
    }
    return ForcingPack(G1=G1, G2=G2, G3=G3, G4=G4, G5=G5, blocks=blocks)


def _top(values: np.ndarray) -> np.ndarray:
    return values[..., 0]


def marangoni_traction_values(ctilde: SurfaceField, geom: SurfaceGeometry,
                              model: TensionModel) -> np.ndarray:
    """sqrt(1+|grad eta|^2) sigma'(ctilde) grad_Gamma ctilde on the dealiasing grid, shape (3, ...)"""
    c1 = deriv_horizontal(ctilde, 1).padded_values()
    c2 = deriv_horizontal(ctilde, 2).padded_values()
    n1, n2, n3 = geom.nu_phys
    s = n1 * c1 + n2 * c2
    weight = geom.area_phys * model.sigma_prime(ctilde.padded_values())
    return np.stack((weight * (c1 - n1 * s), weight * (c2 - n2 * s), -weight * n3 * s))


def full_stress_residual(state: FlowState, pack: GeometryPack, geom: SurfaceGeometry,
                         model: TensionModel) -> np.ndarray:
    """S_calA N - eta N + sigma(ctilde) H N + sqrt sigma' grad_Gamma ctilde at the surface, shape (3, ...)"""
    N = geom.cal_N_values()
    DA = _top(calA_sym_grad_values(pack, state.u))
    p = state.p.trace_top().padded_values()
    eta = state.eta.padded_values()
    H = geom.H.padded_values()
    sigma = model.sigma(state.ctilde.padded_values())
    stress_N = p * N - np.einsum('ij...,j...->i...', DA, N)
    return (stress_N - eta * N + sigma * H * N
            + marangoni_traction_values(state.ctilde, geom, model))


def linear_stress_values(state: FlowState, model: TensionModel) -> np.ndarray:
    """(pI - Du - eta I + sigma0 Lap eta) e3 + sigma0' grad_* c, shape (3, ...)"""
    D = _top(sym_grad_values(state.u))
    p = state.p.trace_top().padded_values()
    eta = state.eta.padded_values()
    lap_eta = laplacian_horizontal(state.eta).padded_values()
    c = state.ctilde - float(model.c0)
    c1 = deriv_horizontal(c, 1).padded_values()
    c2 = deriv_horizontal(c, 2).padded_values()
    return np.stack((-D[0, 2] + model.sigma0_prime * c1,
                     -D[1, 2] + model.sigma0_prime * c2,
                     p - D[2, 2] - eta + model.sigma0 * lap_eta))


def regime_report(state: FlowState, pack: GeometryPack, geom: SurfaceGeometry,
                  model: TensionModel, guards: Optional[GuardLimits] = None) -> Dict[str, object]:
    """Where the state sits relative to the small-data regime"""
    guards = guards or GuardLimits()
    lo, hi = model.regime_window
    values = state.ctilde.padded_values()
    c_min, c_max = float(np.min(values)), float(np.max(values))
    report = {
        'max_slope': geom.max_slope,
        'min_J': pack.min_J,
        'infinity_bound': infinity_bound(pack),
        'c_min': c_min,
        'c_max': c_max,
        'c_window': [lo, hi],
        'slope_ok': geom.max_slope < guards.slope_warn,
        'jacobian_ok': pack.min_J >= guards.j_warn,
        'concentration_ok': lo <= c_min and c_max <= hi,
    }
    report['in_regime'] = bool(report['slope_ok'] and report['jacobian_ok'] and report['concentration_ok'])
    if not report['concentration_ok']:
        logger.warning("Concentration range [%.4g, %.4g] leaves [%.4g, %.4g]", c_min, c_max, lo, hi)
    return report


# compatibility of the initial data

def compatibility_terms(state: FlowState, model: TensionModel,
                        pack: Optional[GeometryPack] = None,
                        geom: Optional[SurfaceGeometry] = None) -> Dict[str, float]:
    """The three parts of the compatibility residual and their sum"""
    if pack is None or geom is None:
        geom, pack = prepare_geometry(state.eta, PERMISSIVE_GUARDS)
    grid = state.grid
    N = geom.cal_N_values()
    DA = _top(calA_sym_grad_values(pack, state.u))
    v = np.einsum('ij...,j...->i...', DA, N)
    projected = v - np.sum(v * N, axis=0) * N / np.sum(N * N, axis=0)
    line = projected - marangoni_traction_values(state.ctilde, geom, model)
    stress = np.sqrt(max(integrate_surface_values(np.sum(line ** 2, axis=0), grid), 0.0))

    div = sum(calA_grad_values(pack, ui)[i] for i, ui in enumerate(state.u))
    divergence = np.sqrt(max(integrate_bulk_values(div ** 2, grid), 0.0))

    bottom = np.sqrt(sum(inner_surface(b, b) for b in (ui.trace_bottom() for ui in state.u)))
    return {'stress': float(stress), 'divergence': float(divergence), 'bottom': float(bottom),
            'total': float(stress + divergence + bottom)}


def compatibility_residual(state: FlowState, model: TensionModel,
                           pack: Optional[GeometryPack] = None,
                           geom: Optional[SurfaceGeometry] = None) -> float:
    return compatibility_terms(state, model, pack, geom)['total']


def compatible_velocity(pack: GeometryPack, geom: SurfaceGeometry, ctilde0: SurfaceField,
                        model: TensionModel, tol: float = FIXED_POINT_TOL,
                        max_iter: int = FIXED_POINT_MAX_ITER,
                        cache: Optional[FactorizationCache] = None) -> Tuple[Tuple[BulkField, ...], int]:
    """Velocity whose surface stress balances the Marangoni traction tangentially

    Fixed point: with the lagged remainder R = D_calA u N - Du e3 and the
    normal multiplier lam, solve the flat stress problem with tangential data
    -(T - lam grad eta - R) and divergence G2(u).
    """
    grid = pack.grid
    T = marangoni_traction_values(ctilde0, geom, model)
    N = geom.cal_N_values()
    e1, e2 = -N[0], -N[1]
    u = tuple(BulkField.zeros(grid) for _ in range(3))
    for iteration in range(1, max_iter + 1):
        D = _top(sym_grad_values(u))
        R = np.einsum('ij...,j...->i...', _top(calA_sym_grad_values(pack, u)), N) - D[:, 2]
        lam = D[2, 2] - T[2] + R[2]
        alpha = (SurfaceField.from_padded_values(grid, -(T[0] - lam * e1 - R[0])),
                 SurfaceField.from_padded_values(grid, -(T[1] - lam * e2 - R[1])),
                 SurfaceField.zeros(grid))
        h = drop_divergence_tail(divergence_remainder(u, pack))
        u_new, _ = solve_stokes_stress(None, h, alpha, grid, cache)
        change = max((a - b).max_abs() for a, b in zip(u_new, u))
        scale = max(1.0, max(a.max_abs() for a in u_new))
        u = u_new
        logger.debug("compatible velocity iteration %d: change %.3e", iteration, change)
        if change <= tol * scale:
            return u, iteration
    raise CompatibilityFailed(
        f"compatible velocity did not converge in {max_iter} iterations",
        context={'last_change': float(change)}
    )


def initial_pressure(state: FlowState, pack: GeometryPack, geom: SurfaceGeometry,
                     model: TensionModel, gamma: float,
                     cache: Optional[FactorizationCache] = None) -> BulkField:
    """Pressure from one stationary stress-Stokes solve with the linear boundary data"""
    grid = state.grid
    probe = replace(state, p=BulkField.zeros(grid))
    forcing = eval_G(probe, pack, geom, model, gamma)
    c = state.ctilde - float(model.c0)
    alpha = (forcing.G3[0] - deriv_horizontal(c, 1) * model.sigma0_prime,
             forcing.G3[1] - deriv_horizontal(c, 2) * model.sigma0_prime,
             forcing.G3[2] + state.eta - laplacian_horizontal(state.eta) * model.sigma0)
    _, p = solve_stokes_stress(None, drop_divergence_tail(forcing.G2), alpha, grid, cache)
    return p


@dataclass(frozen=True)
class InitialDataSpec:
    """Description of eta0, ctilde0 and u0

    Mode tuples are (amplitude, phase, n1, n2) and describe
    amplitude * cos(2 pi (n1 x1 / L1 + n2 x2 / L2) + phase).
    """
    eta_modes: Tuple[Tuple[float, float, int, int], ...] = ()
    eta_random: Optional[Tuple[int, float, int]] = None  # (seed, target slope, max mode)
    ctilde_kind: str = 'uniform'
    ctilde_value: float = 1.0
    ctilde_modes: Tuple[Tuple[float, float, int, int], ...] = ()
    u0: str = 'zero'
    u0_fallback: bool = True


def surface_from_modes(grid: GridSpec, modes: Sequence[Tuple[float, float, int, int]]) -> SurfaceField:
    basis = spectral_basis(grid)
    x1, x2 = basis.physical_coordinates()
    values = np.zeros(grid.shape)
    for amplitude, phase, n1, n2 in modes:
        values += amplitude * np.cos(2.0 * np.pi * (n1 * x1 / grid.L1 + n2 * x2 / grid.L2) + phase)
    return SurfaceField.from_values(grid, values).masked()


def random_surface(grid: GridSpec, seed: int, slope: float, max_mode: int) -> SurfaceField:
    """Band-limited random surface rescaled to the requested maximum slope"""
    rng = np.random.default_rng(seed)
    modes = []
    for n1 in range(0, max_mode + 1):
        for n2 in range(-max_mode, max_mode + 1):
            if n1 == 0 and n2 <= 0:
                continue
            weight = 1.0 / (1.0 + n1 * n1 + n2 * n2)
            modes.append((weight * rng.standard_normal(), rng.uniform(0.0, 2.0 * np.pi), n1, n2))
    eta = surface_from_modes(grid, modes)
    g1, g2 = (deriv_horizontal(eta, i).padded_values() for i in (1, 2))
    current = float(np.max(np.hypot(g1, g2)))
    if current == 0.0:
        return eta
    return eta * (slope / current)


def make_initial_data(spec: InitialDataSpec, grid: GridSpec, model: TensionModel, gamma: float,
                      guards: Optional[GuardLimits] = None,
                      cache: Optional[FactorizationCache] = None) -> Tuple[FlowState, TensionModel, Dict]:
    """Initial state, the model with its equilibrium concentration, and a construction report"""
    if spec.u0 not in U0_MODES:
        raise ValueError(f"u0 must be one of {U0_MODES}")
    eta0 = surface_from_modes(grid, spec.eta_modes)
    if spec.eta_random is not None:
        seed, slope, max_mode = spec.eta_random
        eta0 = eta0 + random_surface(grid, int(seed), float(slope), int(max_mode))
    shift = eta0.mean
    if shift != 0.0:
        logger.info("Shifting eta0 by %.6e to enforce zero average", shift)
        eta0 = eta0 - shift

    if spec.ctilde_kind == 'uniform':
        ctilde0 = SurfaceField.constant(grid, spec.ctilde_value)
    elif spec.ctilde_kind == 'modes':
        relative = surface_from_modes(grid, spec.ctilde_modes)
        ctilde0 = relative * spec.ctilde_value + spec.ctilde_value
    else:
        raise ValueError(f"unknown ctilde kind '{spec.ctilde_kind}'")
    if np.any(ctilde0.padded_values() <= 0.0):
        raise InvalidConcentration("initial concentration must be positive",
                                   context={'min': float(np.min(ctilde0.padded_values()))})

    c0 = equilibrium_concentration(eta0, ctilde0)
    model = model.with_c0(c0)
    model.check_window(ctilde0.padded_values())
    geom, pack = prepare_geometry(eta0, guards)

    info: Dict[str, object] = {'c0': c0, 'eta_shift': shift, 'u0': spec.u0, 'fixed_point_iterations': 0}
    u0 = tuple(BulkField.zeros(grid) for _ in range(3))
    if spec.u0 == 'stokes-compatible':
        try:
            u0, iterations = compatible_velocity(pack, geom, ctilde0, model, cache=cache)
            info['fixed_point_iterations'] = iterations
        except CompatibilityFailed:
            if not spec.u0_fallback:
                raise
            logger.warning("Compatible velocity failed to converge; falling back to u0 = 0")
            info['u0'] = 'zero (fallback)'

    state = FlowState(u=u0, p=BulkField.zeros(grid), eta=eta0, ctilde=ctilde0)
    state.p = initial_pressure(state, pack, geom, model, gamma, cache)
    info['compat'] = compatibility_residual(state, model, pack, geom)
    return state, model, info


# time stepping

class IMEXIntegrator:
    """Explicit forcing, implicit linear operator

    imex1 is implicit Euler on the linear part; imex-bdf2 reuses the same
    per-mode systems at effective step 2 dt / 3 with extrapolated forcing and
    starts with one implicit Euler step. The optional corrector re-solves
    with the forcing averaged between the current state and the predictor.
    """

    def __init__(self, grid: GridSpec, model: TensionModel, gamma: float, dt: float,
                 scheme: str = 'imex1', corrector: bool = False,
                 guards: Optional[GuardLimits] = None,
                 cache: Optional[FactorizationCache] = None):
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if not dt > 0:
            raise ValueError("dt must be positive")
        if model.c0 is None:
            raise ValueError("model needs its equilibrium concentration")
        self.grid = grid
        self.model = model
        self.gamma = float(gamma)
        self.dt = float(dt)
        self.scheme = scheme
        self.corrector = corrector
        self.guards = guards or GuardLimits()
        self.cache = cache
        self.params = LinearParameters.from_model(model, gamma)
        self.guard_events = 0
        self.last_report: Optional[Dict[str, object]] = None
        self._previous: Optional[Tuple[FlowState, ForcingPack]] = None
        self.logger = logging.getLogger(__name__)

    @property
    def previous_state(self) -> Optional[FlowState]:
        return None if self._previous is None else self._previous[0]

    def restore_history(self, previous: Optional[FlowState]) -> None:
        """Reinstate the multistep history after a restart"""
        self._previous = None if previous is None else (previous, self.forcing(previous))

    def geometry(self, state: FlowState) -> Tuple[SurfaceGeometry, GeometryPack]:
        geom, pack = prepare_geometry(state.eta, self.guards)
        self.last_report = regime_report(state, pack, geom, self.model, self.guards)
        if not self.last_report['in_regime']:
            self.guard_events += 1
        return geom, pack

    def forcing(self, state: FlowState) -> ForcingPack:
        geom, pack = self.geometry(state)
        return eval_G(state, pack, geom, self.model, self.gamma)

    def _solve(self, state: FlowState, u_old, eta_old, c_old, forcing: ForcingPack, tau: float) -> FlowState:
        u, p, eta, c = step_linear(u_old, eta_old, c_old, forcing, tau, self.params, self.cache)
        ctilde = c + float(self.model.c0)
        minimum = float(np.min(ctilde.padded_values()))
        if minimum <= 0.0:
            raise InvalidConcentration(
                f"concentration reached {minimum:.4e} at t = {state.t + self.dt:.6g}",
                context={'min': minimum, 't': state.t + self.dt}
            )
        return FlowState(u=u, p=p, eta=eta, ctilde=ctilde, t=state.t + self.dt, step=state.step + 1)

    def step(self, state: FlowState) -> FlowState:
        c0 = float(self.model.c0)
        forcing = self.forcing(state)
        c = state.perturbation(c0)
        if self.scheme == 'imex-bdf2' and self._previous is not None:
            prev, prev_forcing = self._previous
            tau = 2.0 * self.dt / 3.0
            u_old = tuple((a * 4.0 - b) / 3.0 for a, b in zip(state.u, prev.u))
            eta_old = (state.eta * 4.0 - prev.eta) / 3.0
            c_old = (c * 4.0 - prev.perturbation(c0)) / 3.0
            effective = forcing.combine(prev_forcing, 2.0, -1.0)
        else:
            tau = self.dt
            u_old, eta_old, c_old = state.u, state.eta, c
            effective = forcing

        new = self._solve(state, u_old, eta_old, c_old, effective, tau)
        if self.corrector:
            predicted = self.forcing(new)
            new = self._solve(state, u_old, eta_old, c_old, effective.combine(predicted, 0.5, 0.5), tau)
        self._previous = (state, forcing)
        return new


def step(state: FlowState, dt: float, model: TensionModel, grid: Optional[GridSpec] = None,
         gamma: float = 1.0, scheme: str = 'imex1',
         cache: Optional[FactorizationCache] = None) -> FlowState:
    """Single implicit Euler step (no multistep history)"""
    grid = grid or state.grid
    if grid != state.grid:
        raise ValueError("state lives on a different grid")
    return IMEXIntegrator(grid, model, gamma, dt, scheme='imex1', cache=cache).step(state)


# nonlinearity scaling probe

def _norm(fields) -> float:
    total = 0.0
    for f in fields:
        total += inner_bulk(f, f) if isinstance(f, BulkField) else inner_surface(f, f)
    return float(np.sqrt(total))


def forcing_norms(state: FlowState, model: TensionModel, gamma: float) -> Dict[str, float]:
    geom, pack = prepare_geometry(state.eta, PERMISSIVE_GUARDS)
    forcing = eval_G(state, pack, geom, model, gamma)
    norms = {name: _norm(parts) for name, parts in forcing.blocks.items()}
    norms.update(G1=_norm(forcing.G1), G3=_norm(forcing.G3), G5=_norm((forcing.G5,)))
    return norms


def scaling_ratios(reference: FlowState, model: TensionModel, gamma: float,
                   epsilon: float = 1e-2) -> Dict[str, float]:
    """||G(eps S)|| / ||G(eps/2 S)|| per sub-term; quadratic terms give ratios near 4"""
    c0 = float(model.c0)
    coarse = forcing_norms(reference.scaled(epsilon, c0), model, gamma)
    fine = forcing_norms(reference.scaled(0.5 * epsilon, c0), model, gamma)
    ratios = {}
    for name in coarse:
        ratios[name] = coarse[name] / fine[name] if fine[name] > 0.0 else float('nan')
    return ratios


def scaling_reference(grid: GridSpec, c0: float) -> FlowState:
    """Smooth state with every field active, used by the scaling probe"""
    basis = spectral_basis(grid)
    x1, x2, z = basis.bulk_coordinates()
    s1 = 2.0 * np.pi / grid.L1
    s2 = 2.0 * np.pi / grid.L2
    depth = (z + grid.b) / grid.b
    u = (BulkField.from_values(grid, depth * np.sin(s1 * x1) * np.cos(s2 * x2)),
         BulkField.from_values(grid, depth * np.cos(s1 * x1 + s2 * x2)),
         BulkField.from_values(grid, depth ** 2 * np.cos(s1 * x1) * np.sin(s2 * x2)))
    p = BulkField.from_values(grid, np.cos(s1 * x1) * np.exp(z))
    y1, y2 = basis.physical_coordinates()
    eta = SurfaceField.from_values(grid, np.cos(s1 * y1) + 0.5 * np.sin(s2 * y2))
    ctilde = SurfaceField.from_values(grid, c0 * (1.0 + np.sin(s1 * y1 + s2 * y2)))
    return FlowState(u=tuple(ui.masked() for ui in u), p=p.masked(), eta=eta.masked(), ctilde=ctilde.masked())
