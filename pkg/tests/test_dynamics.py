# Surfactant simulator - Forcing, time stepping and initial data tests

import numpy as np
import pytest

from src.models.state import FlowState
from src.numerics.dynamics import (
    PERMISSIVE_GUARDS,
    GuardLimits,
    IMEXIntegrator,
    InitialDataSpec,
    forcing_norms,
    full_stress_residual,
    linear_stress_values,
    make_initial_data,
    prepare_geometry,
    random_surface,
    regime_report,
    scaling_ratios,
    scaling_reference,
    step,
    surface_from_modes,
)
from src.numerics.errors import InvalidConcentration, SlopeTooLarge
from src.numerics.linear_core import FactorizationCache
from src.numerics.spectral import BulkField, SurfaceField, deriv_horizontal
from src.numerics.tension import TensionModel

WAVE = ((0.01, 0.0, 1, 0),)


def _linear():
    return TensionModel(kind='linear', sigma_s=1.0, beta=0.25)


class TestInitialData:
    """Construction of eta0, ctilde0, u0 and p0."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_surface_from_modes_is_band_limited(self, small_grid):
        eta = surface_from_modes(small_grid, ((0.1, 0.0, 1, 0), (0.1, 0.0, 3, 0)))
        assert eta.max_abs() == pytest.approx(0.1)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_random_surface_hits_target_slope(self, grid16):
        eta = random_surface(grid16, seed=7, slope=0.1, max_mode=3)
        slope = np.hypot(*(deriv_horizontal(eta, i).padded_values() for i in (1, 2)))
        assert np.max(slope) == pytest.approx(0.1, rel=1e-12)
        again = random_surface(grid16, seed=7, slope=0.1, max_mode=3)
        assert np.array_equal(eta.coeffs, again.coeffs)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_small_wave_from_rest(self, small_grid):
        spec = InitialDataSpec(eta_modes=WAVE)
        state, model, info = make_initial_data(spec, small_grid, _linear(), 1.0, cache=FactorizationCache())
        assert abs(state.eta.mean) < 1e-16
        assert model.c0 == pytest.approx(info['c0'])
        assert model.c0 > 1.0
        assert info['u0'] == 'zero'
        assert info['compat'] < 1e-12
        assert state.t == 0.0 and state.step == 0

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_mean_of_eta_is_removed(self, small_grid):
        spec = InitialDataSpec(eta_modes=WAVE + ((0.02, 0.0, 0, 0),))
        state, _, info = make_initial_data(spec, small_grid, _linear(), 1.0, cache=FactorizationCache())
        assert info['eta_shift'] == pytest.approx(0.02)
        assert abs(state.eta.mean) < 1e-15

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_nonpositive_concentration_is_rejected(self, small_grid):
        spec = InitialDataSpec(ctilde_kind='modes', ctilde_modes=((1.5, 0.0, 1, 0),))
        with pytest.raises(InvalidConcentration):
            make_initial_data(spec, small_grid, _linear(), 1.0)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_unknown_options(self, small_grid):
        with pytest.raises(ValueError):
            make_initial_data(InitialDataSpec(u0='moving'), small_grid, _linear(), 1.0)
        with pytest.raises(ValueError):
            make_initial_data(InitialDataSpec(ctilde_kind='gaussian'), small_grid, _linear(), 1.0)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_steep_surface_trips_the_guard(self, grid16):
        spec = InitialDataSpec(eta_modes=((2.0, 0.0, 1, 0),))
        with pytest.raises(SlopeTooLarge):
            make_initial_data(spec, grid16, _linear(), 1.0)

    @pytest.mark.integration
    @pytest.mark.numerics
    def test_compatible_velocity_reduces_residual(self, grid16):
        model = TensionModel(kind='exponential', sigma_s=1.0, beta=0.5)
        base = dict(eta_modes=WAVE, ctilde_kind='modes', ctilde_modes=((0.05, 0.0, 1, 0),))
        cache = FactorizationCache()
        at_rest, _, rest_info = make_initial_data(InitialDataSpec(**base), grid16, model, 0.5, cache=cache)
        moving, _, info = make_initial_data(InitialDataSpec(u0='stokes-compatible', **base),
                                            grid16, model, 0.5, cache=cache)
        assert info['u0'] == 'stokes-compatible'
        assert info['fixed_point_iterations'] >= 1
        assert rest_info['compat'] > 0.0
        assert info['compat'] < 0.1 * rest_info['compat']
        assert moving.u[0].max_abs() > 0.0


class TestIntegrator:
    """IMEX steps, history and guards."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_invalid_configuration(self, small_grid, linear_model):
        with pytest.raises(ValueError):
            IMEXIntegrator(small_grid, linear_model, 1.0, 0.01, scheme='rk4')
        with pytest.raises(ValueError):
            IMEXIntegrator(small_grid, linear_model, 1.0, 0.0)
        with pytest.raises(ValueError):
            IMEXIntegrator(small_grid, _linear(), 1.0, 0.01)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_equilibrium_is_a_fixed_point(self, small_grid, linear_model):
        state = FlowState.equilibrium(small_grid, 1.0)
        integrator = IMEXIntegrator(small_grid, linear_model, 1.0, 0.01, cache=FactorizationCache())
        for _ in range(5):
            state = integrator.step(state)
        assert state.step == 5
        assert state.t == pytest.approx(0.05)
        assert state.eta.max_abs() < 1e-14
        assert (state.ctilde - 1.0).max_abs() < 1e-14
        assert max(ui.max_abs() for ui in state.u) < 1e-14
        assert integrator.guard_events == 0

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_forcing_vanishes_at_equilibrium(self, small_grid, linear_model):
        norms = forcing_norms(FlowState.equilibrium(small_grid, 1.0), linear_model, 1.0)
        assert all(value < 1e-14 for value in norms.values())

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_bdf2_keeps_one_previous_state(self, small_grid):
        spec = InitialDataSpec(eta_modes=WAVE)
        cache = FactorizationCache()
        state, model, _ = make_initial_data(spec, small_grid, _linear(), 1.0, cache=cache)
        integrator = IMEXIntegrator(small_grid, model, 1.0, 0.01, scheme='imex-bdf2', cache=cache)
        assert integrator.previous_state is None
        first = integrator.step(state)
        assert integrator.previous_state is state
        second = integrator.step(first)
        assert integrator.previous_state is first
        assert second.step == 2
        integrator.restore_history(None)
        assert integrator.previous_state is None

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_schemes_agree_to_first_order(self, small_grid):
        spec = InitialDataSpec(eta_modes=WAVE)
        cache = FactorizationCache()
        state, model, _ = make_initial_data(spec, small_grid, _linear(), 1.0, cache=cache)
        results = {}
        for scheme in ('imex1', 'imex-bdf2'):
            integrator = IMEXIntegrator(small_grid, model, 1.0, 0.01, scheme=scheme, cache=cache)
            current = state
            for _ in range(10):
                current = integrator.step(current)
            results[scheme] = current
        gap = (results['imex1'].eta - results['imex-bdf2'].eta).max_abs()
        assert 0.0 < gap < 0.05 * state.eta.max_abs()

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_module_step_checks_grid(self, small_grid, grid16, linear_model):
        state = FlowState.equilibrium(small_grid, 1.0)
        with pytest.raises(ValueError):
            step(state, 0.01, linear_model, grid=grid16)
        assert step(state, 0.01, linear_model).step == 1

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_guards(self, grid16):
        steep = surface_from_modes(grid16, ((2.0, 0.0, 1, 0),))
        with pytest.raises(SlopeTooLarge):
            prepare_geometry(steep, GuardLimits())
        geom, pack = prepare_geometry(steep, PERMISSIVE_GUARDS)
        assert geom.max_slope > 1.0

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_regime_report_flags_concentration(self, grid16, linear_model):
        state = FlowState.equilibrium(grid16, 1.0)
        state.ctilde = SurfaceField.constant(grid16, 1.8)
        geom, pack = prepare_geometry(state.eta)
        report = regime_report(state, pack, geom, linear_model)
        assert report['slope_ok'] and report['jacobian_ok']
        assert not report['concentration_ok']
        assert not report['in_regime']


class TestNonlinearScaling:
    """The forcing is at least quadratic in the perturbation."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_aggregate_blocks_scale_quadratically(self, grid16, linear_model):
        ratios = scaling_ratios(scaling_reference(grid16, 1.0), linear_model, 1.0)
        for name in ('G1', 'G2', 'G3', 'G4', 'G5'):
            assert 3.6 <= ratios[name] <= 4.4, name


class TestStressResidual:
    """Full and linearized surface traction."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_flat_hydrostatic_state(self, grid16, linear_model):
        state = FlowState.equilibrium(grid16, 1.0)
        state.p = BulkField.from_function_of_depth(grid16, lambda z: 1.0 + z)
        geom, pack = prepare_geometry(state.eta)
        full = full_stress_residual(state, pack, geom, linear_model)
        linear = linear_stress_values(state, linear_model)
        assert np.max(np.abs(full - linear)) < 1e-13
        assert np.allclose(full[2], 1.0)
        assert np.max(np.abs(full[:2])) < 1e-13
