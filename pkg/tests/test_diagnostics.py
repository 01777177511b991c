# Surfactant simulator - Energy, mass and decay diagnostics tests

import numpy as np
import pytest

from src.models.state import BudgetSample, FlowState
from src.numerics.diagnostics import (
    BudgetHistory,
    budget_residual,
    decay_fit,
    exchange_budgets,
    mean_c_check,
    partial_residuals,
    physical_budget,
    sobolev_functionals,
)
from src.numerics.dynamics import IMEXIntegrator, InitialDataSpec, make_initial_data, prepare_geometry
from src.numerics.errors import FitDomainError, InsufficientHistory
from src.numerics.linear_core import FactorizationCache
from src.numerics.spectral import SurfaceField, spectral_basis
from src.numerics.tension import TensionModel


def _samples(times, energies, dissipations):
    return [BudgetSample(t=t, E_phys=e, D_phys=d, mass=1.0) for t, e, d in zip(times, energies, dissipations)]


@pytest.fixture
def wave_run(small_grid):
    """A small wave and its first few implicit Euler steps."""
    spec = InitialDataSpec(eta_modes=((0.01, 0.0, 1, 0),))
    cache = FactorizationCache()
    model = TensionModel(kind='linear', sigma_s=1.0, beta=0.25)
    state, model, _ = make_initial_data(spec, small_grid, model, 1.0, cache=cache)
    integrator = IMEXIntegrator(small_grid, model, 1.0, 0.01, cache=cache)
    states = [state]
    for _ in range(20):
        states.append(integrator.step(states[-1]))
    return states, model


class TestPhysicalBudget:
    """Energy, dissipation and surfactant mass of single states."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_equilibrium_has_zero_energy(self, grid16, linear_model):
        state = FlowState.equilibrium(grid16, 1.0)
        geom, pack = prepare_geometry(state.eta)
        sample = physical_budget(state, pack, geom, linear_model, 1.0)
        assert sample.E_phys == pytest.approx(0.0, abs=1e-14)
        assert sample.D_phys == pytest.approx(0.0, abs=1e-14)
        assert sample.mass == pytest.approx(grid16.area)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_wave_at_rest(self, wave_run):
        state, model = wave_run[0][0], wave_run[1]
        geom, pack = prepare_geometry(state.eta)
        sample = physical_budget(state, pack, geom, model, 1.0)
        grid = state.grid
        c0 = model.c0
        eta = state.eta.padded_values()
        # uniform ctilde: the entropy term is xi_c0(1) times the surface area
        xi_one = float(model.sigma(1.0)) + 0.25 * np.log(1.0 / c0)
        expected = (0.5 * grid.area * np.mean(eta ** 2)
                    + grid.area * xi_one * np.mean(geom.area_phys)
                    - float(model.sigma(c0)) * grid.area)
        assert sample.E_phys == pytest.approx(expected, rel=1e-10)
        assert sample.D_phys == pytest.approx(0.0, abs=1e-14)
        assert sample.E_phys > 0.0

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_energy_decays_along_a_run(self, wave_run):
        states, model = wave_run
        energies = []
        for state in states:
            geom, pack = prepare_geometry(state.eta)
            energies.append(physical_budget(state, pack, geom, model, 1.0).E_phys)
        assert energies[-1] < energies[0]
        assert states[-1].t == pytest.approx(0.2)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_exchange_terms_at_equilibrium(self, grid16, linear_model):
        state = FlowState.equilibrium(grid16, 1.0)
        geom, pack = prepare_geometry(state.eta)
        terms = exchange_budgets(state, pack, geom, linear_model, 1.0)
        assert terms['E_surf'] == pytest.approx(0.5 * grid16.area)
        assert terms['X_fluid'] == 0.0
        assert terms['D_fluid'] == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_mean_c_identity(self, wave_run):
        state, model = wave_run[0][0], wave_run[1]
        geom, _ = prepare_geometry(state.eta)
        check = mean_c_check(state, geom, model.c0)
        assert check['gap'] < 1e-12


class TestBudgetSeries:
    """Finite-difference balances over sample series."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_residual_is_exact_for_quadratic_energy(self):
        t = np.array([0.0, 0.5, 1.0, 1.5])
        samples = _samples(t, t ** 2, -2.0 * t)
        residual = budget_residual(samples)
        assert [r[0] for r in residual] == [0.5, 1.0]
        assert all(abs(r[1]) < 1e-14 for r in residual)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_residual_needs_three_samples(self):
        with pytest.raises(InsufficientHistory):
            budget_residual(_samples([0.0, 1.0], [1.0, 0.5], [0.5, 0.5]))
        with pytest.raises(InsufficientHistory):
            partial_residuals(_samples([0.0, 1.0], [1.0, 0.5], [0.5, 0.5]))

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_partial_residuals(self):
        samples = _samples([0.0, 1.0, 2.0], [3.0, 2.0, 1.0], [0.0, 0.0, 0.0])
        for s in samples:
            s.partial = {'E_fluid': s.E_phys, 'D_fluid': 0.5, 'X_fluid': -0.5,
                         'E_surf': 1.0, 'D_surf': 0.25, 'X_surf': 0.25}
        residuals = partial_residuals(samples)
        assert residuals['fluid'] == [pytest.approx(0.0)]
        assert residuals['surf'] == [pytest.approx(0.0)]

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_history_bookkeeping(self, small_grid):
        history = BudgetHistory(depth=2)
        state = FlowState.equilibrium(small_grid, 1.0)
        masses = [1.0, 1.001, 0.999]
        for i, mass in enumerate(masses):
            history.push(state, BudgetSample(t=0.1 * i, E_phys=1.0 - 0.1 * i, D_phys=1.0, mass=mass))
        assert len(history) == 3
        assert len(history.previous_states()) == 2
        assert history.mass_drift() == pytest.approx(1e-3)
        assert len(history.residuals()) == 1
        t, E = history.sobolev_series()
        assert t.size == 0 and E.size == 0

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_empty_history(self):
        history = BudgetHistory()
        assert history.mass_drift() == 0.0
        assert history.residuals() == []


class TestSobolevFunctionals:
    """High-order energy built from backward differences."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_equilibrium_is_zero(self, small_grid):
        state = FlowState.equilibrium(small_grid, 1.0)
        result = sobolev_functionals(state, [state, state], 0.01, 1.0)
        assert result['complete']
        assert result['E_sob'] == pytest.approx(0.0, abs=1e-20)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_completeness_follows_history(self, wave_run):
        states, model = wave_run
        partial = sobolev_functionals(states[1], [states[0]], 0.01, model.c0)
        full = sobolev_functionals(states[2], states[:2], 0.01, model.c0)
        assert not sobolev_functionals(states[0], [], 0.01, model.c0)['complete']
        assert not partial['complete']
        assert full['complete']
        assert full['E_sob'] > 0.0 and full['D_sob'] > 0.0

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_static_wave_norm(self, small_grid):
        """With no history only the spatial terms remain: ||eta||_{H^3}^2 for a single mode."""
        x1, _ = spectral_basis(small_grid).physical_coordinates()
        state = FlowState.equilibrium(small_grid, 1.0)
        state.eta = SurfaceField.from_values(small_grid, 0.01 * np.cos(x1))
        result = sobolev_functionals(state, [], 0.01, 1.0)
        expected = small_grid.area * 0.5 * 1e-4 * 2.0 ** 3
        assert result['E_sob'] == pytest.approx(expected, rel=1e-10)


class TestDecayFit:
    """Exponential rate fitting."""

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_recovers_rate(self):
        t = np.linspace(0.0, 10.0, 101)
        lam, r_squared = decay_fit(t, 3.0 * np.exp(-0.5 * t))
        assert lam == pytest.approx(0.5, rel=1e-10)
        assert r_squared == pytest.approx(1.0)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_rate_under_multiplicative_noise(self, rng):
        t = np.linspace(0.0, 5.0, 201)
        E = np.exp(-2.0 * t) * (1.0 + 0.01 * rng.standard_normal(t.size))
        lam, r_squared = decay_fit(t, E)
        assert lam == pytest.approx(2.0, abs=0.05)
        assert r_squared > 0.99

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_transient_is_skipped(self):
        t = np.linspace(0.0, 10.0, 101)
        E = np.exp(-0.3 * t)
        E[0] = -1.0
        lam, _ = decay_fit(t, E, transient=0.2)
        assert lam == pytest.approx(0.3, rel=1e-10)

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_constant_series_has_zero_rate(self):
        lam, r_squared = decay_fit([0.0, 1.0, 2.0, 3.0], [2.0, 2.0, 2.0, 2.0], transient=0.0)
        assert lam == 0.0
        assert r_squared == 1.0

    @pytest.mark.unit
    @pytest.mark.numerics
    def test_invalid_series(self):
        with pytest.raises(FitDomainError):
            decay_fit([0.0, 1.0, 2.0], [1.0, 0.0, 0.5], transient=0.0)
        with pytest.raises(FitDomainError):
            decay_fit([0.0], [1.0])
        with pytest.raises(FitDomainError):
            decay_fit([0.0, 1.0], [1.0, 0.5, 0.2])
