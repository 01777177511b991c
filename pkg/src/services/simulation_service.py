#!/usr/bin/env python3
"""
Simulation Service for the surfactant simulator
Builds initial data, drives the IMEX loop and writes budget series, summaries and dumps
"""

import logging
import os
import time
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..models.run_config import RunConfig
from ..models.state import CSV_COLUMNS, BudgetSample, FlowState
from ..models.state_store import StateStore, StateStoreError
from ..numerics.diagnostics import (
    BudgetHistory,
    budget_residual,
    decay_fit,
    exchange_budgets,
    mean_c_check,
    partial_residuals,
    physical_budget,
    sobolev_functionals,
)
from ..numerics.dynamics import (
    GuardLimits,
    IMEXIntegrator,
    compatibility_residual,
    make_initial_data,
    prepare_geometry,
)
from ..numerics.errors import (
    CompatibilityFailed,
    ConfigError,
    FitDomainError,
    IncompatibleData,
    NumericalAbort,
    OutOfRange,
)
from ..numerics.linear_core import FactorizationCache
from ..numerics.spectral import set_fft_workers
from ..utils.helpers import CSVSeriesWriter, write_json
from ..utils.logging_config import log_error, log_guard_event, log_step_event

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3

SETUP_ERRORS = (ConfigError, OutOfRange, IncompatibleData, CompatibilityFailed, StateStoreError)

SERIES_FILE = 'series.csv'
SUMMARY_FILE = 'summary.json'
CHECKPOINT_FILE = 'checkpoint.bin'
FINAL_FILE = 'final_state.bin'
ABORT_FILE = 'abort_state.bin'

# energy must not grow after this fraction of the samples
MONOTONE_SKIP = 0.05


class SimulationService:
    """Runs one configured simulation from initial data (or a dump) to t_end"""

    def __init__(self, config, store: Optional[StateStore] = None,
                 step_logger: Optional[logging.Logger] = None):
        self.config = config
        self.store = store or StateStore(config)
        self.logger = logging.getLogger(__name__)
        self.step_logger = step_logger or logging.getLogger('surfactant_sim.sim')
        self.guards = GuardLimits(**config.get_guard_config())

    def resolve_output_dir(self, run_config: RunConfig, output_dir: Optional[str] = None) -> str:
        """Command line first, then the run file, then OUTPUT_DIR/<name>, then runs/<name>"""
        if output_dir:
            return output_dir
        if run_config.output.directory:
            return run_config.output.directory
        base = getattr(self.config, 'OUTPUT_DIR', '') or 'runs'
        return os.path.join(base, run_config.name)

    def _setup(self, run_config: RunConfig, restart: Optional[str], cache: FactorizationCache):
        """Initial state, model with c0, construction report and the multistep history"""
        if restart is None:
            state, model, info = make_initial_data(run_config.initial, run_config.grid, run_config.model,
                                                   run_config.gamma, self.guards, cache)
            self.logger.info(f"Initial data built: c0={info['c0']:.6g}, u0={info['u0']}, "
                             f"compat={info['compat']:.3e}")
            return state, model, info, None

        stored = self.store.load(restart)
        if stored.grid != run_config.grid:
            raise ConfigError("restart dump was written on a different grid",
                              context={'dump': stored.grid.to_dict(), 'config': run_config.grid.to_dict()})
        if stored.gamma != run_config.gamma:
            self.logger.warning(f"Restart dump gamma {stored.gamma} differs from the run file "
                                f"({run_config.gamma}); using the run file")
        model = run_config.model.with_c0(stored.model.c0)
        info = {'c0': float(model.c0), 'restart': restart, 'restart_step': stored.state.step,
                'u0': 'restart', 'fixed_point_iterations': 0}
        self.logger.info(f"Restarting from {restart} at t={stored.state.t:.6g} (step {stored.state.step})")
        return stored.state, model, info, stored.previous

    def _sample(self, state: FlowState, history: BudgetHistory, model, run_config: RunConfig) -> BudgetSample:
        geom, pack = prepare_geometry(state.eta, self.guards)
        sample = physical_budget(state, pack, geom, model, run_config.gamma)
        if run_config.diagnostics.sobolev:
            sob = sobolev_functionals(state, history.previous_states(), run_config.stepping.dt, float(model.c0))
            if sob['complete']:
                sample.E_sob, sample.D_sob = sob['E_sob'], sob['D_sob']
        sample.compat = compatibility_residual(state, model, pack, geom)
        if run_config.diagnostics.partial_budgets:
            sample.partial = exchange_budgets(state, pack, geom, model, run_config.gamma)
        return sample

    def _report_guards(self, integrator: IMEXIntegrator) -> None:
        report = integrator.last_report
        if not report or report['in_regime']:
            return
        if not report['slope_ok']:
            log_guard_event(self.logger, 'max_slope', report['max_slope'], self.guards.slope_warn)
        if not report['jacobian_ok']:
            log_guard_event(self.logger, 'min_J', report['min_J'], self.guards.j_warn)
        if not report['concentration_ok']:
            lo, hi = report['c_window']
            value = report['c_min'] if report['c_min'] < lo else report['c_max']
            log_guard_event(self.logger, 'concentration', value, lo if value < lo else hi)

    def run(self, run_config: RunConfig, restart: Optional[str] = None,
            output_dir: Optional[str] = None) -> Dict[str, Any]:
        """Execute the run; the result carries an exit code for the command line"""
        started = time.perf_counter()
        directory = self.resolve_output_dir(run_config, output_dir)
        formats = run_config.output.formats
        stepping = run_config.stepping
        paths: Dict[str, str] = {}

        set_fft_workers(self.config.get_fft_config()['workers'])
        cache = FactorizationCache()

        try:
            state, model, info, previous = self._setup(run_config, restart, cache)
            integrator = IMEXIntegrator(run_config.grid, model, run_config.gamma, stepping.dt,
                                        scheme=stepping.scheme, corrector=stepping.corrector,
                                        guards=self.guards, cache=cache)
            integrator.restore_history(previous)
        except SETUP_ERRORS as e:
            log_error(self.logger, e, {'run': run_config.name})
            return {'success': False, 'exit_code': EXIT_CONFIG, 'error': str(e), 'summary': None, 'paths': paths}
        except NumericalAbort as e:
            # invalid initial data: nothing valid to dump yet
            log_error(self.logger, e, {'run': run_config.name, 'phase': 'setup'})
            return {'success': False, 'exit_code': EXIT_CONFIG, 'error': str(e), 'summary': None, 'paths': paths}

        os.makedirs(directory, exist_ok=True)
        history = BudgetHistory(depth=3)
        if previous is not None:
            history.push(previous)

        writer = None
        if 'csv' in formats:
            name = SERIES_FILE if restart is None else f'series_from_{state.step:08d}.csv'
            paths['series'] = os.path.join(directory, name)
            writer = CSVSeriesWriter(paths['series'], CSV_COLUMNS)

        pending: List[Tuple[int, BudgetSample]] = []
        compat0 = info.get('compat')
        total_steps = stepping.steps
        error = None
        exit_code = EXIT_OK

        def emit(step: int, sample: BudgetSample) -> None:
            if writer:
                writer.write(sample.row())
            log_step_event(self.step_logger, step, sample.t, sample.E_phys, sample.D_phys,
                           sample.mass, sample.residual, {'compat': sample.compat})

        def record(current: FlowState) -> None:
            sample = self._sample(current, history, model, run_config)
            history.push(current, sample)
            pending.append((current.step, sample))
            if len(history.samples) >= 3:
                pending[-2][1].residual = budget_residual(history.samples[-3:])[0][1]
            # a row is final once the next sample has fixed its residual
            while len(pending) > 1:
                emit(*pending.pop(0))

        # most recent state whose geometry passed the guards
        valid = state
        try:
            record(state)
            while state.step < total_steps:
                new = integrator.step(state)
                valid = state
                self._report_guards(integrator)
                state = new
                if state.step % stepping.stride == 0 or state.step == total_steps:
                    record(state)
                    valid = state
                else:
                    history.push(state)
                if run_config.output.checkpoint_every and state.step % run_config.output.checkpoint_every == 0:
                    paths['checkpoint'] = self.store.save(
                        os.path.join(directory, CHECKPOINT_FILE), state, model, run_config.gamma,
                        previous=integrator.previous_state if stepping.scheme == 'imex-bdf2' else None,
                        extra={'run': run_config.name})
        except (NumericalAbort, OutOfRange) as e:
            # OutOfRange here means ctilde left the tension window mid-run
            log_error(self.logger, e, {'run': run_config.name, 'step': state.step, 't': state.t})
            paths['abort_state'] = self.store.save(
                os.path.join(directory, ABORT_FILE), valid, model, run_config.gamma,
                extra={'run': run_config.name, 'error': str(e)})
            state = valid
            error = str(e)
            exit_code = EXIT_ABORT
        finally:
            for step, sample in pending:
                emit(step, sample)
            pending.clear()
            if writer:
                writer.close()

        if exit_code == EXIT_OK and 'dump' in formats:
            paths['final_state'] = self.store.save(
                os.path.join(directory, FINAL_FILE), state, model, run_config.gamma,
                previous=integrator.previous_state, extra={'run': run_config.name})

        summary = self._summarize(run_config, history, state, model, info, compat0,
                                  integrator.guard_events, time.perf_counter() - started)
        summary['aborted'] = exit_code == EXIT_ABORT
        if error:
            summary['error'] = error
        if 'json' in formats:
            paths['summary'] = os.path.join(directory, SUMMARY_FILE)
            written = write_json(summary, paths['summary'])
            if not written['success']:
                self.logger.error(f"Could not write summary: {written['error']}")

        self.logger.info(f"Run '{run_config.name}' finished with exit code {exit_code} "
                         f"({summary['steps']} steps, t={state.t:.6g})")
        return {'success': exit_code == EXIT_OK, 'exit_code': exit_code, 'error': error,
                'summary': summary, 'paths': paths, 'output_dir': directory}

    def _summarize(self, run_config: RunConfig, history: BudgetHistory, state: FlowState, model,
                   info: Dict[str, Any], compat0: Optional[float], guard_events: int,
                   wall_time: float) -> Dict[str, Any]:
        transient = run_config.diagnostics.transient
        times, energies = history.energies()
        summary: Dict[str, Any] = {
            'name': run_config.name,
            'seed': run_config.seed,
            'scheme': run_config.stepping.scheme,
            'dt': run_config.stepping.dt,
            't_final': state.t,
            'steps': state.step,
            'c0': float(model.c0),
            'u0': info.get('u0'),
            'compat_t0': compat0,
            'samples': len(history),
            'guard_events': guard_events,
            'wall_time': wall_time,
            'max_abs_E_phys': float(np.max(np.abs(energies))) if energies.size else None,
            'mass_drift': history.mass_drift(),
        }
        if 'restart' in info:
            summary['restart'] = info['restart']

        try:
            summary['lambda_fit'], summary['r_squared'] = decay_fit(times, energies, transient)
        except FitDomainError as e:
            self.logger.info(f"Energy decay fit unavailable: {e}")
            summary['lambda_fit'] = summary['r_squared'] = None

        sob_t, sob_E = history.sobolev_series()
        try:
            summary['lambda_sob'], _ = decay_fit(sob_t, sob_E, transient)
        except FitDomainError:
            summary['lambda_sob'] = None

        residuals = history.residuals()
        summary['max_abs_residual'] = max((abs(r) for _, r in residuals), default=None)

        if run_config.diagnostics.partial_budgets and len(history) >= 3:
            summary['partial_residuals'] = {kind: max(abs(v) for v in series)
                                            for kind, series in partial_residuals(history.samples).items()}

        skip = int(np.ceil(MONOTONE_SKIP * energies.size))
        tail = energies[skip:]
        scale = max(float(np.max(np.abs(energies))) if energies.size else 0.0, 1e-300)
        summary['energy_monotone'] = bool(tail.size < 2 or np.all(np.diff(tail) <= 1e-12 * scale))

        geom, _ = prepare_geometry(state.eta, self.guards)
        summary['mean_c'] = mean_c_check(state, geom, float(model.c0))
        return summary
