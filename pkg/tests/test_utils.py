# Surfactant simulator - Helpers, logging and process configuration tests

import json
import logging
import math
import os

import numpy as np
import pytest

from config import Config, load_config
from src.utils.helpers import (
    CSVSeriesWriter,
    file_hash,
    format_file_size,
    format_float,
    format_table,
    read_csv_series,
    to_jsonable,
    validate_json_file,
    write_json,
)
from src.utils.logging_config import (
    JSONFormatter,
    log_error,
    log_guard_event,
    log_step_event,
    setup_logging,
)
from src.numerics.errors import SlopeTooLarge


@pytest.fixture
def configure_logging():
    """setup_logging that undoes its handlers and levels afterwards."""
    root = logging.getLogger()
    level = root.level
    created = []

    def configure(**kwargs):
        loggers = setup_logging(**kwargs)
        created.extend(root.handlers)
        created.extend(loggers['sim'].handlers)
        return loggers

    yield configure
    for handler in created:
        handler.close()
        root.removeHandler(handler)
    root.setLevel(level)
    for name in ('surfactant_sim', 'surfactant_sim.sim', 'surfactant_sim.verify', 'surfactant_sim.io'):
        logger = logging.getLogger(name)
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
        logger.setLevel(logging.NOTSET)
        logger.propagate = True


class _Collector(logging.Handler):
    def __init__(self):
        super().__init__()
        self.records = []

    def emit(self, record):
        self.records.append(record)


class TestHelpers:
    """Formatting, CSV and JSON helpers."""

    @pytest.mark.unit
    def test_format_float(self):
        assert format_float(None) == 'nan'
        assert format_float(math.nan) == 'nan'
        assert format_float(0.1) == '0.10000000000000001'
        assert float(format_float(1.0 / 3.0)) == 1.0 / 3.0

    @pytest.mark.unit
    def test_to_jsonable(self):
        data = {'a': np.float64(1.5), 'b': np.arange(3), 'c': (np.int64(2), math.inf),
                'd': np.bool_(True), 1: 'x'}
        assert to_jsonable(data) == {'a': 1.5, 'b': [0, 1, 2], 'c': [2, None], 'd': True, '1': 'x'}

    @pytest.mark.unit
    def test_csv_series_round_trip(self, temp_dir):
        path = os.path.join(temp_dir, 'out', 'series.csv')
        with CSVSeriesWriter(path, ('t', 'E')) as writer:
            writer.write({'t': 0.0, 'E': 1.0})
            writer.write({'t': 0.1, 'E': None})
            assert writer.rows_written == 2
        result = read_csv_series(path)
        assert result['success']
        assert result['records_imported'] == 2
        assert list(result['columns']) == ['t', 'E']
        assert result['columns']['t'][1] == 0.1
        assert np.isnan(result['columns']['E'][1])

    @pytest.mark.unit
    def test_read_missing_series(self, temp_dir):
        assert not read_csv_series(os.path.join(temp_dir, 'absent.csv'))['success']

    @pytest.mark.unit
    def test_json_reports(self, temp_dir):
        path = os.path.join(temp_dir, 'summary.json')
        assert write_json({'lambda': np.float64(0.5), 'fit': math.nan}, path)['success']
        loaded = validate_json_file(path)
        assert loaded['valid']
        assert loaded['data'] == {'fit': None, 'lambda': 0.5}
        assert validate_json_file(os.path.join(temp_dir, 'absent.json'))['error'] == 'File not found'

    @pytest.mark.unit
    def test_file_hash_and_size(self, temp_dir):
        path = os.path.join(temp_dir, 'blob.bin')
        with open(path, 'wb') as handle:
            handle.write(b'abc')
        assert file_hash(path) == 'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad'
        assert file_hash(os.path.join(temp_dir, 'absent')) is None
        assert format_file_size(512) == '512.0 B'
        assert format_file_size(2048) == '2.0 KB'

    @pytest.mark.unit
    def test_format_table(self):
        table = format_table(('check', 'value', 'status'), [('mass', 1.5e-3, True), ('energy', 2.0, False)])
        lines = table.splitlines()
        assert len(lines) == 4
        assert lines[0].split() == ['check', 'value', 'status']
        assert '1.500e-03' in lines[2] and 'PASS' in lines[2]
        assert 'FAIL' in lines[3]


class TestLogging:
    """Console, file and structured logging."""

    @pytest.mark.unit
    def test_setup_creates_log_files(self, temp_dir, configure_logging):
        log_dir = os.path.join(temp_dir, 'logs')
        loggers = configure_logging(log_level='INFO', log_dir=log_dir)
        assert set(loggers) == {'app', 'sim', 'verify', 'io'}
        assert not loggers['sim'].propagate
        loggers['app'].info('hello')
        log_step_event(loggers['sim'], 3, 0.03, 1.0, 0.5, 6.0)
        for handler in logging.getLogger().handlers + loggers['sim'].handlers:
            handler.flush()
        names = set(os.listdir(log_dir))
        assert {'surfactant_sim.log', 'surfactant_sim_errors.log', 'surfactant_sim_steps.log'} <= names
        with open(os.path.join(log_dir, 'surfactant_sim_steps.log')) as handle:
            assert 'step 3' in handle.read()

    @pytest.mark.unit
    def test_console_only(self, configure_logging):
        loggers = configure_logging(log_level='WARNING', log_dir=None)
        assert loggers['sim'].propagate
        assert len(logging.getLogger().handlers) == 1
        assert loggers['app'].level == logging.WARNING

    @pytest.mark.unit
    def test_json_formatter_keeps_extra_fields(self):
        record = logging.LogRecord('surfactant_sim.sim', logging.INFO, __file__, 10, 'step %d', (4,), None)
        record.event_type = 'step'
        record.E_phys = 0.25
        entry = json.loads(JSONFormatter().format(record))
        assert entry['message'] == 'step 4'
        assert entry['level'] == 'INFO'
        assert entry['event_type'] == 'step'
        assert entry['E_phys'] == 0.25

    @pytest.mark.unit
    def test_structured_helpers(self):
        logger = logging.getLogger('surfactant_sim.test_helpers')
        collector = _Collector()
        logger.addHandler(collector)
        logger.setLevel(logging.DEBUG)
        try:
            log_guard_event(logger, 'max_slope', 0.7, 0.5)
            log_error(logger, SlopeTooLarge('too steep', context={'max_slope': 1.2}), {'step': 9})
        finally:
            logger.removeHandler(collector)
            logger.setLevel(logging.NOTSET)
        guard, error = collector.records
        assert guard.levelno == logging.WARNING and guard.guard == 'max_slope'
        assert error.error_type == 'SlopeTooLarge'
        assert error.context == {'max_slope': 1.2, 'step': 9}


class TestConfig:
    """Environment-driven process configuration."""

    @pytest.mark.unit
    def test_defaults_are_valid(self, monkeypatch):
        for name in ('SIM_THREADS', 'LOG_LEVEL', 'SLOPE_HARD_LIMIT', 'SLOPE_WARN_LIMIT',
                     'J_ABORT_LIMIT', 'J_WARN_LIMIT'):
            monkeypatch.delenv(name, raising=False)
        config = load_config()
        assert config.validate() == []
        assert config.get_guard_config() == {'slope_hard': 1.0, 'slope_warn': 0.5,
                                             'j_abort': 0.1, 'j_warn': 0.5}

    @pytest.mark.unit
    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv('SIM_THREADS', '4')
        monkeypatch.setenv('LOG_JSON', 'yes')
        monkeypatch.setenv('LOG_DIR', '')
        config = Config()
        assert config.get_fft_config() == {'workers': 4}
        assert config.LOG_JSON
        assert config.get_logging_config()['log_dir'] is None

    @pytest.mark.unit
    def test_bad_numbers_fall_back(self, monkeypatch):
        monkeypatch.setenv('SIM_THREADS', 'many')
        monkeypatch.setenv('J_WARN_LIMIT', 'half')
        config = Config()
        assert config.SIM_THREADS == 1
        assert config.J_WARN_LIMIT == 0.5

    @pytest.mark.unit
    def test_inconsistent_guards_are_rejected(self, monkeypatch):
        monkeypatch.setenv('SLOPE_WARN_LIMIT', '2.0')
        monkeypatch.setenv('SLOPE_HARD_LIMIT', '1.0')
        assert Config().validate()
        with pytest.raises(ValueError):
            load_config()

    @pytest.mark.unit
    def test_invalid_log_level(self, test_config):
        config = Config(LOG_LEVEL='LOUD')
        assert any('LOG_LEVEL' in error for error in config.validate())
        assert test_config.validate() == []
