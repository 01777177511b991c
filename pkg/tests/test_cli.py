# Surfactant simulator - Command line tests

import json
import logging
import os

import pytest

import surfactant_sim
from surfactant_sim import build_parser, main


@pytest.fixture(autouse=True)
def cli_environment(monkeypatch):
    """Default guards and plain loggers instead of the process-wide logging setup."""
    for name in ('SLOPE_HARD_LIMIT', 'SLOPE_WARN_LIMIT', 'J_ABORT_LIMIT', 'J_WARN_LIMIT', 'OUTPUT_DIR'):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setattr(surfactant_sim, 'setup_logging', lambda **kwargs: {
        key: logging.getLogger(name) for key, name in (
            ('app', 'surfactant_sim'), ('sim', 'surfactant_sim.sim'),
            ('verify', 'surfactant_sim.verify'), ('io', 'surfactant_sim.io'))})


@pytest.fixture
def config_file(temp_dir, run_config_data):
    def write(**output):
        data = dict(run_config_data, output={'formats': ['csv', 'json', 'dump'], **output})
        path = os.path.join(temp_dir, 'run.json')
        with open(path, 'w') as handle:
            json.dump(data, handle)
        return path
    return write


class TestParser:
    """Argument parsing."""

    @pytest.mark.cli
    def test_commands(self):
        parser = build_parser()
        args = parser.parse_args(['run', 'cfg.json', '--restart', 'dump.bin', '--output-dir', 'out'])
        assert (args.command, args.config, args.restart, args.output_dir) == ('run', 'cfg.json', 'dump.bin', 'out')
        assert parser.parse_args(['verify', 'all', '--json', 'r.json']).json_path == 'r.json'
        assert parser.parse_args(['export-theta', 'd.bin']).out is None

    @pytest.mark.cli
    @pytest.mark.parametrize("argv", [[], ['verify', 'everything'], ['run'], ['simulate', 'x']])
    def test_usage_errors(self, argv):
        with pytest.raises(SystemExit) as excinfo:
            main(argv)
        assert excinfo.value.code == 2


class TestRunCommand:
    """run: exit codes 0, 2 and 3."""

    @pytest.mark.cli
    def test_successful_run(self, config_file, temp_dir, capsys):
        out_dir = os.path.join(temp_dir, 'out')
        assert main(['run', config_file(), '--output-dir', out_dir]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed['name'] == 'tiny_wave'
        assert printed['steps'] == 6
        assert printed['aborted'] is False
        assert os.path.exists(os.path.join(out_dir, 'series.csv'))
        assert os.path.exists(os.path.join(out_dir, 'final_state.bin'))

    @pytest.mark.cli
    def test_missing_configuration(self, temp_dir, capsys):
        assert main(['run', os.path.join(temp_dir, 'absent.json')]) == 2
        assert 'Configuration error' in capsys.readouterr().err

    @pytest.mark.cli
    def test_invalid_configuration(self, temp_dir, run_config_data):
        path = os.path.join(temp_dir, 'bad.json')
        with open(path, 'w') as handle:
            json.dump(dict(run_config_data, schema_version=7), handle)
        assert main(['run', path]) == 2

    @pytest.mark.cli
    def test_numerical_abort(self, config_file, monkeypatch, capsys):
        class AbortingService:
            def __init__(self, config, step_logger=None):
                pass

            def run(self, run_config, restart=None, output_dir=None):
                return {'success': False, 'exit_code': 3, 'error': 'min J 0.05 below 0.1',
                        'summary': {'name': run_config.name, 'aborted': True}, 'paths': {}}

        monkeypatch.setattr(surfactant_sim, 'SimulationService', AbortingService)
        assert main(['run', config_file()]) == 3
        captured = capsys.readouterr()
        assert json.loads(captured.out)['aborted'] is True
        assert 'min J' in captured.err

    @pytest.mark.cli
    def test_environment_error(self, config_file, monkeypatch):
        monkeypatch.setenv('SLOPE_WARN_LIMIT', '3.0')
        assert main(['run', config_file()]) == 2


class TestVerifyCommand:
    """verify: exit codes 0 and 1."""

    @pytest.mark.cli
    def test_scaling_suite(self, temp_dir, capsys):
        report = os.path.join(temp_dir, 'verify.json')
        assert main(['verify', 'scaling', '--json', report]) == 0
        assert 'G1_ratio' in capsys.readouterr().out
        with open(report) as handle:
            data = json.load(handle)
        assert data['success'] and data['suite'] == 'scaling'

    @pytest.mark.cli
    def test_failure_exit_code(self, monkeypatch, capsys):
        class FailingService:
            def __init__(self, config, verify_logger=None):
                pass

            def run(self, suite):
                return {'success': False, 'exit_code': 1, 'suite': suite, 'results': [{}],
                        'failures': 1, 'table': 'suite  check'}

        monkeypatch.setattr(surfactant_sim, 'VerificationService', FailingService)
        assert main(['verify', 'budgets']) == 1
        assert '1 checks, 1 failed' in capsys.readouterr().out


class TestDumpCommands:
    """export-theta and info."""

    @pytest.fixture
    def dump(self, config_file, temp_dir):
        out_dir = os.path.join(temp_dir, 'out')
        assert main(['run', config_file(), '--output-dir', out_dir]) == 0
        return os.path.join(out_dir, 'final_state.bin')

    @pytest.mark.cli
    def test_export_theta(self, dump, temp_dir, capsys):
        target = os.path.join(temp_dir, 'mesh.npz')
        capsys.readouterr()
        assert main(['export-theta', dump, '--out', target]) == 0
        assert capsys.readouterr().out.strip() == target
        assert os.path.exists(target)

    @pytest.mark.cli
    def test_info(self, dump, capsys):
        capsys.readouterr()
        assert main(['info', dump]) == 0
        header = json.loads(capsys.readouterr().out)
        assert header['step'] == 6
        assert header['grid']['Nz'] == 8

    @pytest.mark.cli
    def test_unreadable_dump(self, temp_dir):
        missing = os.path.join(temp_dir, 'absent.bin')
        assert main(['info', missing]) == 2
        assert main(['export-theta', missing]) == 2
