#!/usr/bin/env python3
"""
Surfactant free-surface simulator - command line entry point
Commands: run, verify, export-theta, info

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical abort (last valid state dumped)
"""

import argparse
import json
import sys
from typing import List, Optional

from config import load_config
from src.numerics.errors import ConfigError
from src.services import SUITES, ExportService, SimulationService, VerificationService
from src.utils.helpers import write_json
from src.utils.logging_config import log_error, setup_logging
from src.validators import load_run_config

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='surfactant_sim',
                                     description='Viscous free-surface flow with surfactant in flattened coordinates')
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='run a simulation from a JSON configuration')
    run.add_argument('config', help='run configuration (JSON)')
    run.add_argument('--restart', metavar='DUMP', help='continue from a state dump')
    run.add_argument('--output-dir', metavar='DIR', help='override the output directory')

    verify = commands.add_parser('verify', help='run the property suites')
    verify.add_argument('suite', choices=SUITES + ('all',))
    verify.add_argument('--json', metavar='FILE', dest='json_path', help='also write a JSON report')

    export = commands.add_parser('export-theta', help='export the physical mesh of a state dump')
    export.add_argument('dump', help='state dump')
    export.add_argument('--out', metavar='FILE', help='output .npz (default: <dump>_theta.npz)')

    info = commands.add_parser('info', help='print the header of a state dump')
    info.add_argument('dump', help='state dump')
    return parser


def cmd_run(args, config, loggers) -> int:
    logger = loggers['app']
    try:
        run_config = load_run_config(args.config)
    except ConfigError as e:
        log_error(logger, e, {'config': args.config})
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    service = SimulationService(config, step_logger=loggers['sim'])
    result = service.run(run_config, restart=args.restart, output_dir=args.output_dir)
    if result['summary']:
        summary = result['summary']
        print(json.dumps({key: summary.get(key) for key in
                          ('name', 't_final', 'steps', 'lambda_fit', 'r_squared', 'max_abs_residual',
                           'mass_drift', 'compat_t0', 'aborted')}, indent=2, default=str))
    if not result['success']:
        print(f"Run failed: {result['error']}", file=sys.stderr)
    return result['exit_code']


def cmd_verify(args, config, loggers) -> int:
    service = VerificationService(config, verify_logger=loggers['verify'])
    result = service.run(args.suite)
    print(result['table'])
    print(f"\n{len(result['results'])} checks, {result['failures']} failed")
    if args.json_path:
        written = write_json({key: result[key] for key in ('suite', 'success', 'failures', 'results')},
                             args.json_path)
        if not written['success']:
            print(f"Could not write report: {written['error']}", file=sys.stderr)
    return result['exit_code']


def cmd_export_theta(args, config, loggers) -> int:
    result = ExportService(config).export_theta(args.dump, args.out)
    if not result['success']:
        print(f"Export failed: {result['error']}", file=sys.stderr)
        return EXIT_CONFIG
    print(result['file_path'])
    return EXIT_OK


def cmd_info(args, config, loggers) -> int:
    result = ExportService(config).info(args.dump)
    if not result['success']:
        print(f"Cannot read dump: {result['error']}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(result, indent=2, default=str))
    return EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'verify': cmd_verify,
    'export-theta': cmd_export_theta,
    'info': cmd_info,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config()
    except ValueError as e:
        print(f"Environment configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    loggers = setup_logging(**config.get_logging_config())
    return COMMANDS[args.command](args, config, loggers)


if __name__ == '__main__':
    sys.exit(main())
