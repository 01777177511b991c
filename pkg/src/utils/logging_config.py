#!/usr/bin/env python3
"""
Logging configuration for the surfactant simulator
Provides centralized logging setup and structured event helpers
"""

import os
import logging
import logging.handlers
import json
import math
import sys
import traceback
from datetime import datetime, timezone
from typing import Optional, Dict, Any

import coloredlogs

CONSOLE_FORMAT = '%(asctime)s %(name)s %(levelname)s %(message)s'

_RESERVED = {
    'name', 'msg', 'args', 'levelname', 'levelno', 'pathname', 'filename', 'module',
    'lineno', 'funcName', 'created', 'msecs', 'relativeCreated', 'thread', 'threadName',
    'processName', 'process', 'getMessage', 'exc_info', 'exc_text', 'stack_info',
    'taskName', 'message', 'asctime',
}


class JSONFormatter(logging.Formatter):
    """Custom JSON formatter for structured logging"""

    def format(self, record):
        log_entry = {
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno
        }

        if record.exc_info:
            log_entry['exception'] = {
                'type': record.exc_info[0].__name__,
                'message': str(record.exc_info[1]),
                'traceback': traceback.format_exception(*record.exc_info)
            }

        # Add extra fields
        for key, value in record.__dict__.items():
            if key not in _RESERVED:
                log_entry[key] = value

        return json.dumps(log_entry, default=str)


def _rotating_handler(path: str, level: int, formatter: logging.Formatter,
                      max_bytes: int, backup_count: int) -> Optional[logging.Handler]:
    try:
        handler = logging.handlers.RotatingFileHandler(path, maxBytes=max_bytes, backupCount=backup_count)
    except (OSError, PermissionError) as e:
        logging.getLogger(__name__).warning("Could not open log file %s: %s", path, e)
        return None
    handler.setLevel(level)
    handler.setFormatter(formatter)
    return handler


def setup_logging(app_name: str = 'surfactant_sim',
                  log_level: str = 'INFO',
                  log_dir: Optional[str] = 'logs',
                  max_bytes: int = 10*1024*1024,  # 10MB
                  backup_count: int = 5,
                  json_format: bool = False) -> Dict[str, logging.Logger]:
    """Setup console and rotating file logging; returns the specialized loggers

    log_dir None (or an unwritable directory) means console-only logging.
    """
    level = getattr(logging, log_level.upper())

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    root_logger.handlers.clear()

    file_formatter = JSONFormatter() if json_format else logging.Formatter(CONSOLE_FORMAT)
    if json_format:
        console_formatter = JSONFormatter()
    else:
        console_formatter = coloredlogs.ColoredFormatter(CONSOLE_FORMAT)

    # stderr keeps stdout free for tables and reports
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(console_formatter)
    root_logger.addHandler(console_handler)

    if log_dir:
        try:
            os.makedirs(log_dir, exist_ok=True)
        except (OSError, PermissionError) as e:
            root_logger.warning("Could not create log directory '%s': %s; console logging only", log_dir, e)
            log_dir = None

    steps_handler = None
    if log_dir:
        for suffix, handler_level in (('', level), ('_errors', logging.ERROR)):
            handler = _rotating_handler(os.path.join(log_dir, f'{app_name}{suffix}.log'),
                                        handler_level, file_formatter, max_bytes, backup_count)
            if handler:
                root_logger.addHandler(handler)
        steps_handler = _rotating_handler(os.path.join(log_dir, f'{app_name}_steps.log'),
                                          logging.INFO, file_formatter, max_bytes, backup_count)

    loggers = {
        'app': logging.getLogger(app_name),
        'sim': logging.getLogger(f'{app_name}.sim'),
        'verify': logging.getLogger(f'{app_name}.verify'),
        'io': logging.getLogger(f'{app_name}.io'),
    }

    # per-step records go to their own file only
    if steps_handler:
        loggers['sim'].addHandler(steps_handler)
        loggers['sim'].propagate = False

    for logger in loggers.values():
        logger.setLevel(level)

    return loggers


def log_error(logger: logging.Logger,
              error: Exception,
              context: Optional[Dict[str, Any]] = None):
    """Log error with context"""

    log_data = {
        'event_type': 'error',
        'error_type': type(error).__name__,
        'error_message': str(error),
    }

    merged = dict(getattr(error, 'context', {}) or {})
    if context:
        merged.update(context)
    if merged:
        log_data['context'] = merged

    logger.error(f"Error: {type(error).__name__}: {str(error)}",
                 exc_info=True, extra=log_data)


def _finite(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def log_step_event(logger: logging.Logger,
                   step: int,
                   t: float,
                   E_phys: float,
                   D_phys: float,
                   mass: float,
                   residual: Optional[float] = None,
                   additional_data: Optional[Dict[str, Any]] = None):
    """Log one budget sample of a run"""

    log_data = {
        'event_type': 'step',
        'step': step,
        't': t,
        'E_phys': _finite(E_phys),
        'D_phys': _finite(D_phys),
        'mass': _finite(mass),
        'residual': _finite(residual),
    }

    if additional_data:
        log_data.update(additional_data)

    logger.info(f"step {step} t={t:.6g} E={E_phys:.6e} D={D_phys:.6e}", extra=log_data)


def log_guard_event(logger: logging.Logger,
                    guard: str,
                    value: float,
                    threshold: float,
                    severity: str = 'WARNING'):
    """Log a validity guard crossing (slope, Jacobian, concentration window)"""

    log_data = {
        'event_type': 'guard_event',
        'guard': guard,
        'value': value,
        'threshold': threshold,
        'severity': severity,
    }

    message = f"Guard: {guard} = {value:.6g} (threshold {threshold:.6g})"

    if severity == 'CRITICAL':
        logger.critical(message, extra=log_data)
    elif severity == 'ERROR':
        logger.error(message, extra=log_data)
    else:
        logger.warning(message, extra=log_data)


def log_suite_result(logger: logging.Logger,
                     suite: str,
                     check: str,
                     measured: float,
                     tolerance: str,
                     passed: bool):
    """Log the outcome of one verification check"""

    log_data = {
        'event_type': 'verification',
        'suite': suite,
        'check': check,
        'measured': measured,
        'tolerance': tolerance,
        'passed': passed,
    }

    message = f"{suite}/{check}: {'PASS' if passed else 'FAIL'} ({measured:.3e}, required {tolerance})"
    if passed:
        logger.info(message, extra=log_data)
    else:
        logger.warning(message, extra=log_data)
