#!/usr/bin/env python3
"""
Validation Utilities for the surfactant simulator
Loading run configurations and checking input files
"""

import os
from dataclasses import replace
from typing import Optional, List, Dict, Any

from marshmallow import ValidationError

from ..models.run_config import RunConfig
from ..numerics.errors import ConfigError
from ..utils.helpers import validate_json_file
from .schemas import RunConfigSchema


def validate_file_path(file_path: str, allowed_extensions: Optional[List[str]] = None) -> Dict[str, Any]:
    """Validate that a path names an existing file with an allowed extension"""
    if not file_path or not isinstance(file_path, str):
        return {'valid': False, 'error': 'Invalid file path'}

    if not os.path.isfile(file_path):
        return {'valid': False, 'error': f'File not found: {file_path}'}

    extension = os.path.splitext(file_path)[1].lstrip('.').lower()
    if allowed_extensions and extension not in allowed_extensions:
        return {
            'valid': False,
            'error': f'Invalid file extension. Allowed: {", ".join(allowed_extensions)}'
        }

    return {
        'valid': True,
        'filename': os.path.basename(file_path),
        'extension': extension,
        'path': file_path
    }


def validate_json_structure(data: Any, required_fields: List[str]) -> Dict[str, Any]:
    """Validate JSON data structure"""
    if not isinstance(data, dict):
        return {'valid': False, 'error': 'Data must be a JSON object'}

    missing_fields = [field for field in required_fields if field not in data]
    if missing_fields:
        return {
            'valid': False,
            'error': f'Missing required fields: {", ".join(missing_fields)}'
        }

    return {'valid': True, 'data': data}


def flatten_errors(messages: Any, prefix: str = '') -> List[str]:
    """Turn nested marshmallow messages into 'path: message' lines"""
    if isinstance(messages, dict):
        lines = []
        for key, value in messages.items():
            path = f"{prefix}.{key}" if prefix else str(key)
            lines.extend(flatten_errors(value, path))
        return lines
    if isinstance(messages, list):
        lines = []
        for item in messages:
            lines.extend(flatten_errors(item, prefix))
        return lines
    return [f"{prefix}: {messages}" if prefix else str(messages)]


def parse_run_config(data: Any) -> RunConfig:
    """Validate a decoded configuration; ConfigError lists every problem"""
    structure = validate_json_structure(data, ['schema_version'])
    if not structure['valid']:
        raise ConfigError(structure['error'])
    try:
        config = RunConfigSchema().load(data)
    except ValidationError as e:
        errors = flatten_errors(e.messages)
        raise ConfigError('Invalid run configuration: ' + '; '.join(errors),
                          context={'errors': errors}) from e
    return replace(config, raw=data)


def load_run_config(file_path: str) -> RunConfig:
    """Read and validate a JSON run configuration file"""
    checked = validate_file_path(file_path, ['json'])
    if not checked['valid']:
        raise ConfigError(checked['error'], context={'path': file_path})
    loaded = validate_json_file(file_path)
    if not loaded['valid']:
        raise ConfigError(loaded['error'], context={'path': file_path})
    return parse_run_config(loaded['data'])
