#!/usr/bin/env python3
"""
Helper utilities for the surfactant simulator
CSV time series, JSON reports, hashing and table formatting
"""

import os
import csv
import json
import math
import hashlib
from typing import Optional, Dict, Any, List, Sequence

import numpy as np


def format_float(value: Optional[float]) -> str:
    """17 significant digits, 'nan' for undefined values"""
    if value is None:
        return 'nan'
    value = float(value)
    if math.isnan(value):
        return 'nan'
    return f"{value:.17g}"


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy scalars/arrays and non-finite floats for json.dump"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


class CSVSeriesWriter:
    """Streams rows of a fixed column set to a CSV file"""

    def __init__(self, file_path: str, columns: Sequence[str]):
        self.file_path = file_path
        self.columns = list(columns)
        directory = os.path.dirname(os.path.abspath(file_path))
        os.makedirs(directory, exist_ok=True)
        self._handle = open(file_path, 'w', newline='', encoding='utf-8')
        self._writer = csv.writer(self._handle, lineterminator='\n')
        self.rows_written = 0
        self._writer.writerow(self.columns)

    def write(self, row: Dict[str, Optional[float]]) -> None:
        self._writer.writerow([format_float(row.get(name)) for name in self.columns])
        self.rows_written += 1

    def flush(self) -> None:
        self._handle.flush()

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv_series(file_path: str) -> Dict[str, Any]:
    """Read a CSV time series back as float columns"""
    try:
        with open(file_path, 'r', encoding='utf-8') as csvfile:
            reader = csv.DictReader(csvfile)
            rows = list(reader)
            columns = reader.fieldnames or []
        return {
            'success': True,
            'columns': {name: np.array([float(r[name]) for r in rows]) for name in columns},
            'records_imported': len(rows),
            'file_path': file_path
        }
    except (OSError, ValueError, KeyError) as e:
        return {
            'success': False,
            'error': str(e),
            'file_path': file_path
        }


def write_json(data: Dict[str, Any], file_path: str) -> Dict[str, Any]:
    """Write a JSON report (non-finite floats become null)"""
    try:
        directory = os.path.dirname(os.path.abspath(file_path))
        os.makedirs(directory, exist_ok=True)
        with open(file_path, 'w', encoding='utf-8') as f:
            json.dump(to_jsonable(data), f, indent=2, sort_keys=True)
            f.write('\n')
        return {'success': True, 'file_path': file_path}
    except (OSError, TypeError, ValueError) as e:
        return {'success': False, 'error': str(e), 'file_path': file_path}


def validate_json_file(file_path: str) -> Dict[str, Any]:
    """Validate JSON file format"""
    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            data = json.load(f)

        return {
            'valid': True,
            'data': data,
            'file_path': file_path
        }

    except json.JSONDecodeError as e:
        return {
            'valid': False,
            'error': f'JSON decode error: {str(e)}',
            'file_path': file_path
        }
    except FileNotFoundError:
        return {
            'valid': False,
            'error': 'File not found',
            'file_path': file_path
        }
    except OSError as e:
        return {
            'valid': False,
            'error': str(e),
            'file_path': file_path
        }


def file_hash(file_path: str, algorithm: str = 'sha256') -> Optional[str]:
    """Hash of a file's bytes, None when it cannot be read"""
    try:
        with open(file_path, 'rb') as f:
            digest = hashlib.new(algorithm)
            for chunk in iter(lambda: f.read(65536), b''):
                digest.update(chunk)
        return digest.hexdigest()
    except (FileNotFoundError, PermissionError):
        return None


def format_file_size(size_bytes: int) -> str:
    """Format file size in human readable format"""
    for unit in ['B', 'KB', 'MB', 'GB', 'TB']:
        if size_bytes < 1024.0:
            return f"{size_bytes:.1f} {unit}"
        size_bytes /= 1024.0
    return f"{size_bytes:.1f} PB"


def format_table(headers: Sequence[str], rows: List[Sequence[Any]]) -> str:
    """Plain fixed-width table; floats in short scientific notation"""
    def cell(value):
        if isinstance(value, bool):
            return 'PASS' if value else 'FAIL'
        if isinstance(value, (float, np.floating)):
            return f"{float(value):.3e}"
        return str(value)

    text = [[cell(v) for v in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in text:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    lines = ['  '.join(h.ljust(w) for h, w in zip(headers, widths)),
             '  '.join('-' * w for w in widths)]
    lines += ['  '.join(c.ljust(w) for c, w in zip(row, widths)) for row in text]
    return '\n'.join(lines)
