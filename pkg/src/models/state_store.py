#!/usr/bin/env python3
"""
Binary state dumps for restarts, abort snapshots and export
Container: magic, header length, JSON header, raw little-endian payloads
"""

import json
import logging
import os
import struct
import tempfile
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from ..numerics.errors import SimulationError
from ..numerics.spectral import GridSpec
from ..numerics.tension import TensionModel
from .state import FlowState

MAGIC = b'SFS1'
FORMAT_VERSION = 1
PREVIOUS_PREFIX = 'prev_'
_DTYPES = {'complex128': '<c16', 'float64': '<f8'}


class StateStoreError(SimulationError):
    """A state dump could not be written or read"""


@dataclass
class StoredState:
    """Contents of a dump: the state, its run context and the optional multistep history"""
    state: FlowState
    model: TensionModel
    gamma: float
    previous: Optional[FlowState] = None
    header: Dict[str, Any] = field(default_factory=dict)

    @property
    def grid(self) -> GridSpec:
        return self.state.grid


class StateStore:
    """Reads and writes state dumps; writes are atomic per file"""

    def __init__(self, config=None):
        self.config = config
        self.logger = logging.getLogger(__name__)
        self._lock = threading.Lock()

    @contextmanager
    def _atomic(self, path: str):
        """Write to a temporary file in the target directory and move it into place"""
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix='.dump-', dir=directory)
        try:
            with os.fdopen(fd, 'wb') as handle:
                yield handle
            os.replace(tmp, path)
        except Exception:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise

    def save(self, path: str, state: FlowState, model: TensionModel, gamma: float,
             previous: Optional[FlowState] = None, extra: Optional[Dict[str, Any]] = None) -> str:
        """Dump the state (and the previous state of a multistep scheme) to path"""
        arrays = dict(state.arrays())
        if previous is not None:
            arrays.update({PREVIOUS_PREFIX + name: a for name, a in previous.arrays().items()})

        table, payloads, offset = [], [], 0
        for name, array in arrays.items():
            kind = 'complex128' if np.iscomplexobj(array) else 'float64'
            data = np.ascontiguousarray(array, dtype=_DTYPES[kind]).tobytes()
            table.append({'name': name, 'dtype': kind, 'shape': list(array.shape),
                          'offset': offset, 'nbytes': len(data)})
            payloads.append(data)
            offset += len(data)

        header = {
            'format': MAGIC.decode('ascii'),
            'version': FORMAT_VERSION,
            'byte_order': 'little',
            'grid': state.grid.to_dict(),
            'model': model.to_dict(),
            'gamma': float(gamma),
            't': float(state.t),
            'step': int(state.step),
            'previous': None if previous is None else {'t': float(previous.t), 'step': int(previous.step)},
            'arrays': table,
            'extra': extra or {},
        }
        encoded = json.dumps(header, sort_keys=True).encode('utf-8')
        try:
            with self._lock, self._atomic(path) as handle:
                handle.write(MAGIC)
                handle.write(struct.pack('<Q', len(encoded)))
                handle.write(encoded)
                for data in payloads:
                    handle.write(data)
        except OSError as e:
            raise StateStoreError(f"cannot write state dump {path}: {e}", context={'path': path}) from e
        self.logger.info("State dump written: %s (t=%.6g, step=%d)", path, state.t, state.step)
        return path

    def _read(self, path: str):
        try:
            with open(path, 'rb') as handle:
                blob = handle.read()
        except OSError as e:
            raise StateStoreError(f"cannot read state dump {path}: {e}", context={'path': path}) from e
        if blob[:4] != MAGIC:
            raise StateStoreError(f"{path} is not a state dump", context={'path': path})
        (length,) = struct.unpack('<Q', blob[4:12])
        try:
            header = json.loads(blob[12:12 + length].decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise StateStoreError(f"corrupt header in {path}", context={'path': path}) from e
        if header.get('version') != FORMAT_VERSION:
            raise StateStoreError(f"unsupported dump version {header.get('version')}",
                                  context={'path': path})
        return header, blob[12 + length:]

    def read_header(self, path: str) -> Dict[str, Any]:
        return self._read(path)[0]

    def load(self, path: str) -> StoredState:
        header, payload = self._read(path)
        arrays = {}
        for entry in header['arrays']:
            start = entry['offset']
            chunk = payload[start:start + entry['nbytes']]
            if len(chunk) != entry['nbytes']:
                raise StateStoreError(f"truncated payload for '{entry['name']}'", context={'path': path})
            dtype = np.dtype(_DTYPES[entry['dtype']])
            arrays[entry['name']] = np.frombuffer(chunk, dtype=dtype).reshape(entry['shape']).copy()

        grid = GridSpec(**header['grid'])
        state = FlowState.from_arrays(grid, arrays, header['t'], header['step'])
        previous = None
        if header.get('previous'):
            prev_arrays = {name[len(PREVIOUS_PREFIX):]: a for name, a in arrays.items()
                           if name.startswith(PREVIOUS_PREFIX)}
            previous = FlowState.from_arrays(grid, prev_arrays, header['previous']['t'],
                                             header['previous']['step'])
        self.logger.debug("State dump loaded: %s", path)
        return StoredState(state=state, model=TensionModel.from_dict(header['model']),
                           gamma=float(header['gamma']), previous=previous, header=header)
