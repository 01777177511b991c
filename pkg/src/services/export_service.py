#!/usr/bin/env python3
"""
Export Service for the surfactant simulator
Physical-domain mesh export and state dump inspection
"""

import logging
import os
from typing import Any, Dict, Optional

import numpy as np

from ..models.state_store import StateStore, StateStoreError
from ..numerics.errors import NumericalAbort
from ..numerics.geometry import build_geometry_pack, theta
from ..utils.helpers import file_hash, format_file_size
from ..utils.logging_config import log_error


class ExportService:
    """Reads state dumps and writes derived artifacts"""

    def __init__(self, config=None, store: Optional[StateStore] = None):
        self.config = config
        self.store = store or StateStore(config)
        self.logger = logging.getLogger(__name__)

    def export_theta(self, dump_path: str, out_path: Optional[str] = None) -> Dict[str, Any]:
        """Write the mesh y = Theta(x) and the velocity carried to it as an .npz archive

        The velocity at y = Theta(x) is u(x), so v_i are the nodal values of u_i.
        """
        out_path = out_path or os.path.splitext(dump_path)[0] + '_theta.npz'
        try:
            stored = self.store.load(dump_path)
            state = stored.state
            pack = build_geometry_pack(state.eta)
            y1, y2, y3 = theta(pack)
            v1, v2, v3 = (ui.values for ui in state.u)
            directory = os.path.dirname(os.path.abspath(out_path))
            os.makedirs(directory, exist_ok=True)
            np.savez(out_path, y1=y1, y2=y2, y3=y3, v1=v1, v2=v2, v3=v3,
                     t=np.float64(state.t), step=np.int64(state.step))
        except (StateStoreError, NumericalAbort, OSError) as e:
            log_error(self.logger, e, {'dump': dump_path, 'out': out_path})
            return {'success': False, 'error': str(e)}

        self.logger.info(f"Theta mesh exported: {out_path} (t={state.t:.6g})")
        return {'success': True, 'file_path': out_path, 'shape': list(y1.shape), 't': state.t}

    def info(self, dump_path: str) -> Dict[str, Any]:
        """Header summary of a dump without decoding the payload"""
        try:
            header = self.store.read_header(dump_path)
        except StateStoreError as e:
            log_error(self.logger, e, {'dump': dump_path})
            return {'success': False, 'error': str(e)}

        return {
            'success': True,
            'file_path': dump_path,
            'size': format_file_size(os.path.getsize(dump_path)),
            'sha256': file_hash(dump_path),
            'grid': header['grid'],
            'model': header['model'],
            'c0': header['model'].get('c0'),
            'gamma': header['gamma'],
            't': header['t'],
            'step': header['step'],
            'previous': header.get('previous'),
            'arrays': [entry['name'] for entry in header['arrays']],
            'extra': header.get('extra', {}),
        }
