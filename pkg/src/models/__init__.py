#!/usr/bin/env python3
"""
State models for the surfactant simulator
"""

from .state import FlowState, ForcingPack, BudgetSample, CSV_COLUMNS
from .state_store import StateStore, StoredState, StateStoreError

__all__ = [
    'FlowState',
    'ForcingPack',
    'BudgetSample',
    'CSV_COLUMNS',
    'StateStore',
    'StoredState',
    'StateStoreError',
]
