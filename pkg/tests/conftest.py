# Surfactant simulator - Test Configuration
# Pytest configuration and fixtures

import os
import shutil
import sys
import tempfile

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from config import Config
from src.numerics.spectral import GridSpec
from src.numerics.tension import TensionModel

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def test_config():
    """Create a test configuration (console logging only, default guards)."""
    config = Config()

    # Override with test settings
    config.SIM_THREADS = 1
    config.LOG_LEVEL = 'ERROR'
    config.LOG_DIR = ''
    config.LOG_JSON = False
    config.OUTPUT_DIR = ''
    config.SLOPE_HARD_LIMIT = 1.0
    config.SLOPE_WARN_LIMIT = 0.5
    config.J_ABORT_LIMIT = 0.1
    config.J_WARN_LIMIT = 0.5

    return config


@pytest.fixture(scope="session")
def small_grid():
    """8 x 8 x 8 box, the cheapest grid the schema accepts."""
    return GridSpec(L1=TWO_PI, L2=TWO_PI, N1=8, N2=8, Nz=8, b=1.0)


@pytest.fixture(scope="session")
def grid16():
    """16 x 16 x 12 box."""
    return GridSpec(L1=TWO_PI, L2=TWO_PI, N1=16, N2=16, Nz=12, b=1.0)


@pytest.fixture(scope="session")
def grid32():
    """32 x 32 surface grid with a deep Chebyshev column."""
    return GridSpec(L1=TWO_PI, L2=TWO_PI, N1=32, N2=32, Nz=16, b=1.0)


@pytest.fixture(scope="session")
def linear_model():
    """Linear tension sigma = 1 - x/4 frozen at c0 = 1."""
    return TensionModel(kind='linear', sigma_s=1.0, beta=0.25).with_c0(1.0)


@pytest.fixture(scope="session")
def exponential_model():
    """Exponential tension sigma = exp(-x/2) frozen at c0 = 1."""
    return TensionModel(kind='exponential', sigma_s=1.0, beta=0.5).with_c0(1.0)


@pytest.fixture(scope="function")
def temp_dir():
    """Create a temporary directory for test files."""
    temp_path = tempfile.mkdtemp()
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture(scope="function")
def rng():
    """Seeded random generator."""
    return np.random.default_rng(20240607)


@pytest.fixture(scope="function")
def run_config_data():
    """Minimal valid run configuration: a small wave on the 8^3 grid."""
    return {
        'schema_version': 1,
        'name': 'tiny_wave',
        'seed': 3,
        'grid': {'L1': TWO_PI, 'L2': TWO_PI, 'b': 1.0, 'N1': 8, 'N2': 8, 'Nz': 8},
        'physics': {'gamma': 1.0, 'tension': {'kind': 'linear', 'sigma_s': 1.0, 'beta': 0.25}},
        'initial': {
            'eta': {'modes': [{'amplitude': 0.01, 'phase': 0.0, 'n1': 1, 'n2': 0}]},
            'ctilde': {'kind': 'uniform', 'value': 1.0},
            'u0': 'zero',
        },
        'stepping': {'dt': 0.01, 't_end': 0.06, 'scheme': 'imex1', 'stride': 1},
        'output': {'formats': ['csv', 'json']},
    }
