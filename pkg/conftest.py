"""
Shared fixtures for the test suite.
"""

import numpy as np
import pytest

from data.settings_data_storage import SolverSettings, default_settings
from data.state_data_storage import HermitianOp, MultiState, bipartite
from states import max_entangled


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: cone-program sweeps over three copies or large seeded corpora')


@pytest.fixture
def settings() -> SolverSettings:
    return default_settings()


@pytest.fixture
def phi2() -> MultiState:
    return max_entangled(2)


@pytest.fixture
def phi3() -> MultiState:
    return max_entangled(3)


@pytest.fixture
def classical_pair() -> MultiState:
    """
    (|00⟩⟨00| + |11⟩⟨11|)/2, separable and perfectly correlated.
    """
    return MultiState(bipartite(2, 2), HermitianOp(np.diag([0.5, 0.0, 0.0, 0.5])))


@pytest.fixture
def phi_minus() -> MultiState:
    vector = np.array([1.0, 0.0, 0.0, -1.0]) / np.sqrt(2)
    return MultiState(bipartite(2, 2), HermitianOp(np.outer(vector, vector)))
