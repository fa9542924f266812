import numpy as np
import pytest

from topt import DenseLinearSystem, TimeGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def grid():
    return TimeGrid(40)


@pytest.fixture
def small_system():
    """Damped 3-state system with 2 controls, asymmetric bounds."""
    A = np.array([
        [0.5, -1.0, 0.0],
        [1.0, 0.5, -0.3],
        [0.0, 0.3, 0.8],
    ])
    B = np.array([
        [1.0, 0.0],
        [0.0, 1.0],
        [0.5, -0.5],
    ])
    y0 = np.array([2.0, -1.0, 0.5])
    y_d = np.array([0.2, 0.1, -0.1])
    return DenseLinearSystem(A, B, y0=y0, y_d=y_d, delta0=0.05,
                             lower=[-1.0, -2.0], upper=[1.5, 0.5])
