import numpy as np
import pytest

from topt import Control, NoSignChange, TimeGrid, pendulum_preset
from topt.oracles import (
    expm_trajectory,
    fd_derivative,
    golden_section,
    grid_bisection_root,
)


class TestExpmTrajectory:
    def setup_method(self):
        self.system = pendulum_preset()
        self.grid = TimeGrid(16)
        self.zero = Control.midpoint(self.grid, lower=[-1.0], upper=[1.0])

    def test_full_rotation_returns_initial_state(self):
        y = expm_trajectory(self.system.A, self.system.B, self.system.y0,
                            2.0 * np.pi, self.zero)
        assert np.allclose(y, self.system.y0, atol=1e-12)

    def test_quarter_rotation(self):
        # d/ds y = -A y rotates clockwise for this skew matrix
        y = expm_trajectory(self.system.A, self.system.B, self.system.y0,
                            np.pi / 2.0, self.zero)
        R = np.array([[0.0, 1.0], [-1.0, 0.0]])  # rotation by -pi/2
        assert np.allclose(y, R @ self.system.y0, atol=1e-12)

    def test_zero_dynamics_integrates_control(self):
        A = np.zeros((2, 2))
        B = np.array([[1.0], [2.0]])
        g = TimeGrid(1)
        u = Control(g, np.array([[0.7]]), lower=[-1.0], upper=[1.0])
        y = expm_trajectory(A, B, np.array([1.0, -1.0]), 3.0, u)
        assert np.allclose(y, [1.0 + 3.0 * 0.7, -1.0 + 6.0 * 0.7], atol=1e-12)


class TestScalarOracles:
    def test_fd_derivative_cubic(self):
        f = lambda x: x ** 3 - 2.0 * x
        assert abs(fd_derivative(f, 1.5, h=1e-6) - (3 * 1.5 ** 2 - 2.0)) < 1e-8

    def test_golden_section_parabola(self):
        assert abs(golden_section(lambda x: (x - 0.37) ** 2, -1.0, 2.0) - 0.37) < 1e-8

    def test_grid_bisection_linear(self):
        root = grid_bisection_root(lambda nu: 2.0 - nu, 0.0, 5.0, 0.5)
        assert abs(root - 2.0) < 1e-6

    def test_grid_bisection_level(self):
        root = grid_bisection_root(lambda nu: np.exp(-nu), 0.0, 5.0, 0.25,
                                   level=0.5)
        assert abs(root - np.log(2.0)) < 1e-6

    def test_grid_bisection_no_crossing(self):
        with pytest.raises(NoSignChange):
            grid_bisection_root(lambda nu: 1.0 + nu, 0.0, 2.0, 0.5)
