"""Time grid and control/state/adjoint containers on the reference interval (0, 1)."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant grid with M intervals on (0, 1); step k = 1/M."""

    intervals: int

    def __post_init__(self):
        if self.intervals < 1:
            raise ConfigError(f"need at least one time interval, got {self.intervals}")

    @property
    def step(self):
        return 1.0 / self.intervals

    def nodes(self):
        return np.linspace(0.0, 1.0, self.intervals + 1)

    def midpoints(self):
        k = self.step
        return k * (np.arange(self.intervals) + 0.5)


@dataclass
class Control:
    """Piecewise-constant-in-time control on a time grid.

    ``values[m, j]`` is the value on interval m for control DOF j, subject to
    the box constraints ``lower[j] <= values[m, j] <= upper[j]``.
    """

    grid: TimeGrid
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        M = self.grid.intervals
        if self.values.shape != (M, self.lower.size):
            raise ConfigError(
                f"control values have shape {self.values.shape}, "
                f"expected {(M, self.lower.size)}"
            )
        if not np.all(self.lower < self.upper):
            raise ConfigError("control bounds must satisfy lower < upper componentwise")

    @property
    def n_controls(self):
        return self.lower.size

    def is_feasible(self, tol=0.0):
        return bool(
            np.all(self.values >= self.lower - tol)
            and np.all(self.values <= self.upper + tol)
        )

    def replaced(self, values):
        return Control(self.grid, values, self.lower, self.upper)

    @staticmethod
    def midpoint(grid, lower, upper):
        """Feasible default control: the center of the box on every interval."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        mid = 0.5 * (lower + upper)
        values = np.tile(mid, (grid.intervals, 1))
        return Control(grid, values, lower, upper)

    @staticmethod
    def from_sampler(grid, sampler, lower, upper):
        """Sample a time-dependent control law at interval midpoints.

        ``sampler(t)`` must return the control vector at reference time t.
        """
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        values = np.array([np.atleast_1d(sampler(t)) for t in grid.midpoints()], dtype=float)
        return Control(grid, values, lower, upper)


@dataclass
class StateTrajectory:
    """Nodal state values; ``states[m]`` is the dG(0) value on interval m (m >= 1),
    ``states[0]`` the initial state."""

    grid: TimeGrid
    states: np.ndarray

    @property
    def terminal(self):
        return self.states[self.grid.intervals]


@dataclass
class AdjointData:
    """Adjoint solve output in control space.

    ``bstar_p[m, j]`` is the adjoint's control-space shadow on interval m for
    DOF j, scaled so that the gradient of ``u -> ||y(1) - y_d||`` with respect
    to ``values[m, j]`` is ``nu * k * w_j * bstar_p[m, j]``.
    """

    grid: TimeGrid
    bstar_p: np.ndarray
    terminal_misfit: np.ndarray
    misfit_norm: float
    # Stage values p_m (row m-1) of the discrete adjoint, kept for the exact
    # derivative of the discrete problem with respect to the time horizon.
    p_stages: np.ndarray = field(repr=False, default=None)
