"""Abstract evolution system and the quantities built on it.

Both backends discretize the transformed dynamics on the reference interval
(0, 1) by dG(0) / implicit Euler:

    (Mass + nu*k*A) y_m = Mass y_{m-1} + nu*k * B u_m,   m = 1..M,

and the adjoint is the exact transpose recursion.  All derivatives exposed
here (control gradient and the derivative with respect to the horizon nu) are
therefore exact derivatives of the discrete problem.
"""

from abc import ABC, abstractmethod

import numpy as np

from .errors import ConfigError, DegenerateTarget, SolverFailure
from .grid import AdjointData, Control, StateTrajectory


def degeneracy_threshold(y_d_norm):
    """Misfit norms below this are treated as an exact hit of the target."""
    return 1e-12 * (1.0 + y_d_norm)


class EvolutionSystem(ABC):
    """Discrete-in-time linear evolution system with box-constrained control.

    Subclasses provide the state/adjoint solvers, the H inner product, and the
    pairing used for the horizon derivative.  Instances are immutable after
    construction and safe to share across threads.
    """

    #: state dimension
    n_state: int
    #: control DOF count
    n_controls: int
    #: per-DOF quadrature weights of the control measure space
    weights: np.ndarray
    #: target state (H coordinates)
    y_d: np.ndarray
    #: target-ball radius
    delta0: float
    #: initial state
    y0: np.ndarray
    #: control box bounds
    lower: np.ndarray
    upper: np.ndarray

    def _check_nontrivial(self):
        # The problem is void if the initial state already lies in the target
        # ball; reject such instances at construction.
        if self.h_norm(self.y0 - self.y_d) <= self.delta0:
            raise ConfigError(
                "initial state already lies inside the target ball "
                "(||y0 - y_d|| <= delta0)"
            )
        if self.delta0 <= 0:
            raise ConfigError("delta0 must be positive")

    # -- inner products -------------------------------------------------

    @abstractmethod
    def h_inner(self, a, b) -> float:
        """H inner product of two state vectors."""

    def h_norm(self, a) -> float:
        return float(np.sqrt(max(self.h_inner(a, a), 0.0)))

    # -- solvers ---------------------------------------------------------

    @abstractmethod
    def solve_state(self, nu, control: Control) -> StateTrajectory:
        """March the implicit Euler recursion forward for horizon nu."""

    @abstractmethod
    def solve_adjoint(self, nu, grid, terminal_misfit) -> AdjointData:
        """Solve the transpose recursion backward from the normalized misfit."""

    @abstractmethod
    def hamiltonian_pairing(self, nu, control, state, adjoint) -> float:
        """Discrete integral of <B u - A y, p> over (0, 1).

        This equals the exact derivative of the discrete distance with
        respect to nu at fixed control.
        """

    # -- helpers -----------------------------------------------------------

    def midpoint_control(self, grid):
        return Control.midpoint(grid, self.lower, self.upper)

    def normalized_misfit(self, terminal_misfit):
        """Return (misfit_norm, misfit / misfit_norm), guarding degeneracy."""
        terminal_misfit = np.asarray(terminal_misfit, dtype=float)
        norm = self.h_norm(terminal_misfit)
        if norm < degeneracy_threshold(self.h_norm(self.y_d)):
            raise DegenerateTarget(
                "terminal state coincides with the target; the adjoint "
                "terminal value is undefined"
            )
        return norm, terminal_misfit / norm


def distance_value(system: EvolutionSystem, nu: float, u: Control) -> float:
    """Terminal misfit norm minus the target radius, f(nu, u)."""
    y = system.solve_state(nu, u)
    terminal = y.terminal
    if not np.all(np.isfinite(terminal)):
        raise SolverFailure("state solve produced nonfinite values")
    return system.h_norm(terminal - system.y_d) - system.delta0


def adjoint_sensitivity(system: EvolutionSystem, nu: float, u: Control):
    """State and adjoint at (nu, u); raises DegenerateTarget on an exact hit."""
    y = system.solve_state(nu, u)
    adj = system.solve_adjoint(nu, u.grid, y.terminal - system.y_d)
    return y, adj


def hamiltonian_integral(system, nu, u, y, p) -> float:
    """Derivative of the discrete distance with respect to nu at fixed control.

    Evaluated at a distance-optimal control this is the derivative of the
    value function at nu.
    """
    return system.hamiltonian_pairing(nu, u, y, p)
