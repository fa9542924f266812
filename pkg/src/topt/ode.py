"""Dense linear ODE backend: d/dt y + A y = B u with small dense A.

The implicit Euler recursion is diagonalized once per horizon so that the
whole time march runs as a set of scalar linear recurrences (an IIR filter);
for a non-diagonalizable or ill-conditioned step matrix a plain loop is used.
"""

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, SolverFailure
from .grid import AdjointData, Control, StateTrajectory, TimeGrid
from .system import EvolutionSystem

#: Exact optimal horizon of the linearized-pendulum benchmark.
PENDULUM_OPTIMAL_TIME = 11.0 * np.pi / 6.0

# Condition-number cutoff for the eigenvector basis of the step matrix;
# above it the diagonalized fast path is not trustworthy.
_EIG_COND_MAX = 1e8


class DenseLinearSystem(EvolutionSystem):
    """Evolution system backed by dense matrices A (n x n) and B (n x n_c).

    The H inner product is the Euclidean one and the control measure is the
    counting measure (unit weights).
    """

    def __init__(self, A, B, y0, y_d, delta0, lower, upper):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.y0 = np.asarray(y0, dtype=float)
        self.y_d = np.asarray(y_d, dtype=float)
        self.delta0 = float(delta0)
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))

        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ConfigError("A must be square")
        if self.B.shape[0] != n:
            raise ConfigError("B must have as many rows as A")
        if self.y0.shape != (n,) or self.y_d.shape != (n,):
            raise ConfigError("y0 and y_d must match the state dimension")
        self.n_state = n
        self.n_controls = self.B.shape[1]
        if self.lower.shape != (self.n_controls,) or self.upper.shape != (self.n_controls,):
            raise ConfigError("bounds must match the control dimension")
        self.weights = np.ones(self.n_controls)
        self._check_nontrivial()

    def h_inner(self, a, b):
        return float(np.dot(a, b))

    # -- step operators ---------------------------------------------------

    def _step_matrix(self, nu, k):
        E = np.eye(self.n_state) + nu * k * self.A
        if abs(np.linalg.det(E)) < 1e-300:
            raise SolverFailure("singular implicit Euler matrix I + nu*k*A")
        return np.linalg.inv(E)

    @staticmethod
    def _diagonalize(P):
        d, V = np.linalg.eig(P)
        if np.linalg.cond(V) > _EIG_COND_MAX:
            return None
        return d, V, np.linalg.inv(V)

    @staticmethod
    def _filter_recursion(d, z0, w):
        """All rows of z_m = diag(d) z_{m-1} + w_m, m = 1..M, as IIR filters."""
        M, n = w.shape
        z = np.empty((M, n), dtype=complex)
        for j in range(n):
            zj, _ = lfilter([1.0], [1.0, -d[j]], w[:, j], zi=np.array([d[j] * z0[j]]))
            z[:, j] = zj
        return z

    def solve_state(self, nu, control: Control) -> StateTrajectory:
        if nu <= 0:
            raise ConfigError("horizon nu must be positive")
        grid = control.grid
        M, k = grid.intervals, grid.step
        P = self._step_matrix(nu, k)
        q = (nu * k) * (control.values @ self.B.T) @ P.T  # q_m = nu*k*P B u_m

        states = np.empty((M + 1, self.n_state))
        states[0] = self.y0
        eig = self._diagonalize(P)
        if eig is not None:
            d, V, Vinv = eig
            z = self._filter_recursion(d, Vinv @ self.y0.astype(complex), q @ Vinv.T)
            states[1:] = np.real(z @ V.T)
        else:
            y = self.y0.copy()
            for m in range(M):
                y = P @ y + q[m]
                states[m + 1] = y
        if not np.all(np.isfinite(states)):
            raise SolverFailure("state solve produced nonfinite values")
        return StateTrajectory(grid, states)

    def solve_adjoint(self, nu, grid: TimeGrid, terminal_misfit) -> AdjointData:
        if nu <= 0:
            raise ConfigError("horizon nu must be positive")
        M, k = grid.intervals, grid.step
        misfit_norm, phat = self.normalized_misfit(terminal_misfit)
        PT = self._step_matrix(nu, k).T

        # p_m = (P^T)^(M-m+1) phat for m = 1..M (homogeneous transpose sweep)
        p_stages = np.empty((M, self.n_state))
        eig = self._diagonalize(PT)
        if eig is not None:
            d, V, Vinv = eig
            z = Vinv @ phat.astype(complex)
            powers = np.cumprod(np.tile(d, (M, 1)), axis=0)  # d^1 .. d^M
            p_stages[:] = np.real((powers[::-1] * z) @ V.T)
        else:
            p = phat.copy()
            for m in range(M, 0, -1):
                p = PT @ p
                p_stages[m - 1] = p
        bstar_p = p_stages @ self.B  # unit weights
        return AdjointData(grid, bstar_p, np.asarray(terminal_misfit, dtype=float),
                           misfit_norm, p_stages=p_stages)

    def hamiltonian_pairing(self, nu, control, state, adjoint) -> float:
        k = control.grid.step
        Bu = control.values @ self.B.T
        Ay = state.states[1:] @ self.A.T
        return float(k * np.sum((Bu - Ay) * adjoint.p_stages))


def pendulum_preset() -> DenseLinearSystem:
    """Linearized pendulum benchmark (harmonic oscillator with forcing).

    Rotation dynamics with bang-bang optimal control; the analytic optimal
    horizon is ``PENDULUM_OPTIMAL_TIME``.
    """
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    r = np.sqrt(17.0)
    theta0 = np.arcsin(1.0 / r)
    phi = np.pi / 3.0 - theta0
    y0 = -r * np.array([np.cos(phi), np.sin(phi)]) + np.array([1.0, 0.0])
    return DenseLinearSystem(A, B, y0=y0, y_d=np.zeros(2), delta0=1e-6,
                             lower=[-1.0], upper=[1.0])


def pendulum_exact_control(t):
    """Analytic optimal control of the pendulum benchmark in physical time."""
    if t <= np.pi / 3.0:
        return 1.0
    if t <= 4.0 * np.pi / 3.0:
        return -1.0
    return 1.0


def pendulum_exact_control_sampled(grid: TimeGrid, nu) -> Control:
    """Analytic optimal control sampled at interval midpoints on the
    reference grid for horizon nu."""
    return Control.from_sampler(grid, lambda s: pendulum_exact_control(nu * s),
                                lower=[-1.0], upper=[1.0])
