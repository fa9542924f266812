"""P1 finite element backend for the 2-D heat equation on the unit square.

Supports homogeneous Dirichlet conditions with distributed control on an
interior subdomain, and natural (Neumann) conditions with edge-wise constant
boundary control.  Uniform criss-cross-free mesh: every square cell is split
along the lower-left to upper-right diagonal.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cholesky_banded
from scipy.linalg.lapack import dpbtrs

from .errors import ConfigError, SolverFailure
from .grid import AdjointData, Control, StateTrajectory, TimeGrid
from .system import EvolutionSystem

DIFFUSIVITY = 0.03
TARGET_RADIUS = 0.1


@dataclass(frozen=True)
class UniformMesh:
    """Uniform triangulation of (0,1)^2 with n subdivisions per side."""

    n: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray

    @staticmethod
    def build(n):
        if n < 1:
            raise ConfigError("mesh needs at least one subdivision per side")
        xs = np.linspace(0.0, 1.0, n + 1)
        X, Y = np.meshgrid(xs, xs, indexing="xy")
        nodes = np.column_stack([X.ravel(), Y.ravel()])

        def idx(i, j):
            return j * (n + 1) + i

        tris = []
        for j in range(n):
            for i in range(n):
                a, b = idx(i, j), idx(i + 1, j)
                c, d = idx(i + 1, j + 1), idx(i, j + 1)
                tris.append((a, b, c))
                tris.append((a, c, d))
        edges = []
        for i in range(n):  # bottom
            edges.append((idx(i, 0), idx(i + 1, 0)))
        for j in range(n):  # right
            edges.append((idx(n, j), idx(n, j + 1)))
        for i in range(n):  # top
            edges.append((idx(n - i, n), idx(n - i - 1, n)))
        for j in range(n):  # left
            edges.append((idx(0, n - j), idx(0, n - j - 1)))
        return UniformMesh(n, nodes, np.array(tris, dtype=int),
                           np.array(edges, dtype=int))

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    def interior_mask(self):
        x, y = self.nodes[:, 0], self.nodes[:, 1]
        return (x > 0) & (x < 1) & (y > 0) & (y < 1)

    def triangle_areas(self):
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def assemble_p1(mesh: UniformMesh):
    """Consistent P1 mass and stiffness matrices on all nodes (CSR)."""
    tris = mesh.triangles
    p = mesh.nodes[tris]  # (nt, 3, 2)
    areas = mesh.triangle_areas()

    # gradients of the barycentric basis functions
    e_opp = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]  # edge opposite each vertex
    grads = np.stack([-e_opp[..., 1], e_opp[..., 0]], axis=-1)
    grads /= (2.0 * areas)[:, None, None]

    K_loc = np.einsum("tid,tjd->tij", grads, grads) * areas[:, None, None]
    M_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    M_loc = areas[:, None, None] * M_ref[None]

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    N = mesh.n_nodes
    K = sp.coo_matrix((K_loc.ravel(), (rows, cols)), shape=(N, N)).tocsr()
    M = sp.coo_matrix((M_loc.ravel(), (rows, cols)), shape=(N, N)).tocsr()
    return M, K


def initial_profile(x):
    return 4.0 * np.sin(np.pi * x[:, 0] ** 2) * np.sin(np.pi * x[:, 1]) ** 3


def pyramid_target(x):
    # pyramid over the unit square with peak value -2 at the center
    return -4.0 * np.minimum.reduce(
        [x[:, 0], 1.0 - x[:, 0], x[:, 1], 1.0 - x[:, 1]]
    )


class _BandedCholesky:
    """Cholesky factorization of a sparse SPD matrix in banded storage.

    The lexicographic node ordering of the uniform mesh keeps the bandwidth
    at n + 2, so the banded LAPACK kernels beat a general sparse solver."""

    def __init__(self, E):
        E = E.tocoo()
        n = E.shape[0]
        bandwidth = int(np.max(E.col - E.row)) if E.nnz else 0
        ab = np.zeros((bandwidth + 1, n))
        upper = E.row <= E.col
        ab[bandwidth + E.row[upper] - E.col[upper], E.col[upper]] = E.data[upper]
        self._factor = cholesky_banded(ab, lower=False)

    def solve(self, rhs):
        x, _ = dpbtrs(self._factor, rhs, lower=0)
        return x


class HeatSystem(EvolutionSystem):
    """Discrete heat equation (d/dt y - kappa * Laplace y = B u) on free DOFs."""

    def __init__(self, mesh, kappa, mass, stiffness, control_op, weights,
                 boundary_condition, y0, y_d, delta0, lower, upper):
        self.mesh = mesh
        self.kappa = float(kappa)
        self.mass = mass.tocsr()
        self.stiffness = stiffness.tocsr()
        self.control_op = control_op.tocsr()
        self.weights = np.asarray(weights, dtype=float)
        self.boundary_condition = boundary_condition
        self.y0 = np.asarray(y0, dtype=float)
        self.y_d = np.asarray(y_d, dtype=float)
        self.delta0 = float(delta0)
        n_c = self.control_op.shape[1]
        self.lower = np.full(n_c, float(lower)) if np.isscalar(lower) else np.asarray(lower, float)
        self.upper = np.full(n_c, float(upper)) if np.isscalar(upper) else np.asarray(upper, float)
        self.n_state = self.mass.shape[0]
        self.n_controls = n_c
        self._lu_key = None
        self._lu = None
        self._check_nontrivial()

    def h_inner(self, a, b):
        return float(np.dot(a, self.mass @ b))

    def _factorize(self, nu, k):
        # state and adjoint share the factorization of M + nu*k*kappa*K;
        # cache the last one so repeated solves at the same horizon reuse it
        key = nu * k * self.kappa
        if key == self._lu_key:
            return self._lu
        E = (self.mass + key * self.stiffness).tocoo()
        try:
            lu = _BandedCholesky(E)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - SPD pencil
            raise SolverFailure(f"banded factorization failed: {exc}") from exc
        self._lu_key, self._lu = key, lu
        return lu

    def solve_state(self, nu, control: Control) -> StateTrajectory:
        if nu <= 0:
            raise ConfigError("horizon nu must be positive")
        grid = control.grid
        M, k = grid.intervals, grid.step
        lu = self._factorize(nu, k)
        loads = (nu * k) * (self.control_op @ control.values.T)  # (n_state, M)
        states = np.empty((M + 1, self.n_state))
        states[0] = self.y0
        y = self.y0
        for m in range(M):
            y = lu.solve(self.mass @ y + loads[:, m])
            states[m + 1] = y
        if not np.all(np.isfinite(states)):
            raise SolverFailure("state solve produced nonfinite values")
        return StateTrajectory(grid, states)

    def solve_adjoint(self, nu, grid: TimeGrid, terminal_misfit) -> AdjointData:
        if nu <= 0:
            raise ConfigError("horizon nu must be positive")
        M, k = grid.intervals, grid.step
        misfit_norm, phat = self.normalized_misfit(terminal_misfit)
        lu = self._factorize(nu, k)
        p_stages = np.empty((M, self.n_state))
        p = lu.solve(self.mass @ phat)
        p_stages[M - 1] = p
        for m in range(M - 1, 0, -1):
            p = lu.solve(self.mass @ p)
            p_stages[m - 1] = p
        bstar_p = (self.control_op.T @ p_stages.T).T / self.weights
        return AdjointData(grid, bstar_p, np.asarray(terminal_misfit, dtype=float),
                           misfit_norm, p_stages=p_stages)

    def hamiltonian_pairing(self, nu, control, state, adjoint) -> float:
        k = control.grid.step
        Bu = (self.control_op @ control.values.T).T           # (M, n_state)
        Ay = self.kappa * (self.stiffness @ state.states[1:].T).T
        return float(k * np.sum((Bu - Ay) * adjoint.p_stages))


def heat_distributed_preset(n) -> HeatSystem:
    """Dirichlet heat equation with distributed control on (0.25, 0.75)^2.

    The control is element-wise constant on the triangles inside the control
    subdomain; n must be divisible by 4 so element boundaries resolve it.
    """
    if n < 4 or n % 4 != 0:
        raise ConfigError("heat-distributed preset needs n >= 4 divisible by 4")
    mesh = UniformMesh.build(n)
    M_full, K_full = assemble_p1(mesh)
    free = np.flatnonzero(mesh.interior_mask())
    Mf = M_full[np.ix_(free, free)]
    Kf = K_full[np.ix_(free, free)]

    bary = mesh.nodes[mesh.triangles].mean(axis=1)
    inside = np.flatnonzero(
        (bary[:, 0] > 0.25) & (bary[:, 0] < 0.75)
        & (bary[:, 1] > 0.25) & (bary[:, 1] < 0.75)
    )
    areas = mesh.triangle_areas()
    full_to_free = -np.ones(mesh.n_nodes, dtype=int)
    full_to_free[free] = np.arange(free.size)
    rows, cols, vals = [], [], []
    for j, t in enumerate(inside):
        for v in mesh.triangles[t]:
            fv = full_to_free[v]
            if fv >= 0:
                rows.append(fv)
                cols.append(j)
                vals.append(areas[t] / 3.0)
    control_op = sp.coo_matrix((vals, (rows, cols)),
                               shape=(free.size, inside.size))
    weights = areas[inside]

    y0 = initial_profile(mesh.nodes)[free]
    y_d = pyramid_target(mesh.nodes)[free]
    return HeatSystem(mesh, DIFFUSIVITY, Mf, Kf, control_op, weights,
                      "dirichlet", y0, y_d, TARGET_RADIUS, -5.0, 0.0)


def heat_neumann_preset(n) -> HeatSystem:
    """Neumann heat equation with edge-wise constant boundary control."""
    if n < 2:
        raise ConfigError("heat-neumann preset needs n >= 2")
    mesh = UniformMesh.build(n)
    M_full, K_full = assemble_p1(mesh)
    edges = mesh.boundary_edges
    n_edges = edges.shape[0]
    w = 1.0 / n  # every boundary edge has length 1/n
    rows = edges.ravel()
    cols = np.repeat(np.arange(n_edges), 2)
    vals = np.full(2 * n_edges, w / 2.0)
    control_op = sp.coo_matrix((vals, (rows, cols)),
                               shape=(mesh.n_nodes, n_edges))
    weights = np.full(n_edges, w)

    y0 = initial_profile(mesh.nodes)
    y_d = np.zeros(mesh.n_nodes)
    return HeatSystem(mesh, DIFFUSIVITY, M_full, K_full, control_op, weights,
                      "neumann", y0, y_d, TARGET_RADIUS, -5.0, 5.0)
