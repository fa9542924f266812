"""Conditional gradient solver for the fixed-horizon minimal-distance problem.

The standard iteration linearizes the terminal distance, minimizes over the
control box (bang-bang direction), and line-searches the connecting segment.
The accelerated variant instead minimizes over the convex hull of all cached
iterates: the coefficient problem on the probability simplex is solved with a
semi-smooth Newton method on Robinson's normal map.  Because the
control-to-terminal map is affine, the coefficient problem runs entirely on
cached terminal states (no evolution solves inside the Newton loop).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AccelerationFailure, DegenerateTarget
from .grid import Control
from .simplex import project_simplex
from .system import degeneracy_threshold


@dataclass
class CgOptions:
    """Tunables of the inner solver.

    ``tol_gap=None`` resolves to ``1e-9 * (1 + delta0)`` at solve time.
    """

    tol_gap: float = None
    max_iter: int = 5000
    accelerate: bool = True
    history_cap: int = 50
    prune_threshold: float = 1e-8
    ssn_c: float = 1.0
    ssn_tol: float = 1e-11
    ssn_max_iter: int = 100

    def resolved_tol(self, delta0):
        return self.tol_gap if self.tol_gap is not None else 1e-9 * (1.0 + delta0)


@dataclass
class HistoryAtom:
    """A cached iterate: control values and the associated terminal state."""

    values: np.ndarray
    terminal: np.ndarray


@dataclass
class DistanceSolution:
    """Result of one inner solve at fixed horizon nu."""

    nu: float
    control: Control
    misfit_norm: float
    delta: float
    gap: float
    iterations: int
    bstar_p: np.ndarray
    converged: bool = True
    aborted: bool = False
    log: list = field(default_factory=list)


def cg_direction(bstar_p, lower, upper):
    """Minimizer of the linearized objective over the control box.

    Bound values by the sign of the adjoint shadow; exact zeros get the box
    midpoint (no tolerance band, which would bias the bang-bang structure).
    """
    bstar_p = np.asarray(bstar_p)
    mid = 0.5 * (lower + upper)
    out = np.where(bstar_p > 0.0, lower, np.where(bstar_p < 0.0, upper, mid))
    return out


def exact_linesearch(a, b, inner=None):
    """Minimize ||a + lam*b|| over lam in [0, 1] in closed form."""
    if inner is None:
        inner = lambda x, y: float(np.dot(x, y))
    bb = inner(b, b)
    if bb <= 0.0:
        return 0.0
    return float(min(1.0, max(0.0, -inner(a, b) / bb)))


def duality_gap(nu, step, bstar_p, u_values, u_half_values, weights):
    """A posteriori suboptimality bound: derivative paired with u - u_half."""
    diff = u_values - u_half_values
    return float(nu * step * np.sum(weights * bstar_p * diff))


class _HullObjective:
    """Distance of a convex combination of cached terminals to the target,
    expressed through Gram data so evaluations cost O(m^2)."""

    def __init__(self, inner, y_d, delta0):
        self.inner = inner
        self.y_d = y_d
        self.delta0 = delta0
        self.c0 = inner(y_d, y_d)
        self.G = np.zeros((0, 0))
        self.b = np.zeros(0)
        self.terminals = []

    @property
    def size(self):
        return len(self.terminals)

    def add(self, terminal):
        m = self.size
        G = np.empty((m + 1, m + 1))
        G[:m, :m] = self.G
        for i, t in enumerate(self.terminals):
            G[i, m] = G[m, i] = self.inner(t, terminal)
        G[m, m] = self.inner(terminal, terminal)
        self.G = G
        self.b = np.append(self.b, self.inner(terminal, self.y_d))
        self.terminals.append(terminal)

    def restrict(self, keep):
        self.G = self.G[np.ix_(keep, keep)]
        self.b = self.b[keep]
        self.terminals = [self.terminals[i] for i in keep]

    def merge(self, i, j, a, b):
        """Replace terminal i by a*t_i + b*t_j and drop terminal j.

        All Gram data is updated algebraically, so a convex combination
        lam_i*t_i + lam_j*t_j with a = lam_i/(lam_i+lam_j) is represented
        exactly by the merged atom.
        """
        G = self.G
        row = a * G[i] + b * G[j]
        gii = a * a * G[i, i] + 2.0 * a * b * G[i, j] + b * b * G[j, j]
        G[i, :] = row
        G[:, i] = row
        G[i, i] = gii
        self.b[i] = a * self.b[i] + b * self.b[j]
        self.terminals[i] = a * self.terminals[i] + b * self.terminals[j]
        self.restrict(np.array([k for k in range(self.size) if k != j]))

    def residual_sq(self, lam):
        return float(lam @ self.G @ lam - 2.0 * self.b @ lam + self.c0)

    def value(self, lam):
        return float(np.sqrt(max(self.residual_sq(lam), 0.0))) - self.delta0

    def grad(self, lam):
        r = np.sqrt(max(self.residual_sq(lam), 0.0))
        if r < degeneracy_threshold(np.sqrt(self.c0)):
            raise DegenerateTarget("combination hits the target exactly")
        return (self.G @ lam - self.b) / r

    def hess(self, lam):
        r = np.sqrt(max(self.residual_sq(lam), 0.0))
        g = (self.G @ lam - self.b) / r
        return self.G / r - np.outer(g, g) / r


def _ssn_solve(hull, opts, lam0):
    """Semi-smooth Newton on G(eta) = c*(eta - P(eta)) + grad_h(P(eta)).

    The Newton matrix can be singular when cached terminals are affinely
    dependent, so the step is computed by least squares and accepted only if
    a backtracked fraction of it reduces the residual norm; a persistent
    stall raises AccelerationFailure and the caller falls back to an exact
    coefficient solve.
    """
    c = opts.ssn_c
    eta = lam0 - hull.grad(lam0) / c
    m = eta.size
    proj = project_simplex(eta)
    lam = proj.point
    res = c * (eta - lam) + hull.grad(lam)
    res_norm = np.linalg.norm(res)
    for _ in range(opts.ssn_max_iter):
        if res_norm <= opts.ssn_tol:
            return lam
        D = proj.derivative_matrix()
        J = c * (np.eye(m) - D) + hull.hess(lam) @ D
        step = np.linalg.lstsq(J, res, rcond=1e-12)[0]
        if not np.all(np.isfinite(step)):
            raise AccelerationFailure("semi-smooth Newton step became nonfinite")
        alpha = 1.0
        accepted = False
        for _ in range(40):
            eta_try = eta - alpha * step
            proj_try = project_simplex(eta_try)
            lam_try = proj_try.point
            res_try = c * (eta_try - lam_try) + hull.grad(lam_try)
            res_try_norm = np.linalg.norm(res_try)
            if res_try_norm < (1.0 - 1e-4 * alpha) * res_norm:
                eta, proj, lam = eta_try, proj_try, lam_try
                res, res_norm = res_try, res_try_norm
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            raise AccelerationFailure(
                f"semi-smooth Newton stalled at residual {res_norm:.3e}"
            )
    raise AccelerationFailure(
        f"semi-smooth Newton did not reach tol {opts.ssn_tol} "
        f"in {opts.ssn_max_iter} iterations"
    )


def _active_set_qp(G, b, lam0, tol=1e-13, max_pivots=500):
    """Minimize 0.5*lam'G lam - b'lam over the probability simplex.

    Primal active-set method on the (tinily ridge-regularized) quadratic;
    used as a deterministic fallback when the semi-smooth Newton solver
    stalls on a rank-deficient Gram matrix.
    """
    m = b.size
    # ridge relative to the Gram scale; an absolute floor would distort the
    # solve when the cached terminals are all close to the target
    eps = 1e-12 * float(np.max(np.diag(G))) + 1e-300
    G = G + eps * np.eye(m)
    lam = np.maximum(np.asarray(lam0, dtype=float), 0.0)
    total = lam.sum()
    lam = lam / total if total > 0.0 else np.full(m, 1.0 / m)
    free = lam > 0.0
    for _ in range(max_pivots):
        idx = np.flatnonzero(free)
        nf = idx.size
        # equality-constrained subproblem on the free coordinates
        K = np.zeros((nf + 1, nf + 1))
        K[:nf, :nf] = G[np.ix_(idx, idx)]
        K[:nf, nf] = 1.0
        K[nf, :nf] = 1.0
        rhs = np.append(b[idx], 1.0)
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        x, mu = sol[:nf], sol[nf]
        if np.all(x >= -tol):
            lam = np.zeros(m)
            lam[idx] = np.maximum(x, 0.0)
            lam /= lam.sum()
            slack = (G @ lam - b) + mu
            slack[free] = 0.0
            if np.min(slack) >= -1e-11 * (1.0 + abs(mu)):
                return lam
            free = free.copy()
            free[int(np.argmin(slack))] = True
        else:
            # walk toward the subproblem solution until a coordinate hits zero
            x_full = np.zeros(m)
            x_full[idx] = x
            negative = idx[x < -tol]
            ratios = lam[negative] / (lam[negative] - x_full[negative])
            shortest = int(np.argmin(ratios))
            lam = np.maximum(lam + float(ratios[shortest]) * (x_full - lam), 0.0)
            lam /= lam.sum()
            free = free.copy()
            free[negative[shortest]] = False
    raise AccelerationFailure("active-set coefficient solve did not terminate")


def ssn_combination(terminals, y_d, delta0, opts: CgOptions, inner=None, lam0=None):
    """Best convex combination of terminal states: coefficients on the simplex.

    Returns the optimal coefficient vector.  ``inner`` defaults to the
    Euclidean inner product; pass the system's H inner product otherwise.
    """
    if inner is None:
        inner = lambda x, y: float(np.dot(x, y))
    hull = _HullObjective(inner, np.asarray(y_d, dtype=float), delta0)
    for t in terminals:
        hull.add(np.asarray(t, dtype=float))
    m = hull.size
    if lam0 is None:
        lam0 = np.full(m, 1.0 / m)
    lam0 = np.asarray(lam0, dtype=float)
    try:
        return _ssn_solve(hull, opts, lam0)
    except (AccelerationFailure, DegenerateTarget):
        return _active_set_qp(hull.G, hull.b, lam0)


def cg_solve(system, nu, u0: Control, opts: CgOptions = None,
             abort_below=None) -> DistanceSolution:
    """Minimize the terminal distance over the admissible controls at fixed nu.

    Terminates when the duality gap drops below the tolerance.  With
    ``abort_below`` set, the solve stops early once the objective falls below
    that value (used by the damped outer Newton method to detect an
    over-long horizon without solving to full accuracy).
    """
    opts = opts or CgOptions()
    tol_gap = opts.resolved_tol(system.delta0)
    grid = u0.grid
    k = grid.step
    w = system.weights

    if not u0.is_feasible(tol=1e-14):
        raise ValueError("initial control violates the box constraints")

    hull = _HullObjective(system.h_inner, system.y_d, system.delta0)
    atoms = [HistoryAtom(u0.values.copy(), system.solve_state(nu, u0).terminal)]
    hull.add(atoms[0].terminal)
    lam = np.array([1.0])
    u_vals = atoms[0].values.copy()
    t = atoms[0].terminal.copy()

    log = []
    gap = np.inf
    adj = None
    converged = False
    aborted = False
    iterations = 0
    f_prev = np.inf
    stall_count = 0
    misfit_norm = system.h_norm(t - system.y_d)
    bstar_p = np.zeros((grid.intervals, system.n_controls))
    degenerate_floor = degeneracy_threshold(system.h_norm(system.y_d))

    for it in range(opts.max_iter + 1):
        misfit = t - system.y_d
        misfit_norm = system.h_norm(misfit)
        if misfit_norm < degenerate_floor:
            # the terminal hits the target to machine precision, which is the
            # global minimum of the distance; the adjoint is undefined there
            f = misfit_norm - system.delta0
            gap = 0.0
            log.append({"iter": it, "f": f, "gap": gap, "atoms": len(atoms)})
            converged = True
            aborted = abort_below is not None and f < abort_below
            break
        adj = system.solve_adjoint(nu, grid, misfit)
        bstar_p = adj.bstar_p
        f = adj.misfit_norm - system.delta0
        u_half_vals = cg_direction(adj.bstar_p, u0.lower, u0.upper)
        gap = duality_gap(nu, k, adj.bstar_p, u_vals, u_half_vals, w)
        row = {"iter": it, "f": f, "gap": gap, "atoms": len(atoms)}
        log.append(row)
        if gap < tol_gap:
            converged = True
            break
        if abort_below is not None and f < abort_below:
            aborted = True
            break
        if it == opts.max_iter:
            break
        # a frozen objective means the iteration has hit its numerical floor
        # (the bang-bang direction stops changing); report the achieved gap
        # honestly instead of burning the iteration budget
        if f >= f_prev - 1e-14 * (1.0 + abs(f_prev)):
            stall_count += 1
            if stall_count >= 10:
                break
        else:
            stall_count = 0
        f_prev = f
        iterations = it + 1

        t_half = system.solve_state(nu, u0.replaced(u_half_vals)).terminal
        hull.add(t_half)
        m_prev = hull.size - 1
        diag = np.diag(hull.G)
        dist_sq = diag[:m_prev] + diag[m_prev] - 2.0 * hull.G[:m_prev, m_prev]
        if float(np.min(dist_sq)) < 1e-24 * float(np.max(diag)):
            # the new terminal duplicates a cached atom; keep the hull as is
            # but still line-search the segment toward that atom (the current
            # combination need not be optimal along it)
            idx = int(np.argmin(dist_sq))
            hull.restrict(np.arange(m_prev))
            s = exact_linesearch(misfit, atoms[idx].terminal - t,
                                 inner=system.h_inner)
            e_dup = np.zeros(lam.size)
            e_dup[idx] = 1.0
            lam_seg = (1.0 - s) * lam + s * e_dup
            f_seg = hull.value(lam_seg)
        else:
            atoms.append(HistoryAtom(u_half_vals, t_half))
            lam_pad = np.append(lam, 0.0)
            e_new = np.zeros(lam_pad.size)
            e_new[-1] = 1.0

            # segment candidate = the standard conditional gradient update
            s = exact_linesearch(misfit, t_half - t, inner=system.h_inner)
            lam_seg = (1.0 - s) * lam_pad + s * e_new
            f_seg = hull.value(lam_seg)
        row["f_standard"] = f_seg

        lam_new, f_new = lam_seg, f_seg
        row["f_accelerated"] = float("nan")
        if opts.accelerate:
            try:
                lam_acc = _ssn_solve(hull, opts, lam_seg)
            except (AccelerationFailure, DegenerateTarget):
                try:
                    lam_acc = _active_set_qp(hull.G, hull.b, lam_seg)
                except AccelerationFailure:
                    lam_acc = None
            if lam_acc is not None:
                f_acc = hull.value(lam_acc)
                row["f_accelerated"] = f_acc
                if f_acc <= f_new:
                    lam_new, f_new = lam_acc, f_acc

        # atoms with zero coefficient carry no information: drop them freely
        keep = np.flatnonzero(lam_new > 0.0)
        if keep.size == 0:
            keep = np.array([int(np.argmax(lam_new))])
        if keep.size < lam_new.size:
            hull.restrict(keep)
            atoms = [atoms[i] for i in keep]
            lam_new = lam_new[keep] / lam_new[keep].sum()

        # prune near-zero coefficients only if the value survives (monotone)
        small = lam_new < opts.prune_threshold
        if small.any() and not small.all():
            keep = np.flatnonzero(~small)
            lam_try = lam_new[keep] / lam_new[keep].sum()
            backup = hull.G, hull.b, list(hull.terminals)
            hull.restrict(keep)
            if hull.value(lam_try) <= f_new + 1e-12 * (1.0 + abs(f_new)):
                atoms = [atoms[i] for i in keep]
                lam_new = lam_try
            else:
                hull.G, hull.b, hull.terminals = backup

        # honor the history cap by merging the smallest coefficients;
        # the merged atom represents the same convex combination exactly
        while lam_new.size > opts.history_cap:
            i, j = np.argsort(lam_new)[:2]
            i, j = (int(i), int(j)) if i < j else (int(j), int(i))
            total = lam_new[i] + lam_new[j]
            a = lam_new[i] / total
            hull.merge(i, j, a, 1.0 - a)
            atoms[i] = HistoryAtom(
                a * atoms[i].values + (1.0 - a) * atoms[j].values,
                a * atoms[i].terminal + (1.0 - a) * atoms[j].terminal,
            )
            del atoms[j]
            lam_new[i] = total
            lam_new = np.delete(lam_new, j)

        lam = lam_new
        u_vals = np.zeros_like(u_vals)
        t = np.zeros_like(t)
        for li, atom in zip(lam, atoms):
            u_vals += li * atom.values
            t += li * atom.terminal

    control = u0.replaced(np.clip(u_vals, u0.lower, u0.upper))
    return DistanceSolution(
        nu=nu,
        control=control,
        misfit_norm=misfit_norm,
        delta=misfit_norm - system.delta0,
        gap=gap,
        iterations=iterations,
        bstar_p=bstar_p,
        converged=converged,
        aborted=aborted,
        log=log,
    )
