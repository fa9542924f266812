"""Outer damped Newton method on the minimal-distance value function.

Each evaluation of the value function is an inner conditional gradient solve;
its derivative with respect to the horizon comes for free from the converged
adjoint state (exact for the discrete problem).  Newton steps that overshoot
the root (value below -tol) are shortened by a damping factor; a bisection
safeguard takes over if damping keeps failing.
"""

from dataclasses import dataclass, field

import numpy as np

from .cg import CgOptions, cg_solve
from .errors import NoConvergence, NonQualifiedStationarity
from .grid import TimeGrid
from .system import hamiltonian_integral

#: damping factor applied to overshooting Newton steps
DEFAULT_DAMPING = 0.9


@dataclass
class NewtonOptions:
    """Tunables of the outer root finder.

    ``tol_delta=None`` resolves to ``1e-8 * (1 + delta0)`` at solve time.
    """

    nu0: float = 1.0
    tol_delta: float = None
    max_steps: int = 30
    damping: float = DEFAULT_DAMPING
    bracket_expand: float = 2.0
    max_damping: int = 20
    inner: CgOptions = field(default_factory=CgOptions)

    def resolved_tol(self, delta0):
        return self.tol_delta if self.tol_delta is not None else 1e-8 * (1.0 + delta0)


@dataclass
class NewtonTrace:
    """Outer iteration history plus the final inner solution."""

    records: list
    status: str
    nu_final: float
    delta_final: float
    total_cg_steps: int
    solution: object = None

    @property
    def newton_steps(self):
        return len(self.records)

    @property
    def damped_steps(self):
        return sum(1 for r in self.records if r["damping_count"] > 0)


def delta_eval(system, nu, grid: TimeGrid, warm_start=None, inner_opts=None):
    """Value function and its derivative at nu via one inner solve.

    Returns ``(delta, dprime, solution)``.  The derivative is the discrete
    Hamiltonian pairing at the inner-optimal control; it is flagged by
    ``solution.converged`` whether the inner gap tolerance was met.
    """
    inner_opts = inner_opts or CgOptions()
    u0 = warm_start if warm_start is not None else system.midpoint_control(grid)
    sol = cg_solve(system, nu, u0, inner_opts)
    dprime = _derivative_at(system, nu, grid, sol)
    return sol.delta, dprime, sol


def _derivative_at(system, nu, grid, sol):
    y = system.solve_state(nu, sol.control)
    adj = system.solve_adjoint(nu, grid, y.terminal - system.y_d)
    return hamiltonian_integral(system, nu, sol.control, y, adj)


def newton_solve(system, grid: TimeGrid, opts: NewtonOptions) -> NewtonTrace:
    """Find the root of the value function by the damped Newton method.

    The start value should lie below the optimal horizon (positive value
    function); if it does not, the solve restarts from a smaller horizon.
    """
    tol = opts.resolved_tol(system.delta0)
    gamma = opts.damping
    total_cg = 0

    nu = opts.nu0
    sol = None
    for _ in range(10):
        sol = cg_solve(system, nu, system.midpoint_control(grid), opts.inner)
        total_cg += sol.iterations
        if sol.delta >= -tol:
            break
        nu /= opts.bracket_expand
    else:
        raise NoConvergence(
            f"no start with nonnegative value function found below nu0={opts.nu0}"
        )

    records = []
    bracket_lo = None  # largest nu seen with delta > tol
    bracket_hi = None  # smallest nu seen with delta < -tol
    status = "no-convergence"

    for _ in range(opts.max_steps):
        delta = sol.delta
        dprime = _derivative_at(system, nu, grid, sol)
        record = {
            "nu": nu,
            "delta": delta,
            "dprime": dprime,
            "damping_count": 0,
            "inner_iterations": sol.iterations,
            "gap": sol.gap,
            "inner_converged": sol.converged,
        }
        records.append(record)
        if delta > tol:
            bracket_lo = nu if bracket_lo is None else max(bracket_lo, nu)

        if delta < tol:
            status = "converged"
            break
        if abs(dprime) < 1e-14 * (1.0 + abs(delta)):
            raise NonQualifiedStationarity(
                f"value-function derivative vanished at nu={nu:.6g} "
                f"(delta={delta:.3g}); Newton step undefined"
            )

        full_step = -delta / dprime
        scale = 1.0
        damping_count = 0
        while True:
            nu_trial = nu + scale * full_step
            if nu_trial <= 0:
                nu_trial = nu / opts.bracket_expand
            trial = cg_solve(system, nu_trial, sol.control, opts.inner,
                             abort_below=-tol)
            total_cg += trial.iterations
            if not trial.aborted:
                break
            bracket_hi = nu_trial if bracket_hi is None else min(bracket_hi, nu_trial)
            damping_count += 1
            scale *= gamma
            if damping_count > opts.max_damping:
                # bisection safeguard on the sign bracket
                if bracket_lo is None or bracket_hi is None:
                    raise NoConvergence(
                        "damping exhausted without a usable bracket",
                        trace=NewtonTrace(records, "damping-failed", nu, delta,
                                          total_cg),
                    )
                while bracket_hi - bracket_lo > 1e-14 * (1.0 + bracket_hi):
                    nu_trial = 0.5 * (bracket_lo + bracket_hi)
                    trial = cg_solve(system, nu_trial, sol.control, opts.inner,
                                     abort_below=-tol)
                    total_cg += trial.iterations
                    damping_count += 1
                    if not trial.aborted:
                        break
                    bracket_hi = nu_trial
                if trial.aborted:
                    raise NoConvergence(
                        "bisection safeguard collapsed without an acceptable "
                        "iterate",
                        trace=NewtonTrace(records, "bisection-failed", nu,
                                          delta, total_cg),
                    )
                break
        record["damping_count"] = damping_count
        nu, sol = nu_trial, trial

    trace = NewtonTrace(records, status, nu, sol.delta, total_cg, solution=sol)
    if status != "converged":
        raise NoConvergence(
            f"no root of the value function within {opts.max_steps} Newton steps",
            trace=trace,
        )
    return trace


def structural_diagnostic(bstar_p, step, weights, eps_list):
    """Measure of the near-zero set of the adjoint shadow for each band width.

    Returns a list of ``(eps, measure)`` pairs; linear growth of the measure
    in eps indicates the structural (bang-bang) condition with finite slope.
    """
    bstar_p = np.abs(np.asarray(bstar_p))
    out = []
    for eps in eps_list:
        mask = bstar_p <= eps
        measure = float(step * np.sum(mask * np.asarray(weights)))
        out.append((float(eps), measure))
    return out


def sample_value_function(system, grid: TimeGrid, nu_list, inner_opts=None):
    """Evaluate the value function on a list of horizons (cold starts).

    Returns ``(nu, delta, converged)`` triples; entries whose inner solve hit
    the iteration cap are flagged rather than raised.
    """
    inner_opts = inner_opts or CgOptions()
    out = []
    for nu in nu_list:
        sol = cg_solve(system, float(nu), system.midpoint_control(grid), inner_opts)
        out.append((float(nu), sol.delta, sol.converged))
    return out
