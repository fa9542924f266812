"""Independent brute-force references used by the test suite.

Everything here is deliberately simple and shares no numerical kernels with
the main solver path: matrix-exponential time stepping, exhaustive simplex
projection, finite differences, golden-section search, and a grid+bisection
root finder.
"""

from itertools import combinations

import numpy as np
from scipy.linalg import expm

from .errors import NoSignChange


def expm_trajectory(A, B, y0, nu, control):
    """Exact terminal state of d/ds y + nu*A y = nu*B u on (0, 1) for a
    piecewise-constant control, via per-interval matrix exponentials."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    k = control.grid.step
    # y_+ = E y + J B u with E = exp(-nu*k*A) and J = int_0^k exp(-nu*A*s) nu ds,
    # both read off one augmented exponential
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = -nu * k * A
    aug[:n, n:] = nu * k * np.eye(n)
    E_aug = expm(aug)
    E = E_aug[:n, :n]
    J = E_aug[:n, n:]
    JB = J @ B
    y = np.asarray(y0, dtype=float).copy()
    for m in range(control.grid.intervals):
        y = E @ y + JB @ control.values[m]
    return y


def brute_simplex_qp(y):
    """Exact Euclidean projection onto the probability simplex by enumerating
    every nonempty candidate active set (m <= 10)."""
    y = np.asarray(y, dtype=float)
    m = y.size
    if m > 10:
        raise ValueError("brute-force projection is limited to m <= 10")
    best = None
    best_dist = np.inf
    for size in range(1, m + 1):
        for subset in combinations(range(m), size):
            idx = list(subset)
            tau = (1.0 - y[idx].sum()) / size
            x = np.zeros(m)
            x[idx] = y[idx] + tau
            if np.any(x[idx] < -1e-14):
                continue
            dist = np.sum((x - y) ** 2)
            if dist < best_dist:
                best_dist = dist
                best = x
    return np.maximum(best, 0.0)


def fd_derivative(fun, x, h=1e-6):
    """Central finite difference of a scalar map."""
    return (fun(x + h) - fun(x - h)) / (2.0 * h)


def golden_section(fun, a, b, tol=1e-10):
    """Golden-section minimization of a unimodal scalar map on [a, b]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def grid_bisection_root(sampler, nu_lo, nu_hi, grid_width, level=0.0, tol=1e-6):
    """Locate the first down-crossing of ``sampler(nu) - level`` on a grid,
    then bisect the bracketing interval.

    Returns the bisected root location.  Raises NoSignChange if the sampled
    values never cross the level.
    """
    n_pts = int(np.ceil((nu_hi - nu_lo) / grid_width)) + 1
    nus = np.linspace(nu_lo, nu_hi, n_pts)
    vals = np.array([sampler(nu) - level for nu in nus])
    bracket = None
    for i in range(len(nus) - 1):
        if vals[i] > 0.0 >= vals[i + 1]:
            bracket = (nus[i], nus[i + 1], vals[i], vals[i + 1])
            break
    if bracket is None:
        raise NoSignChange(
            f"no sign change of sampler - {level} on [{nu_lo}, {nu_hi}]"
        )
    lo, hi, flo, fhi = bracket
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fmid = sampler(mid) - level
        if fmid > 0.0:
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    return 0.5 * (lo + hi)
