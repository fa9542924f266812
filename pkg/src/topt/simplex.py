"""Euclidean projection onto the probability simplex and its generalized derivative.

Sort-based projection in O(m log m); the derivative acts as
``v -> active * (v - mean of v over the active set)``.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class SimplexProjection:
    """Projected point plus the data needed to apply the derivative."""

    point: np.ndarray
    rho: int
    permutation: np.ndarray
    active: np.ndarray  # boolean mask of strictly positive coordinates

    def apply_derivative(self, v):
        """Apply the generalized derivative to a vector (or to the columns of
        a matrix stacked as rows of ``v``)."""
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        mean_active = v[..., self.active].sum(axis=-1) / self.rho
        out[..., self.active] = v[..., self.active] - mean_active[..., None]
        return out

    def derivative_matrix(self):
        m = self.point.size
        D = np.zeros((m, m))
        idx = np.flatnonzero(self.active)
        D[np.ix_(idx, idx)] = np.eye(self.rho) - 1.0 / self.rho
        return D


def project_simplex(y) -> SimplexProjection:
    """Project y onto {x >= 0, sum(x) = 1} and record the derivative data."""
    y = np.asarray(y, dtype=float)
    m = y.size
    order = np.argsort(y)[::-1]
    s = y[order]
    cssv = np.cumsum(s)
    j = np.arange(1, m + 1)
    shift = (1.0 - cssv) / j
    positive = np.flatnonzero(s + shift > 0)
    # the j = 1 entry is positive in exact arithmetic; catastrophic
    # cancellation for huge inputs can lose it, in which case the projection
    # collapses onto the largest coordinate
    rho = int(np.max(positive)) + 1 if positive.size else 1
    tau = shift[rho - 1]
    x = np.maximum(y + tau, 0.0)
    active = x > 0.0
    # rho counts the active coordinates by construction; enforce consistency
    # in the presence of exact ties at zero
    if int(active.sum()) != rho:
        active = np.zeros(m, dtype=bool)
        active[order[:rho]] = True
    return SimplexProjection(point=x, rho=rho, permutation=order, active=active)
