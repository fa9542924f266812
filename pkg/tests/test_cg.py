import numpy as np
import pytest

from topt import (
    CgOptions,
    TimeGrid,
    cg_direction,
    cg_solve,
    duality_gap,
    exact_linesearch,
    pendulum_preset,
    ssn_combination,
)
from topt.cg import _HullObjective, _active_set_qp
from topt.oracles import brute_simplex_qp, golden_section


class TestDirection:
    def test_sign_pattern(self):
        lower = np.array([-1.0, -2.0])
        upper = np.array([3.0, 4.0])
        bstar_p = np.array([[2.0, -0.5], [0.0, 1.0]])
        d = cg_direction(bstar_p, lower, upper)
        assert np.allclose(d, [[-1.0, 4.0], [1.0, -2.0]])

    def test_exact_zero_gets_box_midpoint(self):
        d = cg_direction(np.zeros((3, 1)), np.array([-1.0]), np.array([5.0]))
        assert np.allclose(d, 2.0)


class TestLinesearch:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_golden_section(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=4)
        b = rng.normal(size=4)
        lam = exact_linesearch(a, b)
        lam_ref = golden_section(lambda t: np.linalg.norm(a + t * b), 0.0, 1.0)
        assert abs(lam - lam_ref) < 1e-6 or np.linalg.norm(a + lam * b) <= \
            np.linalg.norm(a + lam_ref * b) + 1e-12

    def test_degenerate_segment(self):
        assert exact_linesearch(np.array([1.0]), np.array([0.0])) == 0.0


class TestHullCoefficients:
    def _random_hull(self, rng, m, n=6):
        y_d = rng.normal(size=n)
        hull = _HullObjective(lambda a, b: float(np.dot(a, b)), y_d, 0.1)
        for _ in range(m):
            hull.add(rng.normal(size=n))
        return hull

    @pytest.mark.parametrize("m", [1, 2, 4, 7])
    def test_ssn_matches_exhaustive_qp(self, m, rng):
        """No random simplex point may beat the reported coefficient optimum."""
        y_d = rng.normal(size=6)
        terminals = [rng.normal(size=6) for _ in range(m)]
        lam = ssn_combination(terminals, y_d, 0.1, CgOptions())
        hull = _HullObjective(lambda a, b: float(np.dot(a, b)), y_d, 0.1)
        for term in terminals:
            hull.add(term)
        f = hull.value(lam)
        # no random simplex point may beat the reported optimum
        for _ in range(2000):
            trial = rng.dirichlet(np.ones(m))
            assert hull.value(trial) >= f - 1e-9

    def test_active_set_qp_matches_brute_force(self, rng):
        """Exhaustively verify the fallback QP on small random instances,
        including duplicated columns (singular Gram matrices)."""
        from itertools import combinations
        for trial in range(200):
            m = int(rng.integers(1, 6))
            Y = rng.normal(size=(4, m))
            if m >= 2 and trial % 3 == 0:
                Y[:, -1] = Y[:, 0]  # exact duplicate atom
            G = Y.T @ Y
            b = Y.T @ rng.normal(size=4)
            lam = _active_set_qp(G, b, np.full(m, 1.0 / m))
            val = 0.5 * lam @ G @ lam - b @ lam
            best = np.inf
            for size in range(1, m + 1):
                for subset in combinations(range(m), size):
                    idx = list(subset)
                    Gf = G[np.ix_(idx, idx)] + 1e-12 * np.eye(size)
                    KKT = np.block([[Gf, np.ones((size, 1))],
                                    [np.ones((1, size)), np.zeros((1, 1))]])
                    rhs = np.append(b[idx], 1.0)
                    try:
                        sol = np.linalg.solve(KKT, rhs)
                    except np.linalg.LinAlgError:
                        continue
                    x = np.zeros(m)
                    x[idx] = sol[:size]
                    if np.any(x[idx] < -1e-12):
                        continue
                    best = min(best, 0.5 * x @ G @ x - b @ x)
            assert val <= best + 1e-9

    def test_merge_preserves_value(self, rng):
        hull = self._random_hull(rng, 5)
        lam = rng.dirichlet(np.ones(5))
        f_before = hull.value(lam)
        i, j = 1, 3
        total = lam[i] + lam[j]
        hull.merge(i, j, lam[i] / total, lam[j] / total)
        lam_merged = np.delete(lam.copy(), j)
        lam_merged[i] = total
        assert abs(hull.value(lam_merged) - f_before) < 1e-12


class TestCgSolve:
    def test_monotone_objective_and_gap_certificate(self):
        """f is non-increasing and f - f_ref is bounded by the duality gap,
        with f_ref from a ten-times tighter reference solve."""
        s = pendulum_preset()
        g = TimeGrid(200)
        nu = 4.0
        sol = cg_solve(s, nu, s.midpoint_control(g), CgOptions(tol_gap=1e-7))
        ref = cg_solve(s, nu, s.midpoint_control(g), CgOptions(tol_gap=1e-8))
        fs = [row["f"] for row in sol.log]
        assert all(f1 <= f0 + 1e-12 for f0, f1 in zip(fs, fs[1:]))
        for row in sol.log:
            assert row["f"] - ref.delta <= row["gap"] + 1e-10

    def test_accelerated_beats_standard_step(self):
        s = pendulum_preset()
        g = TimeGrid(100)
        sol = cg_solve(s, 4.0, s.midpoint_control(g), CgOptions())
        for row in sol.log:
            if "f_standard" in row and np.isfinite(row["f_accelerated"]):
                assert row["f_accelerated"] <= row["f_standard"] + 1e-10

    def test_acceleration_off_still_converges(self):
        s = pendulum_preset()
        g = TimeGrid(100)
        sol = cg_solve(s, 4.0, s.midpoint_control(g),
                       CgOptions(tol_gap=1e-4, accelerate=False, max_iter=20000))
        assert sol.converged
        assert sol.gap < 1e-4

    def test_abort_below_cuts_short(self):
        s = pendulum_preset()
        g = TimeGrid(100)
        # horizon far beyond optimal: the distance drops well below zero
        sol = cg_solve(s, 7.0, s.midpoint_control(g), CgOptions(),
                       abort_below=-1e-7)
        assert sol.aborted
        assert sol.delta < -1e-7

    def test_duality_gap_formula(self, rng):
        nu, k = 1.2, 0.25
        w = np.array([2.0, 3.0])
        bp = rng.normal(size=(4, 2))
        u = rng.normal(size=(4, 2))
        uh = rng.normal(size=(4, 2))
        expected = nu * k * np.sum(w * bp * (u - uh))
        assert abs(duality_gap(nu, k, bp, u, uh, w) - expected) < 1e-14
