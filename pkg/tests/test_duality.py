# tests/test_duality.py
import unittest
import sys
import os
import logging

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mpclo import problem_file
from mpclo.cones import svec
from mpclo.duality import (coupling_value, duality_identity_report, duality_identity_residual, mpkkt_residuals,
                           objective_sum_residuals, transfer_check, unperturbed_kkt, value, weak_duality_gaps)
from mpclo.errors import InfeasibleWitness, NotSolvable
from tests.runner import DetailedTestRunner, fixture_path

# --- Disable Logging During Tests ---
logging.disable(logging.CRITICAL)


class TestDuality(unittest.TestCase):
    """Value functions, the duality identity, weak duality and the coupled KKT system."""

    @classmethod
    def setUpClass(cls):
        cls.ex2 = problem_file.load(fixture_path('ex2'))
        cls.ex3 = problem_file.load(fixture_path('ex3'))
        cls.ex4 = problem_file.load(fixture_path('ex4'))
        # Optimal pair of ex3 for u in (0, 1), v = -2
        cls.x3 = np.array([2.5, 0.5, 0.0, 1.5, 0.0])
        cls.y3 = np.array([0.0, 0.0, 0.5, 0.0, 1.0])
        # Optimal pair of ex2 at u = 1, v = -1
        cls.x2 = svec(np.ones((2, 2)))
        cls.y2 = svec(np.array([[1.0, -1.0], [-1.0, 1.0]]))

    # --- Test value ---
    def test_primal_values(self):
        """p*(0.5) = -3.875 on ex3 and p*(1) = 2 on ex2."""
        self.assertAlmostEqual(value(self.ex3, 'PStar', [0.5]).value, -3.875, places=6)
        self.assertAlmostEqual(value(self.ex2, 'PStar', [1.0]).value, 2.0, places=6)

    def test_dual_values(self):
        """d*(-2) = 1 on ex3 and d*(-1) = 1 on ex2."""
        self.assertAlmostEqual(value(self.ex3, 'DStar', [-2.0]).value, 1.0, places=6)
        self.assertAlmostEqual(value(self.ex2, 'DStar', [-1.0]).value, 1.0, places=6)

    def test_nonstandard_duals_close_the_gap(self):
        """d-bar*(u) = p*(u) and p-bar*(v) = d*(v) on ex3."""
        self.assertAlmostEqual(value(self.ex3, 'DBarStar', [0.5]).value, -3.875, places=6)
        self.assertAlmostEqual(value(self.ex3, 'PBarStar', [-2.0]).value, 1.0, places=6)

    def test_unbounded_value_raises(self):
        """Primal(-1) of ex2 is unbounded below, so p*(-1) raises NotSolvable with that status."""
        with self.assertRaises(NotSolvable) as ctx:
            value(self.ex2, 'PStar', [-1.0])
        self.assertEqual(ctx.exception.status, 'Unbounded')

    def test_unknown_variant(self):
        """Unknown value variants are rejected."""
        with self.assertRaises(ValueError):
            value(self.ex3, 'QStar', [0.0])

    # --- Test duality identity ---
    def test_identity_on_coupled_pair_ex2(self):
        """u = 1, v = -1: 2 + 1 = <c + m, d - m> = 3."""
        self.assertAlmostEqual(coupling_value(self.ex2, [1.0], [-1.0]), 3.0, places=12)
        self.assertAlmostEqual(duality_identity_residual(self.ex2, [1.0], [-1.0]), 0.0, places=5)

    def test_identity_on_coupled_pair_ex3(self):
        """u = 0.5, v = -2: -3.875 + 1 = -2.875."""
        self.assertAlmostEqual(duality_identity_residual(self.ex3, [0.5], [-2.0]), 0.0, places=6)

    def test_identity_fails_without_coupling(self):
        """u = 1, v = 0 is not a coupled pair: 2 + 1.5 - 4 = -0.5."""
        self.assertAlmostEqual(duality_identity_residual(self.ex2, [1.0], [0.0]), -0.5, places=5)

    def test_identity_report(self):
        """The report passes on a coupled pair and lists the identity as failing otherwise."""
        self.assertTrue(duality_identity_report(self.ex3, [0.5], [-2.0]).passed)
        report = duality_identity_report(self.ex2, [1.0], [0.0])
        self.assertFalse(report.passed)
        self.assertEqual(report.failing(), ['identity_residual'])

    # --- Test weak_duality_gaps ---
    def test_gaps_vanish_at_optimal_pair(self):
        """x*(1) and y*(-1) of ex2 close both gaps."""
        gaps = weak_duality_gaps(self.ex2, [1.0], [-1.0], self.x2, self.y2)
        self.assertAlmostEqual(gaps.gap, 0.0, places=10)
        self.assertAlmostEqual(gaps.gap_bar, 0.0, places=10)

    def test_gap_of_suboptimal_dual_point(self):
        """y = I is feasible but suboptimal: gap = 2 + 3 - 3 = 2."""
        gaps = weak_duality_gaps(self.ex2, [1.0], [-1.0], self.x2, svec(np.eye(2)))
        self.assertAlmostEqual(gaps.gap, 2.0, places=10)
        self.assertGreaterEqual(gaps.gap_bar, -1e-10)

    def test_gap_rejects_infeasible_witness(self):
        """A witness off the cut set raises InfeasibleWitness naming the violated residual."""
        with self.assertRaises(InfeasibleWitness) as ctx:
            weak_duality_gaps(self.ex2, [1.0], [-1.0], svec(np.eye(2)), self.y2)
        self.assertTrue(ctx.exception.check.startswith('primal'))

    # --- Test mpkkt_residuals ---
    def test_mpkkt_linear_pair(self):
        """ex3 at u = 0.5, v = -2 satisfies the coupled system with <x, y> = 0."""
        report = mpkkt_residuals(self.ex3, self.x3, self.y3, [0.5], [-2.0])
        self.assertTrue(report.passed, report.failing())
        self.assertLess(max(abs(v) for v in report.residuals.values()), 1e-12)

    def test_mpkkt_semidefinite_pair(self):
        """ex4: the rank-one (1,1,-1) pattern at v = (1,1) and (2,-1,1)(2,-1,1)^T at u = (-2,-2)."""
        p = np.array([1.0, 1.0, -1.0])
        w = np.array([2.0, -1.0, 1.0])
        report = mpkkt_residuals(self.ex4, svec(np.outer(p, p)), svec(np.outer(w, w)), [-2.0, -2.0], [1.0, 1.0])
        self.assertTrue(report.passed, report.failing())
        self.assertAlmostEqual(report.residuals['complementarity'], 0.0, places=12)

    def test_mpkkt_detects_broken_complementarity(self):
        """Moving x by 0.1 in a coordinate where y = 0.5 gives complementarity 0.05."""
        x = self.x3.copy()
        x[2] += 0.1
        report = mpkkt_residuals(self.ex3, x, self.y3, [0.5], [-2.0])
        self.assertAlmostEqual(report.residuals['complementarity'], 0.05, places=12)
        self.assertFalse(report.passed)

    # --- Test objective_sum_residuals ---
    def test_objective_sums_hold_for_feasible_points(self):
        """x = (1,2,0,0,1.5) is feasible at v = 1 and y = (0,0,0.5,0,1) at u = 0.5; both sums vanish."""
        report = objective_sum_residuals(self.ex3, [0.5], [1.0], x=[1.0, 2.0, 0.0, 0.0, 1.5], y=self.y3)
        self.assertTrue(report.passed, report.residuals)
        self.assertEqual(set(report.residuals), {'primal_sum', 'dual_sum'})

    # --- Test unperturbed_kkt ---
    def test_unperturbed_kkt_linear(self):
        """The unperturbed linear pair is optimal with <c, x*> = <d, c - y*> = -3."""
        report = unperturbed_kkt(self.ex3)
        self.assertTrue(report.passed, report.failing())
        x = value(self.ex3, 'PStar', [0.0]).witness.x
        self.assertAlmostEqual(float(self.ex3.c @ x), -3.0, places=6)

    # --- Test transfer_check ---
    def test_transfer_both_sides(self):
        """Optimal solutions transfer to the nonstandard dual at the mapped parameter."""
        self.assertTrue(transfer_check(self.ex3, 'dual', [0.5]).passed)
        self.assertTrue(transfer_check(self.ex3, 'primal', [-2.0]).passed)
        self.assertTrue(transfer_check(self.ex2, 'dual', [1.0]).passed)


if __name__ == '__main__':
    runner = DetailedTestRunner(verbosity=2)
    unittest.main(testRunner=runner)
