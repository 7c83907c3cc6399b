# tests/test_mappings.py
import unittest
import sys
import os
import logging
from unittest.mock import patch

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mpclo import mappings, problem_file
from mpclo.data_models import AnalysisOptions, SupportResult
from mpclo.duality import value
from mpclo.errors import NumericalTrouble, OutsideTheta, ValidationError
from mpclo.mappings import (directional_derivative, gradient, map_eval, map_membership, normalize_side,
                            recession_direction, support_directions, theta_membership, theta_support,
                            to_parameter)
from tests.runner import DetailedTestRunner, fixture_path

# --- Disable Logging During Tests ---
logging.disable(logging.CRITICAL)

# u -> Phi(u) of the linear example: a point or an interval [lo, hi]
PAIRINGS = {
    -2.0: 2.0,
    -1.0: (1.0, 2.0),
    -0.5: 1.0,
    0.0: (-2.0, 1.0),
    0.5: -2.0,
    1.0: (-2.5, -2.0),
    2.0: -2.5,
}
# Optimal y-bar*(u) and x-bar*(Phi(u)) where Phi(u) is a single point
WITNESSES = {
    -2.0: ([1.0, 0.0, 0.0, 3.0, 0.0], [0.0, 2.0, 1.0, 0.0, 2.5]),
    -0.5: ([0.0, 0.0, 0.5, 1.0, 0.0], [1.0, 2.0, 0.0, 0.0, 1.5]),
    0.5: ([0.0, 0.0, 0.5, 0.0, 1.0], [2.5, 0.5, 0.0, 1.5, 0.0]),
    2.0: ([0.0, 0.0, 1.0, 0.0, 3.0], [2.5, 0.0, 0.5, 2.0, 0.0]),
}


class TestMappings(unittest.TestCase):
    """Representable-set membership, the set-valued maps and value-function derivatives."""

    @classmethod
    def setUpClass(cls):
        cls.ex1 = problem_file.load(fixture_path('ex1'))
        cls.ex2 = problem_file.load(fixture_path('ex2'))
        cls.ex3 = problem_file.load(fixture_path('ex3'))
        cls.ex4 = problem_file.load(fixture_path('ex4'))
        cls.opts = AnalysisOptions()

    # --- Test normalize_side / support_directions ---
    def test_side_aliases(self):
        """phi and psi name the dual and primal sides; anything else is rejected."""
        self.assertEqual(normalize_side('phi'), 'dual')
        self.assertEqual(normalize_side('PSI'), 'primal')
        with self.assertRaises(ValidationError):
            normalize_side('left')

    def test_support_directions_are_antipodal(self):
        """The two-parameter fan pairs row k with row k + n/2."""
        dirs = support_directions(2, 16)
        self.assertEqual(dirs.shape, (16, 2))
        np.testing.assert_allclose(dirs[:8], -dirs[8:], atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)

    # --- Test theta_membership ---
    def test_order_three_dual_set(self):
        """u = 2 is in the dual set of ex1."""
        self.assertTrue(theta_membership(self.ex1, 'dual', [2.0], self.opts).is_member)

    def test_order_two_primal_set(self):
        """v = 0 is interior and v = -2 is outside the primal set of ex2."""
        self.assertEqual(theta_membership(self.ex2, 'primal', [0.0], self.opts).status, 'Interior')
        self.assertEqual(theta_membership(self.ex2, 'primal', [-2.0], self.opts).status, 'Outside')

    def test_membership_certificate(self):
        """The returned w reproduces the slack c + M^T u + A^T w."""
        result = theta_membership(self.ex3, 'dual', [0.5], self.opts)
        inst = self.ex3
        slack = inst.c + inst.M.T @ np.array([0.5]) + inst.A.T @ result.certificate
        np.testing.assert_allclose(slack, result.slack, atol=1e-6)

    def test_pentagon_primal_set_is_bounded(self):
        """The primal set of the linear example is [-2.5, 2]."""
        upper = theta_support(self.ex3, 'primal', [1.0], self.opts)
        lower = theta_support(self.ex3, 'primal', [-1.0], self.opts)
        self.assertAlmostEqual(upper.value, 2.0, places=5)
        self.assertAlmostEqual(-lower.value, -2.5, places=5)

    def test_elliptope_corner_support(self):
        """max v1 + v2 over the primal set of ex4 is 2, attained at (1, 1)."""
        result = theta_support(self.ex4, 'primal', [1.0, 1.0], self.opts)
        self.assertAlmostEqual(result.value, 2.0, places=4)
        np.testing.assert_allclose(result.argmax, [1.0, 1.0], atol=1e-3)

    def test_unbounded_dual_set_support(self):
        """The dual set of the linear example is the whole line."""
        self.assertEqual(theta_support(self.ex3, 'dual', [1.0], self.opts).value, np.inf)

    # --- Test recession_direction ---
    def test_recession_directions(self):
        """+1 recedes in both dual sets; the bounded primal set of ex3 has none."""
        self.assertTrue(recession_direction(self.ex3, 'dual', [1.0], self.opts)[0])
        self.assertFalse(recession_direction(self.ex3, 'primal', [1.0], self.opts)[0])
        self.assertTrue(recession_direction(self.ex2, 'dual', [1.0], self.opts)[0])

    def test_zero_recession_direction_rejected(self):
        """h = 0 is not a direction."""
        with self.assertRaises(ValidationError):
            recession_direction(self.ex3, 'dual', [0.0], self.opts)

    # --- Test map_eval ---
    def test_order_two_phi_at_one(self):
        """Phi(1) = 1/sqrt(1) - 2 = -1 on ex2."""
        sample = map_eval(self.ex2, 'phi', [1.0], self.opts)
        self.assertEqual(sample.status, 'Point')
        self.assertAlmostEqual(float(sample.point[0]), -1.0, places=5)
        self.assertAlmostEqual(sample.value, 2.0, places=6)

    def test_order_two_phi_at_zero_is_undefined(self):
        """u = 0 is on the boundary of the dual set and Primal(0) is not attained."""
        self.assertEqual(map_eval(self.ex2, 'phi', [0.0], self.opts).status, 'Undefined')

    def test_outside_theta_raises(self):
        """Phi at u = -1 on ex2 lies outside the dual set."""
        with self.assertRaises(OutsideTheta):
            map_eval(self.ex2, 'phi', [-1.0], self.opts)

    def test_pentagon_pairings(self):
        """Phi over the seven pairings of the linear example, points and intervals."""
        for u, expected in PAIRINGS.items():
            with self.subTest(u=u):
                sample = map_eval(self.ex3, 'dual', [u], self.opts)
                if isinstance(expected, tuple):
                    self.assertEqual(sample.status, 'Set')
                    lo, hi = sample.interval()
                    self.assertAlmostEqual(lo, expected[0], places=4)
                    self.assertAlmostEqual(hi, expected[1], places=4)
                else:
                    self.assertEqual(sample.status, 'Point')
                    self.assertAlmostEqual(float(sample.point[0]), expected, places=5)

    def test_pentagon_witnesses(self):
        """y-bar*(u) and x-bar*(Phi(u)) match the tabulated vectors on single-valued pairings."""
        for u, (ybar, xbar) in WITNESSES.items():
            with self.subTest(u=u):
                v = PAIRINGS[u]
                # v = 2 and v = -2.5 are the endpoints of the primal set
                atol = 1e-3 if abs(v) in (2.0, 2.5) else 1e-5
                np.testing.assert_allclose(value(self.ex3, 'DBarStar', [u], self.opts).witness.x, ybar, atol=1e-5)
                np.testing.assert_allclose(value(self.ex3, 'PBarStar', [v], self.opts).witness.x, xbar, atol=atol)

    def test_set_extremes_are_members(self):
        """Midpoints of the computed extremes of Phi(0) pass the membership test."""
        sample = map_eval(self.ex3, 'dual', [0.0], self.opts)
        self.assertGreaterEqual(len(sample.extremes), 2)
        a, b = sample.extremes[0], sample.extremes[-1]
        member, _ = map_membership(self.ex3, 'dual', [0.0], 0.5 * (a + b), self.opts)
        self.assertTrue(member)

    def test_elliptope_psi_at_corner(self):
        """Psi(1,1) is an unbounded set whose computed extremes satisfy u <= -1 and u1 + u2 + u1 u2 >= 0."""
        sample = map_eval(self.ex4, 'psi', [1.0, 1.0], self.opts)
        self.assertEqual(sample.status, 'Set')
        support = {tuple(np.round(g, 6)): h for g, h in sample.support}
        self.assertEqual(support[(-1.0, 0.0)], np.inf)
        self.assertEqual(support[(0.0, -1.0)], np.inf)
        self.assertTrue(sample.extremes)
        for u1, u2 in sample.extremes:
            self.assertLessEqual(u1, -1.0 + 1e-2)
            self.assertLessEqual(u2, -1.0 + 1e-2)
            self.assertGreaterEqual(u1 + u2 + u1 * u2, -1e-2)

    def test_pentagon_phi_at_minus_one_is_finite(self):
        """Phi(-1) is the interval [1, 2] with finite support values in both directions."""
        sample = map_eval(self.ex3, 'dual', [-1.0], self.opts)
        self.assertEqual(sample.status, 'Set')
        for _, h in sample.support:
            self.assertFalse(np.isnan(h))
        lo, hi = sample.interval()
        self.assertAlmostEqual(lo, 1.0, places=4)
        self.assertAlmostEqual(hi, 2.0, places=4)
        self.assertAlmostEqual(sample.width, 1.0, places=4)

    def test_order_three_phi_at_two_is_point(self):
        """Primal(2) of ex1 is attained on the face X22 = 0, so Phi(2) is the point 0 although u = 2 is a boundary point."""
        sample = map_eval(self.ex1, 'phi', [2.0], self.opts)
        self.assertEqual(sample.status, 'Point')
        self.assertAlmostEqual(float(sample.point[0]), 0.0, places=4)
        self.assertAlmostEqual(sample.value, 2.0, places=5)

    def test_failed_axis_support_raises(self):
        """A face support failure on an axis direction surfaces as NumericalTrouble, never as NaN."""
        with patch('mpclo.mappings.optimal_face_support',
                   side_effect=NumericalTrouble("no progress", check="face_support")):
            with self.assertRaises(NumericalTrouble):
                map_eval(self.ex3, 'dual', [-1.0], self.opts)

    def test_nan_support_is_rejected(self):
        """A NaN support value is turned into NumericalTrouble before it reaches a sample."""
        with patch('mpclo.mappings.optimal_face_support', return_value=SupportResult(value=float('nan'))):
            with self.assertRaises(NumericalTrouble):
                map_eval(self.ex3, 'dual', [0.0], self.opts)

    def test_failed_fan_direction_is_dropped(self):
        """On a two-parameter Set, a fan direction that cannot be evaluated is left out; the axes remain."""
        real = mappings.optimal_face_support
        axes = {(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)}

        def flaky(problem, base, g, opts, eps):
            direction = self.ex4.M @ g
            if tuple(np.round(direction / np.linalg.norm(direction), 6) + 0.0) not in axes:
                raise NumericalTrouble("no progress", check="face_support")
            return real(problem, base, g, opts, eps)

        with patch('mpclo.mappings.optimal_face_support', side_effect=flaky):
            sample = map_eval(self.ex4, 'dual', [0.0, 0.0], self.opts)
        self.assertEqual(sample.status, 'Set')
        self.assertEqual(len(sample.support), 4)
        self.assertFalse(any(np.isnan(h) for _, h in sample.support))

    # --- Test map_membership ---
    def test_pentagon_membership(self):
        """-2 is in Phi(0.5); 1 is not, with residual 1.5."""
        member, _ = map_membership(self.ex3, 'dual', [0.5], [-2.0], self.opts)
        self.assertTrue(member)
        member, residual = map_membership(self.ex3, 'dual', [0.5], [1.0], self.opts)
        self.assertFalse(member)
        self.assertAlmostEqual(residual, 1.5, places=5)

    def test_elliptope_membership(self):
        """(-2,-2) is in Psi(1,1) on the hyperbola branch."""
        member, _ = map_membership(self.ex4, 'primal', [1.0, 1.0], [-2.0, -2.0], self.opts)
        self.assertTrue(member)

    def test_substitute_mode_scales_candidates(self):
        """In substitute mode map values are G times the parameter; to_parameter undoes it."""
        opts = AnalysisOptions(gram_mode='substitute')
        np.testing.assert_allclose(to_parameter(self.ex1, [3.0], opts), [2.0])
        sample = map_eval(self.ex4, 'dual', [2.0, 2.0], opts)
        np.testing.assert_allclose(to_parameter(self.ex4, sample.point, opts), [-1.0, -1.0], atol=1e-3)

    # --- Test directional_derivative / gradient ---
    def test_order_two_derivative(self):
        """p*'(1; 1) = 1 on ex2 and the difference quotient agrees."""
        result = directional_derivative(self.ex2, 'dual', [1.0], [1.0], self.opts)
        self.assertAlmostEqual(result.value, 1.0, places=4)
        self.assertIsNotNone(result.fd_check)
        self.assertAlmostEqual(result.fd_check, 1.0, places=2)

    def test_order_two_gradient(self):
        """The gradient M d + G Phi(1) = 2 - 1 = 1."""
        np.testing.assert_allclose(gradient(self.ex2, 'dual', [1.0], self.opts), [1.0], atol=1e-5)

    def test_elliptope_dual_value_derivative(self):
        """d*'((1,1); (-1,-1)) = 2(1 + 1) + 4 sqrt(1) = 8; mixed signs give -inf."""
        result = directional_derivative(self.ex4, 'primal', [1.0, 1.0], [-1.0, -1.0], self.opts)
        self.assertAlmostEqual(result.value, 8.0, delta=2e-2)
        self.assertTrue(directional_derivative(self.ex4, 'primal', [1.0, 1.0], [1.0, -1.0], self.opts).minus_infinity)

    def test_elliptope_primal_value_derivative(self):
        """p*'((0,0); (1,-1)) = -2 |1 - (-1)| = -4."""
        result = directional_derivative(self.ex4, 'dual', [0.0, 0.0], [1.0, -1.0], self.opts)
        self.assertAlmostEqual(result.value, -4.0, delta=2e-2)
        self.assertIsNone(gradient(self.ex4, 'dual', [0.0, 0.0], self.opts))


if __name__ == '__main__':
    runner = DetailedTestRunner(verbosity=2)
    unittest.main(testRunner=runner)
