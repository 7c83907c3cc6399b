# tests/test_faces.py
import unittest
import sys
import os
import logging

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mpclo import problem_file
from mpclo.cones import ConeSpec, Orthant, Psd, cone_margin, smat, svec
from mpclo.faces import face_basis, face_exposed_by, face_of_pair, reduce_by_rows, whole_cone
from mpclo.model import assemble
from tests.runner import DetailedTestRunner, fixture_path

# --- Disable Logging During Tests ---
logging.disable(logging.CRITICAL)


class TestFaces(unittest.TestCase):
    """Face bases of the product cone, faces read off primal-dual pairs and row reduction."""

    @classmethod
    def setUpClass(cls):
        cls.ex1 = problem_file.load(fixture_path('ex1'))
        cls.mixed = ConeSpec((Orthant(3), Psd(2)))

    # --- Test face_basis ---
    def test_basis_is_isometric(self):
        """W has orthonormal columns, so restrict undoes lift."""
        V = np.array([[1.0], [1.0]]) / np.sqrt(2.0)
        face = face_basis(self.mixed, [np.array([True, False, True]), V])
        self.assertEqual(face.dim, 3)
        np.testing.assert_allclose(face.W.T @ face.W, np.eye(3), atol=1e-12)
        z = np.array([0.5, 2.0, 3.0])
        np.testing.assert_allclose(face.restrict(face.lift(z)), z, atol=1e-12)
        self.assertEqual(str(face.space), "Orthant(2) x Psd(1)")

    def test_empty_face(self):
        """Keeping nothing gives the zero face with no reduced cone."""
        face = face_basis(self.mixed, [np.zeros(3, dtype=bool), np.zeros((2, 0))])
        self.assertEqual(face.dim, 0)
        self.assertIsNone(face.space)

    def test_whole_cone(self):
        """The trivial face is the identity on K."""
        face = whole_cone(self.mixed)
        self.assertEqual(face.dim, self.mixed.total_dim)
        self.assertEqual(face.space, self.mixed)

    # --- Test face_of_pair ---
    def test_orthant_pair(self):
        """Coordinates with x above s are kept; complementary ones drop out."""
        spec = ConeSpec((Orthant(3),))
        face = face_of_pair([1.0, 0.0, 2.0], [0.0, 3.0, 0.0], spec, 1e-8)
        self.assertEqual(face.dim, 2)
        np.testing.assert_allclose(face.lift([4.0, 5.0]), [4.0, 0.0, 5.0])

    def test_rank_one_pair(self):
        """X = [[1,1],[1,1]] with S = [[1,-1],[-1,1]] exposes the ray through X."""
        spec = ConeSpec((Psd(2),))
        face = face_of_pair(svec(np.ones((2, 2))), svec(np.array([[1.0, -1.0], [-1.0, 1.0]])), spec, 1e-8)
        self.assertEqual(face.dim, 1)
        self.assertEqual(face.space, ConeSpec((Psd(1),)))
        X = smat(face.lift([2.0]), 2)
        np.testing.assert_allclose(X, np.ones((2, 2)), atol=1e-12)

    def test_exposed_by_psd_matrix(self):
        """diag(0, 1) exposes the matrices with a zero (2,2) entry."""
        spec = ConeSpec((Psd(2),))
        face = face_exposed_by(svec(np.diag([0.0, 1.0])), spec, 1e-9)
        self.assertEqual(face.dim, 1)
        self.assertAlmostEqual(float(smat(face.lift([1.0]), 2)[1, 1]), 0.0)

    # --- Test reduce_by_rows ---
    def test_order_three_rows_fix_middle_entry(self):
        """The row X22 = 0 of ex1 reduces Psd(3) to the order-2 face on e1, e3."""
        problem = assemble(self.ex1, 'Primal', [2.0])
        face = reduce_by_rows(problem.eq_matrix, problem.eq_rhs, self.ex1.space, 1e-9)
        self.assertIsNotNone(face)
        self.assertEqual(face.dim, 3)
        self.assertEqual(face.space, ConeSpec((Psd(2),)))
        rng = np.random.default_rng(3)
        for _ in range(3):
            L = rng.normal(size=(2, 2))
            X = smat(face.lift(svec(L @ L.T)), 3)
            self.assertAlmostEqual(float(X[1, 1]), 0.0, places=12)
            self.assertGreaterEqual(cone_margin(svec(X), self.ex1.space), -1e-12)

    def test_rows_without_exposure(self):
        """Rows with nonzero right-hand sides expose nothing."""
        spec = ConeSpec((Orthant(2),))
        self.assertIsNone(reduce_by_rows(np.array([[1.0, 1.0]]), np.array([1.0]), spec, 1e-9))

    def test_orthant_row_with_mixed_signs(self):
        """x1 - x2 = 0 is not a nonnegative row and exposes nothing; x1 + x2 = 0 pins both to zero."""
        spec = ConeSpec((Orthant(2),))
        self.assertIsNone(reduce_by_rows(np.array([[1.0, -1.0]]), np.array([0.0]), spec, 1e-9))
        face = reduce_by_rows(np.array([[1.0, 1.0]]), np.array([0.0]), spec, 1e-9)
        self.assertEqual(face.dim, 0)
        self.assertIsNone(face.space)


if __name__ == '__main__':
    runner = DetailedTestRunner(verbosity=2)
    unittest.main(testRunner=runner)
