# tests/test_cli.py
import unittest
import sys
import os
import io
import logging
import tempfile
from contextlib import redirect_stderr, redirect_stdout

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mpclo import config
from mpclo.main import _join_values, main, parse_grid, parse_vector, parse_window
from mpclo.errors import ValidationError
from tests.runner import DetailedTestRunner, fixture_path

# --- Disable Logging During Tests ---
logging.disable(logging.CRITICAL)


def _field(line: str, key: str) -> str:
    """Value of `key=...` in a space-separated output line."""
    for part in line.split():
        if part.startswith(key + "="):
            return part[len(key) + 1:]
    raise KeyError(key)


class TestCli(unittest.TestCase):
    """The mpclo command line: stdout lines, written files and exit codes."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.saved_log_file = config.LOG_FILE
        config.LOG_FILE = os.path.join(cls.tmp.name, 'mpclo.log')

    @classmethod
    def tearDownClass(cls):
        logging.shutdown()
        config.LOG_FILE = cls.saved_log_file
        cls.tmp.cleanup()

    def run_cli(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue().splitlines(), err.getvalue()

    def path(self, name: str) -> str:
        return os.path.join(self.tmp.name, name)

    # --- Test argument helpers ---
    def test_argument_helpers(self):
        """Vectors, windows and grids parse; negative values are joined to their flag."""
        self.assertEqual(list(parse_vector("-1,2.5")), [-1.0, 2.5])
        self.assertEqual(parse_window("-3:3,-1:1"), ((-3.0, 3.0), (-1.0, 1.0)))
        self.assertEqual(parse_grid("17,9"), (17, 9))
        self.assertEqual(_join_values(["map", "--at", "-1", "f.json"]), ["map", "--at=-1", "f.json"])
        with self.assertRaises(ValidationError):
            parse_window("3")

    # --- Test validate ---
    def test_validate_order_three(self):
        """ex1 passes with the Gram flag reported false and G = 1.5."""
        code, lines, _ = self.run_cli("validate", fixture_path('ex1'))
        self.assertEqual(code, 0)
        self.assertTrue(lines[0].startswith("passed=true"))
        self.assertEqual(lines[-1], "assumption2_exact=false gram=[[1.5]]")

    # --- Test solve / map / member / derivative ---
    def test_solve_primal(self):
        """Primal(0.5) of ex3 prints its objective in fixed format."""
        code, lines, _ = self.run_cli("solve", fixture_path('ex3'), "--family", "primal", "--at", "0.5")
        self.assertEqual(code, 0)
        self.assertEqual(_field(lines[0], "status"), "optimal")
        self.assertAlmostEqual(float(_field(lines[0], "objective")), -3.875, places=6)

    def test_map_order_two(self):
        """Phi(1) on ex2 is the point -1."""
        code, lines, _ = self.run_cli("map", fixture_path('ex2'), "--side", "phi", "--at", "1")
        self.assertEqual(code, 0)
        self.assertEqual(_field(lines[0], "status"), "point")
        self.assertAlmostEqual(float(_field(lines[0], "value")), -1.0, places=5)

    def test_map_set_prints_interval(self):
        """Phi(0) on ex3 is the interval [-2, 1]."""
        code, lines, _ = self.run_cli("map", fixture_path('ex3'), "--at", "0")
        self.assertEqual(code, 0)
        self.assertEqual(_field(lines[0], "status"), "set")
        interval = next(line for line in lines if line.startswith("interval="))
        lo, hi = (float(x) for x in interval[len("interval="):].strip("[]").split(","))
        self.assertAlmostEqual(lo, -2.0, places=4)
        self.assertAlmostEqual(hi, 1.0, places=4)

    def test_map_outside_theta(self):
        """u = -1 is outside the dual set of ex2: solver-class exit code 3."""
        code, lines, err = self.run_cli("map", fixture_path('ex2'), "--at", "-1")
        self.assertEqual(code, 3)
        self.assertEqual(lines, [])
        self.assertTrue(err)

    def test_member(self):
        """Theta membership and map membership of ex3."""
        code, lines, _ = self.run_cli("member", fixture_path('ex3'), "--side", "psi", "--at", "3")
        self.assertEqual(code, 0)
        self.assertEqual(_field(lines[0], "theta"), "outside")
        code, lines, _ = self.run_cli("member", fixture_path('ex3'), "--at", "0.5", "--candidate", "-2")
        self.assertEqual(_field(lines[0], "member"), "true")

    def test_derivative(self):
        """p*'(1; 1) = 1 on ex2, with gradient 1."""
        code, lines, _ = self.run_cli("derivative", fixture_path('ex2'), "--at", "1", "--direction", "1")
        self.assertEqual(code, 0)
        self.assertAlmostEqual(float(_field(lines[0], "value")), 1.0, places=4)
        self.assertTrue(lines[1].startswith("gradient="))

    # --- Test partition / report ---
    def test_partition_and_report(self):
        """A 1-D partition writes CSV, table and results; report re-renders the same CSV bytes."""
        csv_path, table_path, saved = self.path('ex3.csv'), self.path('ex3-table.csv'), self.path('ex3.json')
        code, lines, _ = self.run_cli("partition", fixture_path('ex3'), "--window", "-3:3", "--grid", "121",
                                      "--csv", csv_path, "--table", table_path, "--save", saved)
        self.assertEqual(code, 0)
        transitions = [line for line in lines if line.startswith("transition ")]
        self.assertEqual(len(transitions), 3)
        self.assertIn("unclassified_samples=0", lines)
        self.assertTrue(all(line.split()[1].endswith("=pass") for line in lines if line.startswith("check ")))
        with open(table_path, encoding='utf-8') as f:
            self.assertEqual(f.readline().strip(), "xbar,v,u,ybar")
            self.assertEqual(len(f.read().splitlines()), 7)

        again = self.path('ex3-again.csv')
        code, _, _ = self.run_cli("report", saved, "--csv", again, "--problem", fixture_path('ex3'))
        self.assertEqual(code, 0)
        with open(csv_path, 'rb') as a, open(again, 'rb') as b:
            self.assertEqual(a.read(), b.read())

    def test_report_rejects_other_problem(self):
        """Results re-rendered against a different problem file fail the digest check."""
        saved = self.path('ex3-digest.json')
        self.run_cli("partition", fixture_path('ex3'), "--window", "-3:3", "--grid", "13", "--save", saved)
        code, _, err = self.run_cli("report", saved, "--problem", fixture_path('ex2'))
        self.assertEqual(code, 2)
        self.assertIn("does not match", err)

    def test_partition_window_outside_theta(self):
        """A window left of the dual set of ex2 reports one OutsideTheta region and exits 0."""
        csv_path = self.path('outside.csv')
        code, lines, _ = self.run_cli("partition", fixture_path('ex2'), "--window", "-3:-1", "--grid", "5",
                                      "--csv", csv_path)
        self.assertEqual(code, 0)
        self.assertEqual(len([line for line in lines if line.startswith("region ")]), 1)
        self.assertIn("kind=OutsideTheta", lines[0])

    # --- Test verify ---
    def test_verify(self):
        """Sampled identity checks pass on ex3."""
        code, lines, _ = self.run_cli("verify", fixture_path('ex3'), "--samples", "3", "--seed", "5")
        self.assertEqual(code, 0)
        self.assertEqual(len(lines), 5)
        self.assertTrue(all(line.split()[1].endswith("=pass") for line in lines))

    # --- Test errors ---
    def test_missing_file(self):
        """An unreadable problem file exits 2."""
        code, _, err = self.run_cli("validate", self.path('missing.json'))
        self.assertEqual(code, 2)
        self.assertIn("Cannot read", err)

    def test_bad_vector(self):
        """A non-numeric --at exits 2."""
        code, _, _ = self.run_cli("map", fixture_path('ex3'), "--at", "one")
        self.assertEqual(code, 2)


if __name__ == '__main__':
    runner = DetailedTestRunner(verbosity=2)
    unittest.main(testRunner=runner)
