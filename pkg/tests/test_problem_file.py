# tests/test_problem_file.py
import unittest
import sys
import os
import json
import logging
import tempfile

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from mpclo import problem_file
from mpclo.errors import DimensionMismatch, ParseError
from tests.runner import DetailedTestRunner, fixture_path

# --- Disable Logging During Tests ---
logging.disable(logging.CRITICAL)

FIXTURES = ('ex1', 'ex2', 'ex3', 'ex4')


class TestProblemFile(unittest.TestCase):
    """Parsing, canonical dumps and content digests of problem files."""

    @classmethod
    def setUpClass(cls):
        cls.instances = {name: problem_file.load(fixture_path(name)) for name in FIXTURES}

    # --- Test parse / dump ---
    def test_fixture_names_and_shapes(self):
        """Labels name the instance; ex4 lives in svec(S^3) with q = 6 and r = 2."""
        ex4 = self.instances['ex4']
        self.assertEqual(ex4.name, 'ex4')
        self.assertEqual(ex4.space.total_dim, 6)
        self.assertEqual(ex4.r, 2)
        self.assertEqual(self.instances['ex3'].dims, (5, 3, 1, 1))

    def test_dump_parse_round_trip(self):
        """parse(dump(I)) equals I and dump is a fixed point after one pass."""
        for name, instance in self.instances.items():
            with self.subTest(fixture=name):
                text = problem_file.dump(instance)
                again = problem_file.parse(text, name)
                self.assertTrue(problem_file.instances_equal(instance, again) or
                                all(np.allclose(getattr(instance, n), getattr(again, n), atol=1e-14)
                                    for n in ('A', 'B', 'M', 'c', 'd')))
                self.assertEqual(problem_file.dump(again), text)

    def test_dump_writes_nested_psd_blocks(self):
        """PSD rows are written as one nested matrix per block."""
        data = json.loads(problem_file.dump(self.instances['ex4']))
        self.assertEqual(data['space'], [{'type': 'psd', 'order': 3}])
        self.assertEqual(len(data['c'][0]), 3)
        self.assertIn('B', data)

    def test_digest_is_stable(self):
        """Loading the same file twice gives the same digest; different instances differ."""
        self.assertEqual(problem_file.digest(problem_file.load(fixture_path('ex3'))),
                         problem_file.digest(self.instances['ex3']))
        self.assertNotEqual(problem_file.digest(self.instances['ex2']), problem_file.digest(self.instances['ex3']))
        self.assertEqual(len(problem_file.digest(self.instances['ex1'])), 16)

    def test_save_and_load(self):
        """save writes the canonical text that load reads back."""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'ex2.json')
            problem_file.save(self.instances['ex2'], path)
            self.assertEqual(problem_file.digest(problem_file.load(path)), problem_file.digest(self.instances['ex2']))

    # --- Test malformed input ---
    def test_malformed_json(self):
        """Truncated JSON raises ParseError."""
        with self.assertRaises(ParseError):
            problem_file.parse('{"version": 1, "space": [')

    def test_unknown_keys_rejected(self):
        """Extra top-level keys are rejected."""
        text = problem_file.dump(self.instances['ex3']).replace('"version": 1', '"version": 1, "extra": 0')
        with self.assertRaises(ParseError):
            problem_file.parse(text)

    def test_unknown_version_rejected(self):
        """Only version 1 is understood."""
        data = json.loads(problem_file.dump(self.instances['ex3']))
        data['version'] = 2
        with self.assertRaises(ParseError):
            problem_file.parse(json.dumps(data))

    def test_wrong_vector_length(self):
        """A c of the wrong length raises DimensionMismatch."""
        data = json.loads(problem_file.dump(self.instances['ex3']))
        data['c'] = data['c'][:4]
        with self.assertRaises(DimensionMismatch):
            problem_file.parse(json.dumps(data))

    def test_missing_file(self):
        """A missing path raises ParseError."""
        with self.assertRaises(ParseError):
            problem_file.load(os.path.join(tempfile.gettempdir(), 'no-such-problem.json'))


if __name__ == '__main__':
    runner = DetailedTestRunner(verbosity=2)
    unittest.main(testRunner=runner)
