"""
Test suite for the utils package

Tests covering:
- Slice sampling of bounded and unbounded targets
- Bounded scalar and nested maximisation
- Fenwick tree updates and lookups
- Logging setup
"""

import logging
import math
import shutil
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from bntlgraph.errors import InvariantViolation
from bntlgraph.utils.fenwick import FenwickTree
from bntlgraph.utils.logger import LOGGER_NAME, get_logger, setup_logging
from bntlgraph.utils.optimize import maximize_nested, maximize_scalar
from bntlgraph.utils.slice_sampling import slice_sample


def run_slice(log_density, x0, draws, seed, **kwargs):
    rng = np.random.default_rng(seed)
    values = np.empty(draws)
    x = x0
    for i in range(draws):
        x, _ = slice_sample(x, log_density, rng, **kwargs)
        values[i] = x
    return values


class TestSliceSample(unittest.TestCase):
    """Test cases for slice_sample"""

    def test_standard_normal(self) -> None:
        """Test draws from N(0, 1) have the right mean and variance"""
        values = run_slice(lambda x: -0.5 * x * x, 3.0, 6000, seed=1)
        self.assertAlmostEqual(values[500:].mean(), 0.0, delta=0.1)
        self.assertAlmostEqual(values[500:].var(), 1.0, delta=0.15)

    def test_bounded_beta(self) -> None:
        """Test a Beta(2, 5) target stays inside (0, 1) with mean 2/7"""
        log_density = lambda x: stats.beta.logpdf(x, 2.0, 5.0) if 0.0 < x < 1.0 else -math.inf
        values = run_slice(log_density, 0.5, 5000, seed=2, width=0.3, lower=0.0, upper=1.0)
        self.assertTrue(np.all((values > 0.0) & (values < 1.0)))
        self.assertAlmostEqual(values[500:].mean(), 2 / 7, delta=0.03)

    def test_returns_log_density(self) -> None:
        """Test the returned log density belongs to the returned point"""
        x, value = slice_sample(0.2, lambda x: -abs(x), np.random.default_rng(3))
        self.assertAlmostEqual(value, -abs(x))

    def test_start_outside_support(self) -> None:
        """Test starting where the density is zero is an invariant violation"""
        with self.assertRaises(InvariantViolation):
            slice_sample(2.0, lambda x: -math.inf if x > 1.0 else 0.0, np.random.default_rng(0))


class TestMaximize(unittest.TestCase):
    """Test cases for maximize_scalar and maximize_nested"""

    def test_interior(self) -> None:
        """Test an interior maximum of a concave function"""
        result = maximize_scalar(lambda x: -(x - 0.3) ** 2, -5.0, 5.0)
        self.assertAlmostEqual(result.x, 0.3, places=6)
        self.assertFalse(result.at_boundary)

    def test_boundary(self) -> None:
        """Test an increasing function peaks on the upper bound"""
        result = maximize_scalar(lambda x: x, 0.0, 1.0)
        self.assertTrue(result.at_boundary)
        self.assertAlmostEqual(result.x, 1.0, places=5)

    def test_infinite_values(self) -> None:
        """Test -inf regions do not derail the search"""
        result = maximize_scalar(lambda x: -math.inf if x < 0.5 else -(x - 0.8) ** 2, 0.0, 2.0)
        self.assertAlmostEqual(result.x, 0.8, places=5)

    def test_nested(self) -> None:
        """Test profiling recovers a joint maximum with dependent bounds"""
        outer, inner = maximize_nested(
            lambda a, b: -(a - 1.0) ** 2 - (b - 2.0 * a) ** 2,
            (-3.0, 3.0),
            lambda a: (a - 5.0, a + 5.0),
        )
        self.assertAlmostEqual(outer.x, 1.0, places=4)
        self.assertAlmostEqual(inner.x, 2.0, places=4)


class TestFenwickTree(unittest.TestCase):
    """Test cases for FenwickTree"""

    def test_prefix_sums(self) -> None:
        """Test prefix sums after point updates"""
        tree = FenwickTree(5)
        for index, weight in enumerate([3.0, 1.0, 0.0, 2.0, 4.0]):
            tree.add(index, weight)
        self.assertEqual(tree.total, 10.0)
        self.assertEqual(tree.prefix_sum(0), 3.0)
        self.assertEqual(tree.prefix_sum(3), 6.0)
        self.assertEqual(tree.prefix_sum(4), 10.0)

    def test_find(self) -> None:
        """Test find returns the first slot whose prefix sum exceeds the value"""
        tree = FenwickTree(5)
        for index, weight in enumerate([3.0, 1.0, 0.0, 2.0, 4.0]):
            tree.add(index, weight)
        self.assertEqual(tree.find(0.0), 0)
        self.assertEqual(tree.find(2.999), 0)
        self.assertEqual(tree.find(3.0), 1)
        self.assertEqual(tree.find(4.0), 3)
        self.assertEqual(tree.find(9.5), 4)

    def test_bounds(self) -> None:
        """Test invalid capacities and indices"""
        with self.assertRaises(ValueError):
            FenwickTree(0)
        with self.assertRaises(IndexError):
            FenwickTree(3).add(3, 1.0)

    @given(st.lists(st.integers(min_value=0, max_value=20), min_size=1, max_size=60), st.floats(0.0, 1.0))
    @settings(max_examples=60, deadline=None)
    def test_find_matches_cumsum(self, weights, fraction) -> None:
        """Test find agrees with a search over cumulative sums"""
        if sum(weights) == 0:
            return
        tree = FenwickTree(len(weights))
        for index, weight in enumerate(weights):
            tree.add(index, float(weight))
        value = min(fraction * sum(weights), sum(weights) - 0.5)
        expected = int(np.searchsorted(np.cumsum(weights), value, side="right"))
        self.assertEqual(tree.find(value), expected)


class TestLogging(unittest.TestCase):
    """Test cases for setup_logging and get_logger"""

    def setUp(self) -> None:
        self.temp_dir = Path(tempfile.mkdtemp())

    def tearDown(self) -> None:
        setup_logging(console_output=False)
        shutil.rmtree(self.temp_dir)

    def test_handlers_replaced(self) -> None:
        """Test repeated setup does not stack handlers"""
        setup_logging(logging.DEBUG)
        logger = setup_logging("WARNING")
        self.assertEqual(len(logger.handlers), 1)
        self.assertEqual(logger.level, logging.WARNING)

    def test_file_handler(self) -> None:
        """Test messages reach the log file"""
        log_file = self.temp_dir / "logs" / "run.log"
        setup_logging("INFO", log_file=str(log_file), console_output=False)
        get_logger("tests").info("chain started")
        for handler in logging.getLogger(LOGGER_NAME).handlers:
            handler.flush()
        self.assertIn("chain started", log_file.read_text(encoding="utf-8"))

    def test_logger_names(self) -> None:
        """Test module loggers live under the package logger"""
        self.assertEqual(get_logger("gibbs").name, "bntlgraph.gibbs")
        self.assertEqual(get_logger("bntlgraph.mle").name, "bntlgraph.mle")


if __name__ == "__main__":
    unittest.main()
