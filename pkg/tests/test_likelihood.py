"""
Test suite for the likelihood module

Tests covering:
- Sequence probabilities given arrival times
- Degree-profile probabilities with multiplicity counts
- Stick-weight joint densities and their marginal
- Full likelihoods, including the coupled closed form
- Normalisation by exhaustive enumeration of short sequences
"""

import math
import sys
import unittest
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from bntlgraph.core import (
    ArrivalTimes,
    BNTLModel,
    CoupledPYP,
    EdgeEndSequence,
    Geometric,
    OrderedDegrees,
    PYPInduced,
    ShiftedPoisson,
    degrees_from_ends,
)
from bntlgraph.errors import DomainError, InfeasibleError, ParameterError
from bntlgraph.likelihood import (
    StickWeights,
    log_coupled_pyp_likelihood,
    log_degree_prob_given_arrivals,
    log_full_likelihood,
    log_full_likelihood_parts,
    log_joint_with_psi,
    log_multiplicity,
    log_seq_prob_given_arrivals,
    log_seq_prob_sequential,
)


def growth_sequences(n):
    """Every valid edge-end sequence of length n."""
    sequences = [[1]]
    for _ in range(n - 1):
        sequences = [seq + [v] for seq in sequences for v in range(1, max(seq) + 2)]
    return sequences


class TestSequenceProbability(unittest.TestCase):
    """Test cases for log_seq_prob_given_arrivals"""

    def test_forced_sequence(self) -> None:
        """Test d=(2,1), T=(1,3) has probability one for any α"""
        for alpha in (-3.0, 0.0, 0.7):
            self.assertAlmostEqual(log_seq_prob_given_arrivals([2, 1], [1, 3], alpha), 0.0, places=12)

    def test_three_one(self) -> None:
        """Test d=(3,1), T=(1,2), α=0.5 is log 0.375"""
        value = log_seq_prob_given_arrivals(OrderedDegrees([3, 1]), ArrivalTimes([1, 2]), 0.5)
        self.assertAlmostEqual(value, math.log(0.375), places=12)

    def test_two_two(self) -> None:
        """Test d=(2,2), T=(1,2), α=0.5 is log 0.125"""
        self.assertAlmostEqual(log_seq_prob_given_arrivals([2, 2], [1, 2], 0.5), math.log(0.125), places=12)

    def test_single_vertex(self) -> None:
        """Test a single vertex repeated has probability one"""
        self.assertAlmostEqual(log_seq_prob_given_arrivals([5], [1], -2.0), 0.0, places=12)

    def test_infeasible_pair(self) -> None:
        """Test an infeasible (d, T) pair raises"""
        with self.assertRaises(InfeasibleError):
            log_seq_prob_given_arrivals([1, 1, 3], [1, 2, 5], 0.0)

    def test_alpha_out_of_range(self) -> None:
        """Test α = 1 is rejected"""
        with self.assertRaises(ParameterError):
            log_seq_prob_given_arrivals([2, 2], [1, 2], 1.0)

    def test_sequential_agrees(self) -> None:
        """Test the step-by-step product matches the closed form"""
        ends = EdgeEndSequence([1, 2, 1, 3, 2, 2, 4, 1, 3, 5, 2])
        degrees, times = degrees_from_ends(ends)
        for alpha in (-4.0, -0.3, 0.0, 0.45, 0.9):
            self.assertAlmostEqual(
                log_seq_prob_sequential(ends, alpha),
                log_seq_prob_given_arrivals(degrees, times, alpha),
                places=9,
            )


class TestDegreeProbability(unittest.TestCase):
    """Test cases for multiplicities and degree-profile probabilities"""

    def test_two_two(self) -> None:
        """Test d=(2,2), T=(1,2), α=0.5 has degree probability log 0.25"""
        value = log_degree_prob_given_arrivals(OrderedDegrees([2, 2]), ArrivalTimes([1, 2]), 0.5)
        self.assertAlmostEqual(value, math.log(0.25), places=12)

    def test_multiplicity_counts_sequences(self) -> None:
        """Test the multiplicity equals the number of sequences with each profile"""
        counts = {}
        for seq in growth_sequences(7):
            degrees, times = degrees_from_ends(EdgeEndSequence(seq))
            key = (tuple(degrees.degrees.tolist()), tuple(times.times.tolist()))
            counts[key] = counts.get(key, 0) + 1
        for (d, t), count in counts.items():
            value = log_multiplicity(OrderedDegrees(d), ArrivalTimes(t))
            self.assertAlmostEqual(math.exp(value), count, places=8)

    def test_degree_probabilities_sum_to_one_given_arrivals(self) -> None:
        """Test the degree profiles with fixed T form a distribution"""
        times = (1, 2, 4)
        n = 7
        alpha = 0.3
        total = 0.0
        for d1 in range(1, n):
            for d2 in range(1, n - d1):
                d3 = n - d1 - d2
                if d3 < 1 or not (times[1] - 1 <= d1 and times[2] - 1 <= d1 + d2):
                    continue
                total += math.exp(log_degree_prob_given_arrivals(OrderedDegrees([d1, d2, d3]), ArrivalTimes(times), alpha))
        self.assertAlmostEqual(total, 1.0, places=12)


class TestStickWeights(unittest.TestCase):
    """Test cases for StickWeights and log_joint_with_psi"""

    def test_first_weight_must_be_one(self) -> None:
        """Test Ψ_1 != 1 is rejected"""
        with self.assertRaises(DomainError):
            StickWeights([0.5, 0.5])

    def test_probabilities_sum_to_one(self) -> None:
        """Test the categorical weights sum to one at every k"""
        psi = StickWeights([1.0, 0.3, 0.6, 0.1])
        for k in range(1, 5):
            self.assertAlmostEqual(psi.probabilities(k).sum(), 1.0, places=12)
        self.assertTrue(np.allclose(psi.probabilities(2), [0.7, 0.3]))

    def test_marginalises_to_sequence_probability(self) -> None:
        """Test integrating Ψ_2 out recovers the sequence probability times Λ"""
        degrees, times = OrderedDegrees([2, 2]), ArrivalTimes([1, 2])
        arrivals = Geometric(0.5)

        def integrand(p):
            return math.exp(log_joint_with_psi(degrees, times, StickWeights([1.0, p]), 0.5, arrivals))

        value, _ = integrate.quad(integrand, 0.0, 1.0)
        model = BNTLModel(0.5, arrivals)
        expected = math.exp(log_full_likelihood((degrees, times), model))
        self.assertAlmostEqual(value, expected, places=7)

    def test_psi_length_mismatch(self) -> None:
        """Test a stick-weight vector of the wrong length is rejected"""
        with self.assertRaises(DomainError):
            log_joint_with_psi(OrderedDegrees([2, 2]), ArrivalTimes([1, 2]), StickWeights([1.0]), 0.0, Geometric(0.5))


class TestFullLikelihood(unittest.TestCase):
    """Test cases for full likelihoods"""

    def test_coupled_example(self) -> None:
        """Test CoupledPYP(θ=1), α=0.5, Z=(1,2) is log 0.75"""
        value = log_full_likelihood(EdgeEndSequence([1, 2]), BNTLModel(0.5, CoupledPYP(1.0)))
        self.assertAlmostEqual(value, math.log(0.75), places=12)

    def test_geometric_example(self) -> None:
        """Test Geom(0.5), α=0, Z=(1,1) is log 0.5"""
        value = log_full_likelihood(EdgeEndSequence([1, 1]), BNTLModel(0.0, Geometric(0.5)))
        self.assertAlmostEqual(value, math.log(0.5), places=12)

    def test_coupled_closed_form_equals_parts(self) -> None:
        """Test the coupled closed form equals α-part plus arrival part"""
        ends = EdgeEndSequence([1, 1, 2, 3, 1, 2, 4, 4, 1, 5])
        for theta, alpha in ((1.0, 0.5), (12.0, 0.2), (-0.3, 0.6)):
            model = BNTLModel(alpha, CoupledPYP(theta))
            alpha_part, arrival_part = log_full_likelihood_parts(ends, model)
            self.assertAlmostEqual(log_full_likelihood(ends, model), alpha_part + arrival_part, places=9)

    def test_coupled_depends_on_histogram_only(self) -> None:
        """Test permuting degrees leaves the coupled likelihood unchanged"""
        first = log_coupled_pyp_likelihood(np.array([4, 1, 2, 1]), 8, 2.0, 0.4)
        second = log_coupled_pyp_likelihood(np.array([1, 1, 2, 4]), 8, 2.0, 0.4)
        self.assertEqual(first, second)

    def test_coupled_outside_range(self) -> None:
        """Test the coupled form is -inf for θ <= -τ"""
        self.assertEqual(log_coupled_pyp_likelihood(np.array([1, 1]), 2, -0.6, 0.5), -math.inf)

    def test_length_mismatch(self) -> None:
        """Test n different from the total degree is rejected"""
        with self.assertRaises(InfeasibleError):
            log_full_likelihood(EdgeEndSequence([1, 1]), BNTLModel(0.0, Geometric(0.5)), n=3)


@pytest.mark.parametrize(
    "model",
    [
        BNTLModel(0.0, Geometric(0.4)),
        BNTLModel(-1.5, ShiftedPoisson(1.2)),
        BNTLModel(0.6, PYPInduced(2.0, 0.3)),
        BNTLModel(0.35, CoupledPYP(0.8)),
    ],
)
@pytest.mark.parametrize("n", [1, 4, 7])
def test_likelihood_sums_to_one(model, n):
    """Exhaustive enumeration of all length-n sequences sums to one"""
    total = sum(math.exp(log_full_likelihood(EdgeEndSequence(seq), model)) for seq in growth_sequences(n))
    assert total == pytest.approx(1.0, abs=1e-10)


@st.composite
def end_sequences(draw):
    length = draw(st.integers(min_value=1, max_value=30))
    seq = [1]
    for _ in range(length - 1):
        seq.append(draw(st.integers(min_value=1, max_value=max(seq) + 1)))
    return seq


@settings(max_examples=150, deadline=None)
@given(end_sequences(), st.floats(min_value=-20.0, max_value=0.95))
def test_sequential_matches_closed_form(seq, alpha):
    """The predictive-rule product equals the gamma closed form"""
    ends = EdgeEndSequence(seq)
    degrees, times = degrees_from_ends(ends)
    closed = log_seq_prob_given_arrivals(degrees, times, alpha)
    assert log_seq_prob_sequential(ends, alpha) == pytest.approx(closed, rel=1e-9, abs=1e-9)


if __name__ == "__main__":
    unittest.main()
