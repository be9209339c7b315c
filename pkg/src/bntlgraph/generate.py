"""
Generate Module - Forward samplers for BNTL edge-end sequences

Two samplers for BNTL(α, Λ): the sequential predictive rule and the
stick-breaking (products of independent Beta variables) construction. Two
reference urns, Pitman–Yor and Yule–Simon, are kept for equivalence checks.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from .arrivals import sample_interarrival
from .core import (
    ArrivalTimes,
    BNTLModel,
    EdgeEndSequence,
    OrderedDegrees,
    arrival_alpha,
    as_generator,
    degrees_from_ends,
)
from .errors import ParameterError
from .likelihood import StickWeights
from .utils.fenwick import FenwickTree


logger = logging.getLogger(__name__)

RandomState = Union[np.random.Generator, int, None]

# Above this many ends the predictive sampler switches to the Fenwick index
FENWICK_THRESHOLD = 20000

_PSI_LOW = float(np.finfo(np.float64).tiny)
_PSI_HIGH = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class GeneratedTrace:
    """
    A sampled edge-end sequence with its arrival times.

    Attributes:
        ends: Edge-end sequence
        times: Arrival times of the sequence
        psi: Stick weights (stick construction only)
        seed: Seed the generator was built from, when known
    """

    ends: EdgeEndSequence
    times: ArrivalTimes
    psi: Optional[StickWeights] = None
    seed: Optional[int] = None

    @property
    def n(self) -> int:
        return self.ends.n

    @property
    def degrees(self) -> OrderedDegrees:
        return degrees_from_ends(self.ends)[0]


class _ArrivalClock:
    """Draws arrival times lazily, one ahead of the current step."""

    def __init__(self, model: BNTLModel, n: int, rng: np.random.Generator):
        self._arrivals = model.arrivals
        self._alpha = arrival_alpha(model)
        self._n = n
        self._rng = rng
        self.times: List[int] = [1]
        self.next_time = self._draw()

    def _draw(self) -> int:
        last = self.times[-1]
        step = sample_interarrival(
            self._arrivals,
            len(self.times),
            last,
            self._rng,
            alpha=self._alpha,
            horizon=self._n - last,
        )
        return last + step

    def arrive(self) -> None:
        self.times.append(self.next_time)
        self.next_time = self._draw()


def _check_length(n: int) -> None:
    if n < 1:
        raise ParameterError("length_out_of_range", f"n must be at least 1, got {n}", n=n)


def sample_predictive(
    model: BNTLModel,
    n: int,
    rng: RandomState = None,
    use_index: Optional[bool] = None,
) -> GeneratedTrace:
    """
    Sample n ends from the BNTL predictive rule.

    At step i+1 a new vertex arrives iff i+1 is the next arrival time;
    otherwise vertex j is chosen with probability (d_{j,i} − α)/(i − K_i α).

    Args:
        model: BNTL model
        n: Number of ends
        rng: Generator or seed
        use_index: Force (True) or disable (False) the Fenwick index;
                   by default it is used above FENWICK_THRESHOLD ends

    Returns:
        GeneratedTrace without stick weights
    """
    _check_length(n)
    rng, seed = as_generator(rng)
    alpha = model.alpha
    use_index = n > FENWICK_THRESHOLD if use_index is None else use_index

    clock = _ArrivalClock(model, n, rng)
    ends = np.empty(n, dtype=np.int64)
    ends[0] = 1
    counts = np.zeros(n, dtype=np.int64)
    counts[0] = 1
    tree = FenwickTree(n) if use_index else None
    if tree is not None:
        tree.add(0, 1.0 - alpha)
    K = 1

    for i in range(1, n):
        if i + 1 == clock.next_time:
            counts[K] = 1
            if tree is not None:
                tree.add(K, 1.0 - alpha)
            K += 1
            ends[i] = K
            clock.arrive()
            continue

        target = rng.random() * (i - K * alpha)
        if tree is not None:
            j = tree.find(target)
        else:
            j = int(np.searchsorted(np.cumsum(counts[:K] - alpha), target, side="right"))
        j = min(j, K - 1)
        counts[j] += 1
        if tree is not None:
            tree.add(j, 1.0)
        ends[i] = j + 1

    logger.debug(f"Predictive sampler drew n={n}, K={K}")
    return GeneratedTrace(EdgeEndSequence(ends), ArrivalTimes(clock.times), None, seed)


def sample_stick(model: BNTLModel, n: int, rng: RandomState = None) -> GeneratedTrace:
    """
    Sample n ends from the stick-breaking construction.

    Ψ_1 = 1 and Ψ_j ~ Beta(1 − α, T_j − 1 − (j−1)α) at each arrival; the
    categorical table is rescaled as P_{i,k+1} = P_{i,k}(1 − Ψ_{k+1}) with
    P_{k+1,k+1} = Ψ_{k+1}, and non-arrival ends draw from it.

    Args:
        model: BNTL model
        n: Number of ends
        rng: Generator or seed

    Returns:
        GeneratedTrace with stick weights
    """
    _check_length(n)
    rng, seed = as_generator(rng)
    alpha = model.alpha

    clock = _ArrivalClock(model, n, rng)
    ends = np.empty(n, dtype=np.int64)
    ends[0] = 1
    weights = np.zeros(n, dtype=np.float64)
    weights[0] = 1.0
    psi = [1.0]
    cumulative = weights[:1].copy()
    K = 1

    for i in range(1, n):
        if i + 1 == clock.next_time:
            draw = rng.beta(1.0 - alpha, i - K * alpha)
            draw = min(max(float(draw), _PSI_LOW), _PSI_HIGH)
            weights[:K] *= 1.0 - draw
            weights[K] = draw
            psi.append(draw)
            K += 1
            ends[i] = K
            cumulative = np.cumsum(weights[:K])
            clock.arrive()
            continue

        target = rng.random() * cumulative[-1]
        j = min(int(np.searchsorted(cumulative, target, side="right")), K - 1)
        ends[i] = j + 1

    return GeneratedTrace(EdgeEndSequence(ends), ArrivalTimes(clock.times), StickWeights(psi), seed)


def _pick_existing(counts: np.ndarray, K: int, discount: float, rng: np.random.Generator) -> int:
    weights = np.cumsum(counts[:K] - discount)
    return min(int(np.searchsorted(weights, rng.random() * weights[-1], side="right")), K - 1)


def sample_pyp_reference(theta: float, tau: float, n: int, rng: RandomState = None) -> EdgeEndSequence:
    """
    Pitman–Yor urn: after i ends with K vertices, a new vertex w.p.
    (θ + Kτ)/(i + θ), else vertex j w.p. (d_j − τ)/(i + θ).
    """
    if not 0.0 < tau < 1.0 or not theta > -tau:
        raise ParameterError("pyp_out_of_range", f"Need tau in (0, 1) and theta > -tau, got ({theta}, {tau})")
    _check_length(n)
    rng, _ = as_generator(rng)

    ends = np.empty(n, dtype=np.int64)
    ends[0] = 1
    counts = np.zeros(n, dtype=np.int64)
    counts[0] = 1
    K = 1
    for i in range(1, n):
        if rng.random() * (i + theta) < theta + K * tau:
            counts[K] = 1
            K += 1
            ends[i] = K
        else:
            j = _pick_existing(counts, K, tau, rng)
            counts[j] += 1
            ends[i] = j + 1
    return EdgeEndSequence(ends)


def sample_ys_reference(beta: float, n: int, rng: RandomState = None) -> EdgeEndSequence:
    """
    Yule–Simon urn: a new vertex w.p. β, else vertex j w.p. d_j / i.

    Size-biased picks copy the vertex of a uniformly chosen earlier end.
    """
    if not 0.0 < beta < 1.0:
        raise ParameterError("beta_out_of_range", f"beta must lie in (0, 1), got {beta}")
    _check_length(n)
    rng, _ = as_generator(rng)

    ends = np.empty(n, dtype=np.int64)
    ends[0] = 1
    K = 1
    for i in range(1, n):
        if rng.random() < beta:
            K += 1
            ends[i] = K
        else:
            ends[i] = ends[rng.integers(i)]
    return EdgeEndSequence(ends)
