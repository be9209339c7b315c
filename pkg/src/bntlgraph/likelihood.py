"""
Likelihood Module - Closed-form BNTL log-likelihood kernels

The sequence probability given arrivals, the joint with stick weights,
the degree-sequence probability with multiplicity counts, and the full
likelihoods of an observed edge-end sequence.

``log_seq_prob_given_arrivals`` is the probability of ONE edge-end sequence
consistent with (d, T); the probability of the arrival-ordered degree profile
multiplies it by the number of such sequences
(``log_degree_prob_given_arrivals``).
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import betaln, gammaln

from .arrivals import log_arrival_sequence_prob, log_pmf, log_survival
from .core import (
    ArrivalTimes,
    BNTLModel,
    CoupledPYP,
    EdgeEndSequence,
    InterarrivalModel,
    OrderedDegrees,
    degree_counts,
    degrees_from_ends,
    require_feasible,
)
from .errors import DomainError, InfeasibleError, ParameterError, ZeroMass


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StickWeights:
    """
    Stick weights Ψ_1..Ψ_K with Ψ_1 = 1 and Ψ_j ∈ (0, 1) for j >= 2.
    """

    psi: np.ndarray

    def __post_init__(self) -> None:
        psi = np.array(self.psi, dtype=np.float64).reshape(-1)
        if psi.size == 0 or psi[0] != 1.0:
            raise DomainError("psi_first_not_one", "Psi_1 must equal 1")
        if np.any((psi[1:] <= 0.0) | (psi[1:] >= 1.0)):
            raise DomainError("psi_out_of_range", "Psi_j must lie in (0, 1) for j >= 2")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    def __len__(self) -> int:
        return int(self.psi.size)

    def probabilities(self, k: Optional[int] = None) -> np.ndarray:
        """
        Categorical weights P_{j,k} = Ψ_j Π_{ℓ=j+1..k} (1 − Ψ_ℓ).

        Args:
            k: Number of vertices present (default: all)

        Returns:
            Array of length k summing to 1
        """
        k = self.psi.size if k is None else k
        psi = self.psi[:k]
        tail = np.concatenate((np.cumprod((1.0 - psi[::-1]))[::-1][1:], [1.0]))
        return psi * tail


def _check_alpha(alpha: float) -> None:
    if not (alpha < 1.0 and np.isfinite(alpha)):
        raise ParameterError("alpha_out_of_range", f"alpha must be < 1, got {alpha}", alpha=alpha)


def _coerce(degrees, times) -> Tuple[OrderedDegrees, ArrivalTimes]:
    if not isinstance(degrees, OrderedDegrees):
        degrees = OrderedDegrees(degrees)
    if not isinstance(times, ArrivalTimes):
        times = ArrivalTimes(times)
    require_feasible(degrees, times)
    return degrees, times


def log_seq_prob_given_arrivals(degrees: OrderedDegrees, times: ArrivalTimes, alpha: float) -> float:
    """
    Log probability of one edge-end sequence with profile (d, T).

    log Γ(d_1−α) − log Γ(n−Kα)
      + Σ_{j>=2} [log Γ(T_j−jα) + log Γ(d_j−α) − log Γ(T_j−1−(j−1)α) − log Γ(1−α)]

    Args:
        degrees: Arrival-ordered degrees
        times: Arrival times (feasible with degrees)
        alpha: Discount, α < 1

    Returns:
        Log probability
    """
    _check_alpha(alpha)
    degrees, times = _coerce(degrees, times)
    d = degrees.degrees.astype(np.float64)
    t = times.times[1:].astype(np.float64)
    K, n = degrees.K, degrees.n
    j = np.arange(2, K + 1, dtype=np.float64)

    log_gamma_one = gammaln(1.0 - alpha)
    total = np.sum(gammaln(d - alpha)) - gammaln(n - K * alpha)
    total += np.sum(gammaln(t - j * alpha) - gammaln(t - 1.0 - (j - 1.0) * alpha)) - (K - 1) * log_gamma_one
    return float(total)


def log_seq_prob_sequential(ends: EdgeEndSequence, alpha: float) -> float:
    """
    Log probability of an end sequence given its arrivals, accumulated step by
    step from the predictive rule: each non-arrival end i+1 picks vertex j
    with probability (d_{j,i} − α)/(i − K_i α).

    Args:
        ends: Edge-end sequence
        alpha: Discount

    Returns:
        Log probability (equal to ``log_seq_prob_given_arrivals``)
    """
    _check_alpha(alpha)
    z = ends.ends
    n = z.size
    # occurrence index of each end within its vertex (0 for the arrival)
    order = np.argsort(z, kind="stable")
    sorted_z = z[order]
    group_start = np.concatenate(([0], np.flatnonzero(np.diff(sorted_z)) + 1))
    starts = np.repeat(group_start, np.diff(np.append(group_start, n)))
    occurrence = np.empty(n, dtype=np.int64)
    occurrence[order] = np.arange(n) - starts

    steps = np.arange(n, dtype=np.float64)
    vertices_before = np.concatenate(([0], np.maximum.accumulate(z)[:-1])).astype(np.float64)
    reuse = occurrence > 0
    numerators = occurrence[reuse] - alpha
    denominators = steps[reuse] - vertices_before[reuse] * alpha
    return float(np.sum(np.log(numerators)) - np.sum(np.log(denominators)))


def log_joint_with_psi(
    degrees: OrderedDegrees,
    times: ArrivalTimes,
    psi: StickWeights,
    alpha: float,
    arrivals: InterarrivalModel,
    n: Optional[int] = None,
) -> float:
    """
    Joint log density of the sequence, the arrival times and the stick weights.

    Σ_{j>=2} [(d_j−α−1) log Ψ_j + (d̄_{j−1}−(j−1)α−1) log(1−Ψ_j)
              − log B(1−α, T_j−1−(j−1)α) + log Λ(Δ_j)] + log Λ(T_{K+1} > n)

    Args:
        degrees: Arrival-ordered degrees
        times: Arrival times
        psi: Stick weights
        alpha: Discount
        arrivals: Interarrival model
        n: Number of ends (defaults to d̄_K)

    Returns:
        Log joint density
    """
    _check_alpha(alpha)
    degrees, times = _coerce(degrees, times)
    n = degrees.n if n is None else n
    if len(psi) != degrees.K:
        raise DomainError("psi_length_mismatch", "One stick weight per vertex is required")
    coupled_alpha = alpha if isinstance(arrivals, CoupledPYP) else None

    K = degrees.K
    t = times.times.astype(np.float64)
    total = log_survival(arrivals, n - int(t[-1]), K, int(t[-1]), alpha=coupled_alpha)
    if K == 1:
        return float(total)

    j = np.arange(2, K + 1, dtype=np.float64)
    d = degrees.degrees[1:].astype(np.float64)
    left = degrees.cumsums[:-1].astype(np.float64)
    p = psi.psi[1:]
    t_j = t[1:]
    total += np.sum(
        (d - alpha - 1.0) * np.log(p)
        + (left - (j - 1.0) * alpha - 1.0) * np.log1p(-p)
        - betaln(1.0 - alpha, t_j - 1.0 - (j - 1.0) * alpha)
    )
    total += np.sum(log_pmf(arrivals, j - 1.0, np.diff(t), t[:-1], alpha=coupled_alpha))
    return float(total)


def log_multiplicity(degrees: OrderedDegrees, times: ArrivalTimes) -> float:
    """
    log of the number of end sequences with profile (d, T):
    Σ_{j>=2} log C(d̄_j − T_j, d_j − 1).
    """
    if degrees.K == 1:
        return 0.0
    top = (degrees.cumsums[1:] - times.times[1:]).astype(np.float64)
    choose = (degrees.degrees[1:] - 1).astype(np.float64)
    if np.any(choose > top) or np.any(top < 0):
        return ZeroMass("binomial_undefined")
    return float(np.sum(gammaln(top + 1.0) - gammaln(choose + 1.0) - gammaln(top - choose + 1.0)))


def log_degree_prob_given_arrivals(degrees: OrderedDegrees, times: ArrivalTimes, alpha: float) -> float:
    """
    Log probability of the arrival-ordered degree profile given T.

    Args:
        degrees: Arrival-ordered degrees
        times: Arrival times
        alpha: Discount

    Returns:
        log_seq_prob_given_arrivals + log multiplicity
    """
    degrees, times = _coerce(degrees, times)
    return log_seq_prob_given_arrivals(degrees, times, alpha) + log_multiplicity(degrees, times)


def log_coupled_pyp_likelihood(degrees: Union[OrderedDegrees, np.ndarray], n: int, theta: float, tau: float) -> float:
    """
    Closed likelihood of an end sequence under the coupled PYP model:

    log Γ(1+θ) − log Γ(n+θ) + Σ_{j=1}^{K−1} log(θ + jτ)
      + Σ_d m(d) log Γ(d−τ) − K log Γ(1−τ)

    Depends on the data only through the degree histogram.

    Args:
        degrees: Degrees (any order)
        n: Number of ends
        theta: Concentration, θ > −τ
        tau: Discount, τ ∈ (0, 1)

    Returns:
        Log likelihood (−inf outside the parameter range)
    """
    if not (0.0 < tau < 1.0 and theta > -tau):
        return -math.inf
    d = degrees.degrees if isinstance(degrees, OrderedDegrees) else np.asarray(degrees)
    values, counts = degree_counts(d)
    K = int(counts.sum())
    j = np.arange(1, K, dtype=np.float64)
    total = (
        gammaln(1.0 + theta)
        - gammaln(n + theta)
        + np.sum(np.log(theta + j * tau))
        + np.dot(counts, gammaln(values - tau))
        - K * gammaln(1.0 - tau)
    )
    return float(total)


def log_full_likelihood_parts(
    data: Union[EdgeEndSequence, Tuple[OrderedDegrees, ArrivalTimes]],
    model: BNTLModel,
    n: Optional[int] = None,
) -> Tuple[float, float]:
    """
    The α-part and the arrival part of the full likelihood.

    Args:
        data: Edge-end sequence or (degrees, times)
        model: BNTL model
        n: Number of ends (defaults to d̄_K)

    Returns:
        (log p_α(Z | T), log Λ_φ(T))
    """
    degrees, times = _unpack(data)
    n = degrees.n if n is None else n
    coupled_alpha = model.alpha if isinstance(model.arrivals, CoupledPYP) else None
    alpha_part = log_seq_prob_given_arrivals(degrees, times, model.alpha)
    arrival_part = log_arrival_sequence_prob(model.arrivals, times, n, alpha=coupled_alpha)
    return alpha_part, arrival_part


def log_full_likelihood(
    data: Union[EdgeEndSequence, Tuple[OrderedDegrees, ArrivalTimes]],
    model: BNTLModel,
    n: Optional[int] = None,
) -> float:
    """
    Log likelihood of an observed edge-end sequence under a BNTL model.

    Uncoupled families: α-part + arrival part. Coupled PYP: the closed coupled
    form, which equals that sum at τ = α.

    Args:
        data: Edge-end sequence or (degrees, times)
        model: BNTL model
        n: Number of ends (defaults to d̄_K)

    Returns:
        Log likelihood
    """
    degrees, times = _unpack(data)
    n = degrees.n if n is None else n
    if n != degrees.n:
        raise InfeasibleError("length_mismatch", f"n = {n} differs from total degree {degrees.n}")
    if isinstance(model.arrivals, CoupledPYP):
        return log_coupled_pyp_likelihood(degrees, n, model.arrivals.theta, model.alpha)
    alpha_part, arrival_part = log_full_likelihood_parts((degrees, times), model, n)
    return alpha_part + arrival_part


def _unpack(data) -> Tuple[OrderedDegrees, ArrivalTimes]:
    if isinstance(data, EdgeEndSequence):
        return degrees_from_ends(data)
    degrees, times = data
    return _coerce(degrees, times)
