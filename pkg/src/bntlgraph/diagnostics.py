"""
Diagnostics Module - Evaluation quantities for fitted models and chains

Predictive log-likelihood of held-out ends, the arrival slack statistic S,
plug-in power-law exponents, mean interarrival, degree histograms, arrival
curves, and the effective-sample-size factor of a scalar trace.
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import fft
from scipy.special import logsumexp

from .core import (
    ArrivalTimes,
    BNTLModel,
    CoupledPYP,
    EdgeEndSequence,
    Geometric,
    OrderedDegrees,
    PYPInduced,
    ShiftedPoisson,
    degree_counts,
    degrees_from_ends,
    make_arrivals,
)
from .errors import DomainError, InsufficientDataError, LabelingError, ParameterError
from .likelihood import log_full_likelihood

if TYPE_CHECKING:
    from .gibbs import SampleArchive


logger = logging.getLogger(__name__)

MIN_TRACE_LENGTH = 10

PREDICTIVE_MODES = ("mle", "posterior", "posterior-mean")


def _as_array(values: Union[OrderedDegrees, ArrivalTimes, Sequence[int], np.ndarray]) -> np.ndarray:
    if isinstance(values, OrderedDegrees):
        return values.degrees
    if isinstance(values, ArrivalTimes):
        return values.times
    return np.asarray(values, dtype=np.int64)


def s_statistic(degrees, times) -> float:
    """
    Mean arrival slack S = (1/(K−1)) Σ_{j>=2} (d̄_{j−1} − T_j).

    Args:
        degrees: Arrival-ordered degrees
        times: Arrival times

    Returns:
        S
    """
    d = _as_array(degrees)
    t = _as_array(times)
    if d.size < 2:
        raise InsufficientDataError("too_few_vertices", "S needs at least two vertices", K=int(d.size))
    return float(np.mean(np.cumsum(d)[:-1] - t[1:]))


def mean_interarrival(times) -> float:
    """(T_K − T_1)/(K − 1)."""
    t = _as_array(times)
    if t.size < 2:
        raise InsufficientDataError("too_few_arrivals", "Mean interarrival needs two arrivals", K=int(t.size))
    return float(t[-1] - t[0]) / (t.size - 1)


@dataclass(frozen=True)
class EtaEstimate:
    """Plug-in power-law exponent, or None with a note when it is undefined."""

    value: Optional[float]
    note: str = ""


def eta_plugin(model: BNTLModel) -> EtaEstimate:
    """
    Plug-in tail exponent η̂ of the degree distribution.

    Coupled PYP: 1 + τ. Finite-mean interarrivals: 1 + (μ − α)/(μ − 1) with
    μ = 1/β (Geometric) or 1 + λ (shifted Poisson). Uncoupled PYP: undefined.

    Args:
        model: Fitted model

    Returns:
        EtaEstimate
    """
    arrivals = model.arrivals
    if isinstance(arrivals, CoupledPYP):
        return EtaEstimate(1.0 + model.alpha, "coupled PYP: eta = 1 + tau")
    if isinstance(arrivals, PYPInduced):
        return EtaEstimate(None, "asymptotic degree distribution of uncoupled PYP arrivals is unknown")
    if isinstance(arrivals, Geometric):
        mu = 1.0 / arrivals.beta
    elif isinstance(arrivals, ShiftedPoisson):
        mu = 1.0 + arrivals.lam
    else:
        raise ParameterError("unknown_family", f"Unsupported arrivals {arrivals!r}")
    if mu <= 1.0:
        raise DomainError("degenerate_interarrival_mean", f"Mean interarrival {mu} <= 1", mu=mu)
    return EtaEstimate(1.0 + (mu - model.alpha) / (mu - 1.0), f"mean interarrival {mu:.6g}")


def degree_histogram(degrees) -> pd.DataFrame:
    """Table of m(d): columns ``degree`` and ``count``."""
    values, counts = degree_counts(_as_array(degrees))
    return pd.DataFrame({"degree": values, "count": counts})


def arrival_curve(times, n: Optional[int] = None) -> pd.DataFrame:
    """
    Vertex count as a step function of the end index: one row (T_j, j) per
    arrival. The curve stays flat from T_K to n.
    """
    t = _as_array(times)
    if n is not None and t.size and t[-1] > n:
        raise DomainError("arrival_after_end", f"T_K = {int(t[-1])} exceeds n = {n}")
    return pd.DataFrame({"step": t, "vertices": np.arange(1, t.size + 1, dtype=np.int64)})


def log_l1_distance(degrees, reference) -> float:
    """
    log of Σ_j |d_j − d^ref_j| / n, floored at 0.5/n so identical sequences
    stay finite.
    """
    d = np.asarray(degrees, dtype=np.int64)
    ref = np.asarray(reference, dtype=np.int64)
    if d.shape != ref.shape:
        raise DomainError("length_mismatch", "Degree sequences differ in length")
    n = float(d.sum())
    distance = float(np.abs(d - ref).sum()) / n
    return math.log(max(distance, 0.5 / n))


# ---- effective sample size -----------------------------------------------


@dataclass(frozen=True)
class EssEstimate:
    """
    Effective sample size of a scalar trace.

    Attributes:
        ess: Effective sample size
        factor: ESS / N clipped to [0, 1]
        length: Trace length N
        flag: Set when the estimate is degenerate (e.g. "constant_trace")
    """

    ess: float
    factor: float
    length: int
    flag: Optional[str] = None


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance at every lag, via zero-padded FFT."""
    n = x.size
    centred = x - x.mean()
    size = fft.next_fast_len(2 * n)
    spectrum = fft.rfft(centred, size)
    acov = fft.irfft(spectrum * np.conjugate(spectrum), size)[:n]
    return acov / n


def ess_estimate(trace: Sequence[float]) -> EssEstimate:
    """
    Geyer initial positive / initial monotone sequence estimator.

    Args:
        trace: Scalar trace of at least MIN_TRACE_LENGTH values

    Returns:
        EssEstimate
    """
    x = np.asarray(trace, dtype=np.float64).reshape(-1)
    n = x.size
    if n < MIN_TRACE_LENGTH:
        raise InsufficientDataError("trace_too_short", f"ESS needs at least {MIN_TRACE_LENGTH} values", length=n)
    if not np.all(np.isfinite(x)):
        raise DomainError("nonfinite_trace", "Trace contains non-finite values")

    acov = _autocovariance(x)
    if acov[0] <= 0.0 or np.ptp(x) == 0.0:
        logger.warning("Constant trace; ESS factor set to 0")
        return EssEstimate(ess=0.0, factor=0.0, length=n, flag="constant_trace")

    mean_var = acov[0] * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n
    rho = np.zeros(n)
    rho_even = 1.0
    rho[0] = rho_even
    rho_odd = 1.0 - (mean_var - acov[1]) / var_plus
    rho[1] = rho_odd

    # initial positive sequence
    t = 1
    while t < n - 2 and rho_even + rho_odd >= 0.0:
        rho_even = 1.0 - (mean_var - acov[t + 1]) / var_plus
        rho_odd = 1.0 - (mean_var - acov[t + 2]) / var_plus
        rho[t + 1] = rho_even
        if rho_even + rho_odd >= 0.0:
            rho[t + 2] = rho_odd
        t += 2
    max_t = t

    # initial monotone sequence
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2

    tau = -1.0 + 2.0 * np.sum(rho[:max_t]) + np.sum(rho[max_t + 1:max_t + 2])
    tau = max(tau, 1.0 / math.log10(max(n, 10)))
    ess = n / tau
    return EssEstimate(ess=float(ess), factor=float(min(ess / n, 1.0)), length=n)


def ess_factor(trace: Sequence[float]) -> float:
    """ESS/N of a scalar trace, in [0, 1] (0 for a constant trace)."""
    return ess_estimate(trace).factor


# ---- predictive log-likelihood ---------------------------------------------


def _extend_profile(
    degrees: np.ndarray,
    times: np.ndarray,
    test: np.ndarray,
) -> Tuple[OrderedDegrees, ArrivalTimes]:
    """
    Append test ends (already in arrival-position ids) to a (d, T) profile.

    New vertices must take ids K+1, K+2, ... in order of first appearance.
    """
    K = degrees.size
    n = int(degrees.sum())
    new_ids = test[test > K]
    if new_ids.size:
        first_new = np.maximum.accumulate(np.concatenate(([K], test)))[:-1]
        bad = np.flatnonzero((test < 1) | (test > first_new + 1))
        if bad.size:
            raise LabelingError(
                "inconsistent_test_labels",
                f"Test end {int(bad[0])} refers to vertex {int(test[bad[0]])} out of order",
                position=int(bad[0]),
            )
    elif np.any(test < 1):
        raise LabelingError("inconsistent_test_labels", "Test ends must be positive vertex ids")

    total = max(K, int(test.max()))
    extended = np.zeros(total, dtype=np.int64)
    extended[:K] = degrees
    extended += np.bincount(test, minlength=total + 1)[1:]
    unique_ids, first = np.unique(test, return_index=True)
    arrival_steps = n + 1 + first[unique_ids > K]
    return OrderedDegrees(extended), ArrivalTimes(np.concatenate((times, arrival_steps)))


def continuation_loglik(
    degrees: np.ndarray,
    times: np.ndarray,
    test: np.ndarray,
    model: BNTLModel,
) -> float:
    """
    log p(test | train profile) under a model: full likelihood of the extended
    profile minus that of the train profile.
    """
    if test.size == 0:
        return 0.0
    d = np.asarray(degrees, dtype=np.int64)
    t = np.asarray(times, dtype=np.int64)
    extended = _extend_profile(d, t, np.asarray(test, dtype=np.int64))
    return log_full_likelihood(extended, model) - log_full_likelihood((OrderedDegrees(d), ArrivalTimes(t)), model)


def predictive_loglik(
    source: Union[BNTLModel, "SampleArchive"],
    train: EdgeEndSequence,
    test: Sequence[int],
    mode: str = "mle",
    vertex_index: Optional[Sequence[int]] = None,
) -> float:
    """
    Predictive log-likelihood of held-out ends that continue ``train``.

    mle: plug-in log p(test | train) at a fitted model.
    posterior: log-mean-exp over archived samples of the continuation
    probability, each sample using its own (σ, T, α, φ).
    posterior-mean: posterior-mean parameters with each sample's (σ, T).

    Args:
        source: Fitted BNTLModel (mle) or SampleArchive (posterior modes)
        train: Training ends
        test: Test ends labelled consistently with ``train``
        mode: "mle", "posterior" or "posterior-mean"
        vertex_index: For archives, observation index of each train vertex
                      (identity when the observation lists train vertices in
                      arrival order)

    Returns:
        Log predictive probability (0 for an empty test set)
    """
    if mode not in PREDICTIVE_MODES:
        raise ParameterError("unknown_predictive_mode", f"Unknown predictive mode '{mode}'")
    test = np.asarray(test, dtype=np.int64).reshape(-1)
    if test.size == 0:
        return 0.0
    degrees, times = degrees_from_ends(train)

    if mode == "mle":
        if not isinstance(source, BNTLModel):
            raise ParameterError("predictive_source", "MLE mode needs a fitted BNTLModel")
        return continuation_loglik(degrees.degrees, times.times, test, source)

    archive = source
    if len(archive) == 0:
        raise InsufficientDataError("empty_archive", "No posterior samples to average over")
    K = degrees.K
    if int(archive.observed_degrees.size) != K:
        raise LabelingError("inconsistent_train", "Archive and train set disagree on the vertex count")
    index = np.arange(K) if vertex_index is None else np.asarray(vertex_index, dtype=np.int64)
    old = test <= K

    means = archive.posterior_means() if mode == "posterior-mean" else None
    values = np.empty(len(archive))
    for s in range(len(archive)):
        sigma = archive.sigma[s]
        position = np.empty(K, dtype=np.int64)
        position[sigma] = np.arange(1, K + 1)
        mapped = test.copy()
        mapped[old] = position[index[test[old] - 1]]
        if means is None:
            model = BNTLModel(archive.alpha[s], make_arrivals(archive.family, **archive.params[s]))
        else:
            params = {k: v for k, v in means.items() if k != "alpha"}
            model = BNTLModel(means["alpha"], make_arrivals(archive.family, **params))
        values[s] = continuation_loglik(archive.ordered_degrees(s), archive.times[s], mapped, model)
    return float(logsumexp(values) - math.log(values.size))
