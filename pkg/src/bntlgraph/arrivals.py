"""
Arrivals Module - The arrival-time law Λ^φ

Probability mass, survival, sampling, posterior updates and maximum-likelihood
fits for the interarrival families, under the Markov factorisation
Λ(T) = Π_j Λ_j(Δ_j | T_{j−1}). Everything is computed in log space through
log-gamma; Γ itself is never evaluated.

Index convention: ``j`` is the number of vertices present before the arrival,
so the arrival of vertex j+1 after T_j is scored with ``log_pmf(model, j, s, T_j)``.
The coupled PYP family reads its discount from the BNTL α, passed as ``alpha``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .core import (
    ArrivalFamily,
    ArrivalTimes,
    CoupledPYP,
    Geometric,
    InterarrivalModel,
    PYPInduced,
    ShiftedPoisson,
)
from .errors import DomainError, InfeasibleError, InsufficientDataError, ParameterError
from .priors import ArrivalPriors
from .utils.optimize import maximize_nested, maximize_scalar
from .utils.slice_sampling import slice_sample


logger = logging.getLogger(__name__)

ArrayLike = Union[int, float, np.ndarray]

# Optimizer bounds for PYP-induced arrivals
THETA_MAX = 1e4
COUPLED_THETA_MAX = 1e7
BOUND_EPS = 1e-6

# Largest interarrival the inversion sampler will return
_MAX_INTERARRIVAL = 2 ** 53


def _pyp_params(model: InterarrivalModel, alpha: Optional[float]) -> Tuple[float, float]:
    if isinstance(model, PYPInduced):
        return model.theta, model.tau
    if alpha is None:
        raise ParameterError("missing_alpha", "Coupled PYP arrivals need the BNTL alpha")
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha_out_of_range", f"Coupled PYP needs alpha in (0, 1), got {alpha}")
    if not model.theta > -alpha:
        raise ParameterError("theta_out_of_range", f"Coupled PYP needs theta > -alpha, got {model.theta}")
    return model.theta, alpha


def _as_output(value: np.ndarray) -> Union[float, np.ndarray]:
    if np.ndim(value) == 0:
        return float(value)
    return value


def _pyp_base(j: np.ndarray, t_prev: np.ndarray, tau: float) -> np.ndarray:
    base = t_prev - j * tau
    if np.any(base <= 0):
        raise DomainError(
            "infeasible_pyp_state",
            "PYP arrival state has T_prev - j*tau <= 0",
            tau=tau,
        )
    return base


def log_pmf(
    model: InterarrivalModel,
    j: ArrayLike,
    s: ArrayLike,
    t_prev: ArrayLike,
    alpha: Optional[float] = None,
) -> Union[float, np.ndarray]:
    """
    Log probability that the next interarrival equals ``s``.

    Broadcasts over array arguments.

    Args:
        model: Interarrival model
        j: Number of vertices present before the arrival (>= 1)
        s: Interarrival value (>= 1)
        t_prev: Previous arrival time
        alpha: BNTL discount, needed by the coupled PYP family

    Returns:
        Log probability (float or array)
    """
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 1):
        raise DomainError("interarrival_below_one", "Interarrivals are at least 1")

    if isinstance(model, Geometric):
        out = math.log(model.beta) + (s - 1.0) * math.log1p(-model.beta)
    elif isinstance(model, ShiftedPoisson):
        out = stats.poisson.logpmf(s - 1.0, model.lam)
    elif isinstance(model, (PYPInduced, CoupledPYP)):
        theta, tau = _pyp_params(model, alpha)
        j = np.asarray(j, dtype=np.float64)
        t_prev = np.asarray(t_prev, dtype=np.float64)
        if np.any(j < 1) or np.any(t_prev < 1):
            raise DomainError("invalid_pyp_index", "PYP arrivals need j >= 1 and T_prev >= 1")
        base = _pyp_base(j, t_prev, tau)
        out = (
            np.log(theta + j * tau)
            + gammaln(theta + t_prev)
            + gammaln(base + s - 1.0)
            - gammaln(theta + t_prev + s)
            - gammaln(base)
        )
    else:
        raise ParameterError("unknown_family", f"Unsupported arrivals {model!r}")
    return _as_output(np.asarray(out, dtype=np.float64))


def log_survival(
    model: InterarrivalModel,
    s: ArrayLike,
    j: ArrayLike,
    t_prev: ArrayLike,
    alpha: Optional[float] = None,
) -> Union[float, np.ndarray]:
    """
    Log probability that the next interarrival exceeds ``s``.

    Args:
        model: Interarrival model
        s: Threshold (>= 0); s = 0 gives 0
        j: Number of vertices present
        t_prev: Previous arrival time
        alpha: BNTL discount, needed by the coupled PYP family

    Returns:
        log P(Δ > s)
    """
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise DomainError("negative_survival_threshold", "Survival threshold must be >= 0")

    if isinstance(model, Geometric):
        out = s * math.log1p(-model.beta)
    elif isinstance(model, ShiftedPoisson):
        # P(Δ > s) = P(Δ − 1 >= s)
        out = np.where(s > 0, stats.poisson.logsf(s - 1.0, model.lam), 0.0)
    elif isinstance(model, (PYPInduced, CoupledPYP)):
        theta, tau = _pyp_params(model, alpha)
        j = np.asarray(j, dtype=np.float64)
        t_prev = np.asarray(t_prev, dtype=np.float64)
        base = _pyp_base(j, t_prev, tau)
        out = gammaln(base + s) - gammaln(base) + gammaln(t_prev + theta) - gammaln(t_prev + s + theta)
    else:
        raise ParameterError("unknown_family", f"Unsupported arrivals {model!r}")
    return _as_output(np.asarray(out, dtype=np.float64))


def sample_interarrival(
    model: InterarrivalModel,
    j: int,
    t_prev: int,
    rng: np.random.Generator,
    alpha: Optional[float] = None,
    horizon: Optional[int] = None,
) -> int:
    """
    Draw the next interarrival.

    Geometric and shifted-Poisson draws use numpy's samplers. PYP-induced
    draws invert the closed-form survival function: Δ = min{s : P(Δ > s) < U},
    found by doubling then bisection, which has the same law as stepping the
    urn one end at a time.

    Args:
        model: Interarrival model
        j: Number of vertices present
        t_prev: Previous arrival time
        rng: Random generator
        alpha: BNTL discount for the coupled PYP family
        horizon: When given, any draw beyond it is returned as horizon + 1

    Returns:
        Interarrival (>= 1)
    """
    if isinstance(model, Geometric):
        draw = int(rng.geometric(model.beta))
    elif isinstance(model, ShiftedPoisson):
        draw = 1 + int(rng.poisson(model.lam))
    else:
        log_u = -rng.exponential()
        cap = _MAX_INTERARRIVAL if horizon is None else max(int(horizon), 1)

        def exceeds(s: int) -> bool:
            return log_survival(model, s, j, t_prev, alpha=alpha) >= log_u

        if exceeds(cap):
            draw = cap + 1
        else:
            hi = 1
            while exceeds(hi):
                hi = min(2 * hi, cap)
            lo = hi // 2
            # invariant: exceeds(lo) (or lo == 0), not exceeds(hi)
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if exceeds(mid):
                    lo = mid
                else:
                    hi = mid
            draw = hi
    if horizon is not None:
        draw = min(draw, int(horizon) + 1)
    return draw


def _check_sequence(times: ArrivalTimes, n: int) -> np.ndarray:
    t = times.times if isinstance(times, ArrivalTimes) else ArrivalTimes(times).times
    if t[-1] > n:
        raise InfeasibleError("arrival_after_end", f"T_K = {int(t[-1])} exceeds n = {n}", n=n)
    return t


def log_arrival_sequence_prob(
    model: InterarrivalModel,
    times: ArrivalTimes,
    n: int,
    alpha: Optional[float] = None,
) -> float:
    """
    log Λ_φ(T) for an observed prefix of length n, including the censored
    event T_{K+1} > n.

    Args:
        model: Interarrival model
        times: Arrival times with T_K <= n
        n: Number of observed ends
        alpha: BNTL discount for the coupled PYP family

    Returns:
        Log probability of the arrival sequence
    """
    t = _check_sequence(times, n)
    K = t.size
    total = log_survival(model, n - int(t[-1]), K, int(t[-1]), alpha=alpha)
    if K > 1:
        j = np.arange(1, K)
        total += float(np.sum(log_pmf(model, j, np.diff(t), t[:-1], alpha=alpha)))
    return float(total)


def pyp_sequence_logprob(theta: float, tau: float, times: np.ndarray, n: int) -> float:
    """
    log Λ(T) for PYP-induced arrivals from raw parameters, without model
    construction; returns −inf outside θ > −τ, τ ∈ (0, 1).

    Args:
        theta: Concentration
        tau: Discount of the arrival urn
        times: Arrival-time array with T_K <= n
        n: Number of ends

    Returns:
        Log probability
    """
    if not (0.0 < tau < 1.0 and theta > -tau):
        return -math.inf
    t = np.asarray(times, dtype=np.float64)
    K = t.size
    # Product over urn steps: Γ(1+θ)/Γ(n+θ) Π_{j<K}(θ+jτ) Π_{non-arrival i}(i − K_i τ)
    j = np.arange(1, K + 1, dtype=np.float64)
    ends = np.append(t[1:] - 1.0, float(n))
    run_terms = gammaln(ends - j * tau) - gammaln(t - j * tau)
    total = (
        gammaln(1.0 + theta)
        - gammaln(n + theta)
        + np.sum(np.log(theta + j[:-1] * tau))
        + np.sum(run_terms)
    )
    return float(total)


def _slice_theta(theta: float, tau: float, t: np.ndarray, n: int, priors: ArrivalPriors,
                 rng: np.random.Generator, width: float, max_steps_out: int) -> float:
    def target(value: float) -> float:
        return pyp_sequence_logprob(value, tau, t, n) + priors.log_prior_theta(value, tau)

    new_theta, _ = slice_sample(
        theta, target, rng, width=width, max_steps_out=max_steps_out, lower=-tau, upper=priors.theta_max
    )
    return new_theta


def _slice_tau(theta: float, tau: float, t: np.ndarray, n: int, priors: ArrivalPriors,
               rng: np.random.Generator, width: float, max_steps_out: int) -> float:
    def target(value: float) -> float:
        return pyp_sequence_logprob(theta, value, t, n) + priors.log_prior_pyp(theta, value)

    new_tau, _ = slice_sample(
        tau, target, rng, width=width, max_steps_out=max_steps_out, lower=max(0.0, -theta), upper=1.0
    )
    return new_tau


def _censored_poisson_tail(lam: float, threshold: int, rng: np.random.Generator) -> int:
    """Draw X ~ Poisson(λ) conditioned on X >= threshold."""
    if threshold <= 0:
        return int(rng.poisson(lam))
    tail = stats.poisson.sf(threshold - 1, lam)
    if tail <= 0.0:
        return int(threshold)
    value = stats.poisson.isf(tail * rng.random(), lam)
    return int(max(value, threshold))


def posterior_update_arrival_params(
    model: InterarrivalModel,
    times: ArrivalTimes,
    n: int,
    priors: ArrivalPriors,
    rng: np.random.Generator,
    alpha: Optional[float] = None,
    theta_width: float = 1.0,
    tau_width: float = 0.1,
    max_steps_out: int = 50,
) -> InterarrivalModel:
    """
    One posterior update of the arrival parameters given T.

    Geometric: exact Beta(a + K − 1, b + n − K) draw. Shifted Poisson: the
    censored interarrival Δ_{K+1} > n − T_K is drawn first, then λ from its
    Gamma full conditional. PYP-induced: one slice move for θ, then τ.
    Coupled PYP: one slice move for θ (τ is α).

    Args:
        model: Current interarrival model
        times: Current arrival times
        n: Number of ends
        priors: Prior hyperparameters
        rng: Random generator
        alpha: BNTL discount (coupled family)
        theta_width, tau_width: Slice widths
        max_steps_out: Slice step-out budget

    Returns:
        Updated interarrival model
    """
    t = _check_sequence(times, n)
    K = t.size

    if isinstance(model, Geometric):
        a, b = beta_posterior_params(priors, K, n)
        beta = float(rng.beta(a, b))
        beta = min(max(beta, 1e-300), 1.0 - 1e-16)
        return Geometric(beta)

    if isinstance(model, ShiftedPoisson):
        observed = int(t[-1]) - K
        censored = _censored_poisson_tail(model.lam, n - int(t[-1]), rng)
        shape = priors.lam_shape + observed + censored
        rate = priors.lam_rate + K
        lam = float(rng.gamma(shape, 1.0 / rate))
        return ShiftedPoisson(max(lam, 1e-300))

    if isinstance(model, PYPInduced):
        theta = _slice_theta(model.theta, model.tau, t, n, priors, rng, theta_width, max_steps_out)
        tau = _slice_tau(theta, model.tau, t, n, priors, rng, tau_width, max_steps_out)
        return PYPInduced(theta, tau)

    if isinstance(model, CoupledPYP):
        _, tau = _pyp_params(model, alpha)
        theta = _slice_theta(model.theta, tau, t, n, priors, rng, theta_width, max_steps_out)
        return CoupledPYP(theta)

    raise ParameterError("unknown_family", f"Unsupported arrivals {model!r}")


def beta_posterior_params(priors: ArrivalPriors, K: int, n: int) -> Tuple[float, float]:
    """Beta posterior parameters of β given K arrivals in n ends."""
    return priors.beta_a + K - 1, priors.beta_b + n - K


@dataclass
class ArrivalFit:
    """
    Estimated arrival parameters.

    Attributes:
        arrivals: Fitted interarrival model
        log_likelihood: log Λ(T) at the estimate (plus log prior for MAP fits)
        at_boundary: Whether any parameter hit a boundary
        flags: Per-parameter notes (e.g. {"beta": "boundary"})
    """

    arrivals: InterarrivalModel
    log_likelihood: float
    at_boundary: bool = False
    flags: Dict[str, str] = field(default_factory=dict)


def _clip_open(value: float, lower: float, upper: float, name: str, flags: Dict[str, str]) -> float:
    eps = 1e-9
    if value <= lower:
        flags[name] = "boundary"
        return lower + eps
    if value >= upper:
        flags[name] = "boundary"
        return upper - eps
    return value


def fit_arrivals_mle(
    family: Union[ArrivalFamily, str],
    times: ArrivalTimes,
    n: int,
    priors: Optional[ArrivalPriors] = None,
    alpha: Optional[float] = None,
    geometric_estimator: str = "closed-form",
    theta_max: float = THETA_MAX,
) -> ArrivalFit:
    """
    Maximum-likelihood (or MAP, when ``priors`` is given) arrival parameters.

    Geometric, "censored": β̂ = (K−1)/(n−1), the root of the score of the
    full arrival likelihood (K−1) log β + (n−K) log(1−β), i.e. the K−1
    observed gaps plus the survival of the censored gap after T_K.

    Geometric, "closed-form": β̂ = (K−1)/(n−K), the K−1 arrivals per n−K
    non-arrival ends with the trailing n−T_K non-arrivals folded into the
    observed gaps. It maximises (K−1) log β − (n−1) log(1+β), which reads
    β as the odds of an arrival at each end, so it equals p̂/(1−p̂) for the
    censored p̂ and is not a root of the censored score. Above 1 it is
    clipped and flagged.

    Shifted Poisson: λ̂ = (n−K)/(K−1), the Poisson mean of the K−1 observed
    gaps with the trailing n−T_K non-arrivals folded in (no survival term).

    PYP-induced: nested bounded search over τ ∈ (0, 1) and
    θ ∈ (−τ + ε, θ_max) of the exact censored likelihood. Coupled PYP: θ
    only, at τ = α.

    With ``priors``: β̂ = (K−1+a−1)/(n−K+a+b−2) ("closed-form"), or the
    Beta posterior mode (K−1+a−1)/(n−1+a+b−2) ("censored"), and the Gamma
    posterior mode λ̂ = (n−K+shape−1)/(K−1+rate).

    Args:
        family: Arrival family
        times: Arrival times
        n: Number of ends
        priors: Priors for MAP estimation (None for MLE)
        alpha: BNTL discount for the coupled family
        geometric_estimator: "closed-form" or "censored"
        theta_max: Upper θ bound

    Returns:
        ArrivalFit
    """
    family = ArrivalFamily(family)
    t = _check_sequence(times, n)
    K = t.size
    if K < 2:
        raise InsufficientDataError("too_few_arrivals", "At least two arrivals are needed", K=K)

    flags: Dict[str, str] = {}

    if family is ArrivalFamily.GEOMETRIC:
        a, b = (priors.beta_a, priors.beta_b) if priors else (1.0, 1.0)
        if geometric_estimator == "closed-form":
            numerator, denominator = K - 1 + a - 1, n - K + a + b - 2
        elif geometric_estimator == "censored":
            numerator, denominator = K - 1 + a - 1, n - 1 + a + b - 2
        else:
            raise ParameterError("unknown_estimator", f"Unknown geometric estimator '{geometric_estimator}'")
        raw = numerator / denominator if denominator > 0 else math.inf
        beta = _clip_open(raw, 0.0, 1.0, "beta", flags)
        arrivals: InterarrivalModel = Geometric(beta)

    elif family is ArrivalFamily.SHIFTED_POISSON:
        shape, rate = (priors.lam_shape, priors.lam_rate) if priors else (1.0, 0.0)
        raw = (n - K + shape - 1) / (K - 1 + rate)
        lam = _clip_open(raw, 0.0, math.inf, "lam", flags)
        arrivals = ShiftedPoisson(lam)

    elif family is ArrivalFamily.PYP:
        theta_cap = priors.theta_max if priors else theta_max

        def objective(tau: float, u: float) -> float:
            theta = math.exp(u) - tau
            value = pyp_sequence_logprob(theta, tau, t, n)
            if priors is not None:
                value += priors.log_prior_pyp(theta, tau)
            return value

        outer, inner = maximize_nested(
            objective,
            (BOUND_EPS, 1.0 - BOUND_EPS),
            lambda tau: (math.log(BOUND_EPS), math.log(theta_cap + tau)),
        )
        tau = outer.x
        theta = math.exp(inner.x) - tau
        if outer.at_boundary:
            flags["tau"] = "boundary"
        if inner.at_boundary:
            flags["theta"] = "boundary"
        arrivals = PYPInduced(theta, tau)

    else:
        if alpha is None or not 0.0 < alpha < 1.0:
            raise ParameterError("alpha_out_of_range", "Coupled PYP arrivals need alpha in (0, 1)", alpha=alpha)
        tau = alpha
        theta_cap = priors.theta_max if priors else COUPLED_THETA_MAX

        def objective_theta(u: float) -> float:
            return pyp_sequence_logprob(math.exp(u) - tau, tau, t, n)

        best = maximize_scalar(objective_theta, math.log(BOUND_EPS), math.log(theta_cap + tau))
        if best.at_boundary:
            flags["theta"] = "boundary"
        arrivals = CoupledPYP(math.exp(best.x) - tau)

    loglik = log_arrival_sequence_prob(arrivals, times, n, alpha=alpha)
    if priors is not None:
        loglik += priors.log_prior(arrivals, alpha=alpha)
    if flags:
        logger.warning(f"Arrival estimate for {family.value} on a boundary: {flags}")
    return ArrivalFit(arrivals=arrivals, log_likelihood=loglik, at_boundary=bool(flags), flags=flags)
