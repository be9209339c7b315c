"""
MLE Module - Maximum-likelihood and MAP estimation for observed sequences

The likelihood of an arrival-labeled sequence factorises into an α part
(depending on the data through the degree histogram and the arrival times)
and an arrival part, so uncoupled families are fitted one factor at a time.
The coupled PYP family ties α to τ and is fitted jointly.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import digamma, gammaln

from .arrivals import BOUND_EPS, COUPLED_THETA_MAX, THETA_MAX, fit_arrivals_mle
from .core import (
    ArrivalFamily,
    ArrivalTimes,
    BNTLModel,
    CoupledPYP,
    EdgeEndSequence,
    OrderedDegrees,
    degree_counts,
    degrees_from_ends,
    require_feasible,
)
from .diagnostics import EtaEstimate, eta_plugin
from .errors import InsufficientDataError, ParameterError, UnidentifiableError
from .likelihood import log_coupled_pyp_likelihood
from .priors import AlphaPrior, ArrivalPriors
from .utils.optimize import maximize_nested, maximize_scalar


logger = logging.getLogger(__name__)

ALPHA_LOWER = -1e3
ALPHA_EPS = 1e-9
GRID_POINTS = 1000

PSI_MODES = ("mle", "map", "ratio")


@dataclass
class MLEOptions:
    """
    Estimation settings.

    Attributes:
        alpha_lower: Lower end of the α search range (−A)
        alpha_eps: Gap kept below α = 1
        grid_points: Size of the cross-check grid for α
        theta_max: Upper θ bound for uncoupled PYP arrivals
        coupled_theta_max: Upper θ bound for the coupled family
        geometric_estimator: "closed-form" or "censored"
    """

    alpha_lower: float = ALPHA_LOWER
    alpha_eps: float = ALPHA_EPS
    grid_points: int = GRID_POINTS
    theta_max: float = THETA_MAX
    coupled_theta_max: float = COUPLED_THETA_MAX
    geometric_estimator: str = "closed-form"

    def __post_init__(self) -> None:
        if not self.alpha_lower < 1.0 - self.alpha_eps:
            raise ParameterError("invalid_mle_options", "alpha_lower must be below 1 - alpha_eps")
        if self.grid_points < 10:
            raise ParameterError("invalid_mle_options", "grid_points must be at least 10")
        if self.geometric_estimator not in ("closed-form", "censored"):
            raise ParameterError("invalid_mle_options", f"Unknown geometric estimator '{self.geometric_estimator}'")

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "MLEOptions":
        section = config.get("mle", {})
        return cls(**{k: v for k, v in section.items() if k in cls.__dataclass_fields__})


class AlphaObjective:
    """
    The α part of the log-likelihood and its derivative.

    log Γ(d_1−α) − log Γ(n−Kα) + Σ_{j>=2}[log Γ(T_j−jα) + log Γ(d_j−α)
      − log Γ(T_j−1−(j−1)α) − log Γ(1−α)]

    with the Σ_j log Γ(d_j − α) terms grouped by distinct degree.
    """

    def __init__(self, degrees: OrderedDegrees, times: ArrivalTimes, prior: Optional[AlphaPrior] = None):
        require_feasible(degrees, times)
        self.values, self.counts = degree_counts(degrees.degrees)
        self.values = self.values.astype(np.float64)
        self.counts = self.counts.astype(np.float64)
        self.n = float(degrees.n)
        self.K = degrees.K
        self.t = times.times[1:].astype(np.float64)
        self.j = np.arange(2, self.K + 1, dtype=np.float64)
        self.prior = prior
        self.evaluations = 0

    @property
    def identifiable(self) -> bool:
        """False when every degree is 1 (the α part is then constant)."""
        return bool(self.values.max() > 1)

    def __call__(self, alpha: float) -> float:
        self.evaluations += 1
        if not alpha < 1.0:
            return -math.inf
        value = (
            float(np.dot(self.counts, gammaln(self.values - alpha)))
            - gammaln(self.n - self.K * alpha)
            + float(np.sum(gammaln(self.t - self.j * alpha) - gammaln(self.t - 1.0 - (self.j - 1.0) * alpha)))
            - (self.K - 1) * gammaln(1.0 - alpha)
        )
        if self.prior is not None:
            value += self.prior.log_prior(alpha)
        return float(value)

    def derivative(self, alpha: float) -> float:
        """d/dα of the log-likelihood (prior excluded)."""
        return float(
            -np.dot(self.counts, digamma(self.values - alpha))
            + self.K * digamma(self.n - self.K * alpha)
            + np.sum(
                -self.j * digamma(self.t - self.j * alpha)
                + (self.j - 1.0) * digamma(self.t - 1.0 - (self.j - 1.0) * alpha)
            )
            + (self.K - 1) * digamma(1.0 - alpha)
        )


@dataclass
class AlphaFit:
    """
    Estimate of α.

    Attributes:
        alpha: Estimate
        log_likelihood: α part of the log-likelihood at the estimate
        at_boundary: Whether the estimate sits on the search bounds
        grid_alpha: Best point of the cross-check grid
        evaluations: Objective evaluations used
    """

    alpha: float
    log_likelihood: float
    at_boundary: bool
    grid_alpha: float
    evaluations: int


def _alpha_grid(lower: float, upper: float, points: int) -> np.ndarray:
    # uniform in log(1 − α), which is dense near 1 where estimates cluster
    u = np.linspace(math.log1p(-lower), math.log1p(-upper), points)
    return 1.0 - np.exp(u)


def fit_alpha(
    degrees: OrderedDegrees,
    times: ArrivalTimes,
    prior: Optional[AlphaPrior] = None,
    options: Optional[MLEOptions] = None,
) -> AlphaFit:
    """
    Maximise the α part of the likelihood (plus log prior for MAP).

    A coarse grid locates the mode, a bounded Brent search refines it inside
    the neighbouring grid cells and a root search on the derivative polishes
    it. A full-range search cross-checks the bracket; on disagreement the
    bracket is widened around the better point.

    Args:
        degrees: Arrival-ordered degrees
        times: Arrival times
        prior: α prior for MAP estimation
        options: Search settings

    Returns:
        AlphaFit
    """
    options = options or MLEOptions()
    objective = AlphaObjective(degrees, times, prior)
    if not objective.identifiable:
        raise UnidentifiableError("all_degrees_one", "Every vertex has degree 1; alpha is not identifiable")

    lower, upper = options.alpha_lower, 1.0 - options.alpha_eps
    if prior is not None:
        prior_lo, prior_hi = prior.bounds
        lower, upper = max(lower, prior_lo), min(upper, prior_hi - options.alpha_eps)

    grid = _alpha_grid(lower, upper, options.grid_points)
    grid_values = np.array([objective(a) for a in grid])
    best = int(np.argmax(grid_values))

    def refine(center: int, width: int) -> float:
        lo = grid[max(center - width, 0)]
        hi = grid[min(center + width, grid.size - 1)]
        candidate = maximize_scalar(objective, lo, hi, xatol=1e-12).x
        if prior is None and lo < candidate < hi:
            d_lo, d_hi = objective.derivative(lo), objective.derivative(hi)
            if d_lo > 0.0 > d_hi:
                root = brentq(objective.derivative, lo, hi, xtol=1e-14)
                if objective(root) >= objective(candidate):
                    candidate = root
        return float(candidate)

    alpha = refine(best, 1)
    wide = maximize_scalar(objective, lower, upper, xatol=1e-10)
    if wide.value > objective(alpha) + 1e-9:
        logger.debug(f"Alpha bracket disagreed with full-range search ({alpha} vs {wide.x}); widening")
        center = int(np.argmin(np.abs(grid - wide.x)))
        alpha = refine(center, 5)
        if wide.value > objective(alpha):
            alpha = wide.x

    value = objective(alpha)
    span = upper - lower
    at_boundary = min(alpha - lower, upper - alpha) <= 1e-7 * max(span, 1.0)
    if at_boundary:
        logger.warning(f"Alpha estimate {alpha:.6g} lies on the search boundary")
    if prior is not None:
        value -= prior.log_prior(alpha)
    return AlphaFit(
        alpha=float(alpha),
        log_likelihood=float(value),
        at_boundary=bool(at_boundary),
        grid_alpha=float(grid[best]),
        evaluations=objective.evaluations,
    )


@dataclass
class FittedModel:
    """
    A fitted BNTL model with its diagnostics.

    Attributes:
        model: Fitted model
        estimator: "mle" or "map"
        log_likelihood: Full log-likelihood at the estimate
        alpha_log_likelihood: α part (uncoupled families)
        arrival_log_likelihood: Arrival part (uncoupled families)
        flags: Per-parameter boundary notes
        eta: Plug-in power-law exponent
        n: Number of ends
        K: Number of vertices
        wall_clock: Seconds spent fitting
    """

    model: BNTLModel
    estimator: str
    log_likelihood: float
    alpha_log_likelihood: Optional[float]
    arrival_log_likelihood: Optional[float]
    flags: Dict[str, str] = field(default_factory=dict)
    eta: Optional[EtaEstimate] = None
    n: int = 0
    K: int = 0
    wall_clock: float = 0.0

    @property
    def family(self) -> ArrivalFamily:
        return self.model.family

    @property
    def at_boundary(self) -> bool:
        return bool(self.flags)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready summary."""
        return {
            "family": self.family.value,
            "estimator": self.estimator,
            "params": self.model.params(),
            "log_likelihood": self.log_likelihood,
            "alpha_log_likelihood": self.alpha_log_likelihood,
            "arrival_log_likelihood": self.arrival_log_likelihood,
            "boundary_flags": dict(self.flags),
            "eta": None if self.eta is None else self.eta.value,
            "eta_note": None if self.eta is None else self.eta.note,
            "n": self.n,
            "K": self.K,
            "wall_clock_seconds": self.wall_clock,
        }


def _fit_coupled(
    degrees: OrderedDegrees,
    n: int,
    options: MLEOptions,
    alpha_prior: Optional[AlphaPrior],
    arrival_priors: Optional[ArrivalPriors],
) -> FittedModel:
    if degrees.K < 2:
        raise InsufficientDataError("too_few_vertices", "The coupled family needs at least two vertices", K=degrees.K)
    theta_cap = arrival_priors.theta_max if arrival_priors is not None else options.coupled_theta_max
    tau_lo, tau_hi = BOUND_EPS, 1.0 - BOUND_EPS
    if alpha_prior is not None:
        prior_lo, prior_hi = alpha_prior.bounds
        tau_lo, tau_hi = max(tau_lo, prior_lo), min(tau_hi, prior_hi - BOUND_EPS)

    def objective(tau: float, u: float) -> float:
        theta = math.exp(u) - tau
        value = log_coupled_pyp_likelihood(degrees, n, theta, tau)
        if alpha_prior is not None:
            value += alpha_prior.log_prior(tau)
        if arrival_priors is not None:
            value += arrival_priors.log_prior_theta(theta, tau)
        return value

    outer, inner = maximize_nested(
        objective,
        (tau_lo, tau_hi),
        lambda tau: (math.log(BOUND_EPS), math.log(theta_cap + tau)),
    )
    tau = outer.x
    theta = math.exp(inner.x) - tau
    flags: Dict[str, str] = {}
    if outer.at_boundary:
        flags["alpha"] = "boundary"
    if inner.at_boundary:
        flags["theta"] = "boundary"
    if flags:
        logger.warning(f"Coupled PYP estimate on a boundary: {flags}")
    model = BNTLModel(tau, CoupledPYP(theta))
    return FittedModel(
        model=model,
        estimator="mle",
        log_likelihood=log_coupled_pyp_likelihood(degrees, n, theta, tau),
        alpha_log_likelihood=None,
        arrival_log_likelihood=None,
        flags=flags,
    )


def _fit(
    ends: EdgeEndSequence,
    family: Union[ArrivalFamily, str],
    options: Optional[MLEOptions],
    alpha_prior: Optional[AlphaPrior],
    arrival_priors: Optional[ArrivalPriors],
) -> FittedModel:
    started = time.perf_counter()
    family = ArrivalFamily(family)
    options = options or MLEOptions()
    degrees, times = degrees_from_ends(ends)
    n = degrees.n

    if family is ArrivalFamily.COUPLED_PYP:
        fitted = _fit_coupled(degrees, n, options, alpha_prior, arrival_priors)
    else:
        alpha_fit = fit_alpha(degrees, times, alpha_prior, options)
        arrival_fit = fit_arrivals_mle(
            family,
            times,
            n,
            priors=arrival_priors,
            geometric_estimator=options.geometric_estimator,
            theta_max=options.theta_max,
        )
        flags = dict(arrival_fit.flags)
        if alpha_fit.at_boundary:
            flags["alpha"] = "boundary"
        arrival_ll = arrival_fit.log_likelihood
        if arrival_priors is not None:
            arrival_ll -= arrival_priors.log_prior(arrival_fit.arrivals)
        fitted = FittedModel(
            model=BNTLModel(alpha_fit.alpha, arrival_fit.arrivals),
            estimator="mle",
            log_likelihood=alpha_fit.log_likelihood + arrival_ll,
            alpha_log_likelihood=alpha_fit.log_likelihood,
            arrival_log_likelihood=arrival_ll,
            flags=flags,
        )

    fitted.estimator = "map" if (alpha_prior is not None or arrival_priors is not None) else "mle"
    fitted.n, fitted.K = n, degrees.K
    try:
        fitted.eta = eta_plugin(fitted.model)
    except ParameterError:
        fitted.eta = EtaEstimate(None, "undefined")
    fitted.wall_clock = time.perf_counter() - started
    logger.info(
        f"Fitted {family.value} ({fitted.estimator}) in {fitted.wall_clock:.2f}s: "
        f"{fitted.model.params()}, log-lik={fitted.log_likelihood:.3f}"
    )
    return fitted


def fit_model(
    ends: EdgeEndSequence,
    family: Union[ArrivalFamily, str],
    options: Optional[MLEOptions] = None,
) -> FittedModel:
    """
    Maximum-likelihood fit of a BNTL model to an arrival-labeled sequence.

    Uncoupled families: α̂ from ``fit_alpha`` and φ̂ from the arrival fit,
    independently. Coupled PYP: joint search over τ = α ∈ (0, 1) and
    θ ∈ (−τ + ε, θ_max).

    Args:
        ends: Edge-end sequence
        family: Arrival family
        options: Estimation settings

    Returns:
        FittedModel
    """
    return _fit(ends, family, options, None, None)


def fit_map(
    ends: EdgeEndSequence,
    family: Union[ArrivalFamily, str],
    alpha_prior: Optional[AlphaPrior] = None,
    arrival_priors: Optional[ArrivalPriors] = None,
    options: Optional[MLEOptions] = None,
) -> FittedModel:
    """
    MAP fit: the maximum-likelihood searches with log priors added.

    Args:
        ends: Edge-end sequence
        family: Arrival family
        alpha_prior: Prior on α (default: the package default prior)
        arrival_priors: Priors on the arrival parameters (default priors)
        options: Estimation settings

    Returns:
        FittedModel with estimator "map"; log_likelihood excludes the priors
    """
    return _fit(ends, family, options, alpha_prior or AlphaPrior(), arrival_priors or ArrivalPriors())


@dataclass
class PsiEstimate:
    """
    Stick-weight estimates Ψ̂_1..Ψ̂_K.

    Attributes:
        values: Estimates (NaN where undefined)
        undefined: 1-based vertex indices whose estimate is undefined
        mode: Estimator used
    """

    values: np.ndarray
    undefined: np.ndarray
    mode: str


def psi_estimators(
    degrees: OrderedDegrees,
    times: Optional[ArrivalTimes] = None,
    alpha: Optional[float] = None,
    mode: str = "mle",
) -> PsiEstimate:
    """
    Point estimates of the stick weights.

    mle: (d_j − 1)/(d̄_j − T_j). map: (d_j − 1 − α)/(d̄_j − jα − 2).
    ratio: d_j / d̄_j. Ψ̂_1 = 1 in every mode; entries with a non-positive
    denominator are NaN and listed in ``undefined``.

    Args:
        degrees: Arrival-ordered degrees
        times: Arrival times (mle mode)
        alpha: Discount (map mode)
        mode: "mle", "map" or "ratio"

    Returns:
        PsiEstimate
    """
    if mode not in PSI_MODES:
        raise ParameterError("unknown_psi_mode", f"Unknown stick-weight estimator '{mode}'")
    d = degrees.degrees.astype(np.float64)
    cums = degrees.cumsums.astype(np.float64)
    j = np.arange(1, d.size + 1, dtype=np.float64)

    if mode == "mle":
        if times is None:
            raise ParameterError("missing_times", "The mle estimator needs arrival times")
        require_feasible(degrees, times)
        numerator, denominator = d - 1.0, cums - times.times
    elif mode == "map":
        if alpha is None:
            raise ParameterError("missing_alpha", "The map estimator needs alpha")
        numerator, denominator = d - 1.0 - alpha, cums - j * alpha - 2.0
    else:
        numerator, denominator = d, cums

    values = np.full(d.size, np.nan)
    ok = denominator > 0
    values[ok] = numerator[ok] / denominator[ok]
    values[0] = 1.0
    undefined = np.flatnonzero(~ok[1:]) + 2
    if undefined.size:
        logger.debug(f"{undefined.size} stick-weight estimates undefined ({mode})")
    return PsiEstimate(values=values, undefined=undefined, mode=mode)
