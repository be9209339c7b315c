"""
Gibbs Module - Posterior sampling for graphs with unknown arrival order

The chain state is (σ, T, α, φ) with the stick weights Ψ marginalised out;
Ψ is drawn from its Beta full conditional only when a sample is collected.
One iteration applies, in order: α (slice), φ (conjugate or slice),
T (exact discrete conditionals, left to right) and σ (adjacent swaps).
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit, gammaln

from .arrivals import (
    log_arrival_sequence_prob,
    log_pmf,
    log_survival,
    posterior_update_arrival_params,
)
from .core import (
    DEFAULT_PARAMS,
    ArrivalFamily,
    ArrivalTimes,
    BNTLModel,
    CoupledPYP,
    Geometric,
    InterarrivalModel,
    OrderedDegrees,
    UnlabeledObservation,
    as_generator,
    make_arrivals,
    validate_feasible,
)
from .diagnostics import log_l1_distance, s_statistic
from .errors import InvariantViolation, ParameterError
from .likelihood import StickWeights, log_multiplicity, log_seq_prob_given_arrivals
from .priors import AlphaPrior, ArrivalPriors
from .utils.slice_sampling import slice_sample


logger = logging.getLogger(__name__)

_PSI_LOW = float(np.finfo(np.float64).tiny)
_PSI_HIGH = float(np.nextafter(1.0, 0.0))


@dataclass
class ChainConfig:
    """
    Settings of one Gibbs chain.

    Attributes:
        iterations: Total iterations, burn-in included
        burn_in: Iterations discarded before collection starts
        thin: Keep every ``thin``-th post-burn-in iteration
        swap_sweeps: Adjacent-swap proposals per iteration (None = K)
        alpha_width: Slice width for α
        theta_width: Slice width for θ
        tau_width: Slice width for τ
        max_steps_out: Slice step-out budget
        alpha_prior: Prior on α
        arrival_priors: Priors on the arrival parameters
        initial_alpha: Starting α (None = 0, or 0.5 for the coupled family)
        update_alpha: Whether α is sampled (False keeps it fixed)
        update_phi: Whether φ is sampled (False keeps it fixed)
        debug_checks: Verify feasibility after every update
        log_every: Progress log interval in iterations
        seed: Seed recorded with the run
    """

    iterations: int = 125000
    burn_in: int = 25000
    thin: int = 10
    swap_sweeps: Optional[int] = None
    alpha_width: float = 1.0
    theta_width: float = 1.0
    tau_width: float = 0.1
    max_steps_out: int = 50
    alpha_prior: AlphaPrior = field(default_factory=AlphaPrior)
    arrival_priors: ArrivalPriors = field(default_factory=ArrivalPriors)
    initial_alpha: Optional[float] = None
    update_alpha: bool = True
    update_phi: bool = True
    debug_checks: bool = False
    log_every: int = 1000
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ParameterError("invalid_chain_config", f"iterations must be positive, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise ParameterError(
                "invalid_chain_config",
                f"burn-in ({self.burn_in}) must be below iterations ({self.iterations})",
            )
        if self.thin < 1:
            raise ParameterError("invalid_chain_config", f"thin must be at least 1, got {self.thin}")
        if self.swap_sweeps is not None and self.swap_sweeps < 0:
            raise ParameterError("invalid_chain_config", "swap_sweeps must be non-negative")
        if min(self.alpha_width, self.theta_width, self.tau_width) <= 0 or self.max_steps_out < 1:
            raise ParameterError("invalid_chain_config", "Slice widths and step-out budget must be positive")

    @classmethod
    def from_config(cls, config: Dict[str, Any], **overrides: Any) -> "ChainConfig":
        """
        Build from a configuration document (``chain`` and ``priors`` sections).

        Args:
            config: Full configuration dictionary
            **overrides: Values that win over the document (None is ignored)

        Returns:
            ChainConfig
        """
        chain = dict(config.get("chain", {}))
        priors = config.get("priors", {})
        values = {k: v for k, v in chain.items() if k in cls.__dataclass_fields__}
        values["alpha_prior"] = AlphaPrior.from_config(priors.get("alpha", {}))
        values["arrival_priors"] = ArrivalPriors.from_config(priors)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def collects(self, iteration: int) -> bool:
        """Whether a sample is archived after this (0-based) iteration."""
        return iteration >= self.burn_in and (iteration - self.burn_in) % self.thin == 0


@dataclass
class GibbsState:
    """
    Current chain state.

    Attributes:
        sigma: Arrival position -> index of the vertex in the observation
        times: Arrival times T
        alpha: Discount
        arrivals: Interarrival model (φ)
        degrees: Observation degrees ordered by sigma
        cumsums: Cumulative sums of ``degrees``
        psi: Stick weights from the last collection, if any
    """

    sigma: np.ndarray
    times: np.ndarray
    alpha: float
    arrivals: InterarrivalModel
    degrees: np.ndarray
    cumsums: np.ndarray
    psi: Optional[StickWeights] = None

    @classmethod
    def build(
        cls,
        observation: UnlabeledObservation,
        sigma: Sequence[int],
        times: Sequence[int],
        alpha: float,
        arrivals: InterarrivalModel,
        psi: Optional[StickWeights] = None,
    ) -> "GibbsState":
        sigma = np.asarray(sigma, dtype=np.int64).copy()
        degrees = observation.degrees[sigma].copy()
        return cls(
            sigma=sigma,
            times=np.asarray(times, dtype=np.int64).copy(),
            alpha=float(alpha),
            arrivals=arrivals,
            degrees=degrees,
            cumsums=np.cumsum(degrees),
            psi=psi,
        )

    @property
    def K(self) -> int:
        return int(self.degrees.size)

    @property
    def n(self) -> int:
        return int(self.cumsums[-1])

    @property
    def model(self) -> BNTLModel:
        return BNTLModel(self.alpha, self.arrivals)

    @property
    def arrival_alpha(self) -> Optional[float]:
        return self.alpha if isinstance(self.arrivals, CoupledPYP) else None

    def ordered_degrees(self) -> OrderedDegrees:
        return OrderedDegrees(self.degrees)

    def arrival_times(self) -> ArrivalTimes:
        return ArrivalTimes(self.times)

    def is_feasible(self) -> bool:
        return validate_feasible(self.degrees, self.times)

    def copy(self) -> "GibbsState":
        return GibbsState(
            sigma=self.sigma.copy(),
            times=self.times.copy(),
            alpha=self.alpha,
            arrivals=self.arrivals,
            degrees=self.degrees.copy(),
            cumsums=self.cumsums.copy(),
            psi=self.psi,
        )


def psi_conditional_params(degrees: np.ndarray, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Beta parameters of Ψ_j | rest for j = 2..K:
    (d_j − α, d̄_{j−1} − (j−1)α).
    """
    degrees = np.asarray(degrees, dtype=np.float64)
    cumsums = np.cumsum(degrees)
    j = np.arange(2, degrees.size + 1, dtype=np.float64)
    return degrees[1:] - alpha, cumsums[:-1] - (j - 1.0) * alpha


def arrival_time_support(state: GibbsState, k: int) -> np.ndarray:
    """
    Candidate values of the arrival time at 0-based position k (vertex k+1).

    Interior positions: T_{k} + 1 .. T_{k} + min(T_{k+2} − T_k − 1, d̄_k − T_k + 1)
    in 1-based terms; the last position is bounded by the degree slack only.
    """
    t_prev = int(state.times[k - 1])
    slack = int(state.cumsums[k - 1]) - t_prev + 1
    if k < state.K - 1:
        limit = min(int(state.times[k + 1]) - t_prev - 1, slack)
    else:
        limit = min(slack, state.n - t_prev)
    return t_prev + np.arange(1, limit + 1, dtype=np.int64)


def arrival_factor_log_weights(
    arrivals: InterarrivalModel,
    state: GibbsState,
    k: int,
    candidates: np.ndarray,
) -> np.ndarray:
    """
    Interarrival factors of the T conditional at position k: the pmf of the
    gap into vertex k+1 times the pmf of the gap out of it, or the censored
    survival term at the last position.
    """
    t_prev = int(state.times[k - 1])
    cand = candidates.astype(np.float64)
    alpha = state.arrival_alpha
    weights = np.asarray(log_pmf(arrivals, k, cand - t_prev, t_prev, alpha=alpha), dtype=np.float64)
    if k < state.K - 1:
        t_next = float(state.times[k + 1])
        weights = weights + log_pmf(arrivals, k + 1, t_next - cand, cand, alpha=alpha)
    else:
        weights = weights + log_survival(arrivals, state.n - cand, state.K, cand, alpha=alpha)
    return np.broadcast_to(weights, cand.shape).astype(np.float64)


def arrival_time_log_weights(state: GibbsState, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Unnormalised log conditional of the arrival time at position k.

    Args:
        state: Chain state
        k: 0-based arrival position, 1 <= k <= K−1

    Returns:
        (candidate times, log weights)
    """
    candidates = arrival_time_support(state, k)
    if candidates.size == 0:
        raise InvariantViolation("empty_arrival_support", f"No feasible arrival time at position {k + 1}", k=k)
    alpha = state.alpha
    j = k + 1
    cand = candidates.astype(np.float64)
    # sequence-probability factor of T_j: Γ(T_j − jα)/Γ(T_j − 1 − (j−1)α)
    weights = gammaln(cand - j * alpha) - gammaln(cand - 1.0 - (j - 1.0) * alpha)
    top = float(state.cumsums[k]) - cand
    choose = float(state.degrees[k] - 1)
    weights += gammaln(top + 1.0) - gammaln(top - choose + 1.0) - math.lgamma(choose + 1.0)
    if not isinstance(state.arrivals, Geometric):
        weights += arrival_factor_log_weights(state.arrivals, state, k, candidates)
    return candidates, weights


def swap_log_weights(state: GibbsState, j: int) -> Tuple[float, float]:
    """
    Log weights of keeping or swapping the vertices at 1-based positions j, j+1.

    p_swap ∝ Γ(d̄_{j−1} + d_{j+1} − T_j + 1) / Γ(d̄_{j+1} − d_j − T_{j+1} + 2)
    p_keep ∝ Γ(d̄_{j−1} + d_j − T_j + 1) / Γ(d̄_j − T_{j+1} + 2)

    Returns:
        (log p_keep, log p_swap), −inf for an infeasible arrangement
    """
    a = j - 1
    left = int(state.cumsums[a - 1]) if a > 0 else 0
    d_j = int(state.degrees[a])
    d_next = int(state.degrees[a + 1])
    t_j = int(state.times[a])
    t_next = int(state.times[a + 1])

    def log_ratio(numerator: int, denominator: int) -> float:
        if numerator <= 0 or denominator <= 0:
            return -math.inf
        return math.lgamma(numerator) - math.lgamma(denominator)

    keep = log_ratio(left + d_j - t_j + 1, left + d_j - t_next + 2)
    swap = log_ratio(left + d_next - t_j + 1, left + d_next - t_next + 2)
    return keep, swap


def swap_probability(state: GibbsState, j: int) -> float:
    """Probability of swapping positions j and j+1 (1-based)."""
    keep, swap = swap_log_weights(state, j)
    if swap == -math.inf:
        return 0.0
    if keep == -math.inf:
        return 1.0
    return float(expit(swap - keep))


def log_joint(state: GibbsState, alpha_prior: AlphaPrior, arrival_priors: ArrivalPriors) -> float:
    """
    Log joint of the Ψ-marginalised state: degree-profile probability given
    T, arrival law and priors.
    """
    degrees = state.ordered_degrees()
    times = state.arrival_times()
    value = log_seq_prob_given_arrivals(degrees, times, state.alpha)
    value += log_multiplicity(degrees, times)
    value += log_arrival_sequence_prob(state.arrivals, times, state.n, alpha=state.arrival_alpha)
    value += alpha_prior.log_prior(state.alpha)
    value += arrival_priors.log_prior(state.arrivals, alpha=state.alpha)
    return float(value)


@dataclass
class SampleArchive:
    """
    Thinned post-burn-in samples of one chain plus its log-joint trace.

    Attributes:
        family: Arrival family of the chain
        labels: External labels of the observation vertices
        observed_degrees: Degrees in presentation order
        initial_sigma: Starting permutation (kept for audit)
        iterations: Iteration number of each sample
        alpha: Sampled α values
        params: Sampled arrival parameters
        log_joint: Log joint at each sample
        s_stat: S statistic at each sample
        times: Sampled arrival times
        sigma: Sampled permutations
        psi: Sampled stick weights
        log_joint_trace: Log joint after every iteration
        seed: Chain seed when known
        runtime: Wall-clock seconds spent in the chain
    """

    family: ArrivalFamily
    labels: Tuple[Hashable, ...]
    observed_degrees: np.ndarray
    initial_sigma: np.ndarray
    iterations: List[int] = field(default_factory=list)
    alpha: List[float] = field(default_factory=list)
    params: List[Dict[str, float]] = field(default_factory=list)
    log_joint: List[float] = field(default_factory=list)
    s_stat: List[float] = field(default_factory=list)
    times: List[np.ndarray] = field(default_factory=list)
    sigma: List[np.ndarray] = field(default_factory=list)
    psi: List[Optional[np.ndarray]] = field(default_factory=list)
    log_joint_trace: List[float] = field(default_factory=list)
    seed: Optional[int] = None
    runtime: float = 0.0

    def __len__(self) -> int:
        return len(self.iterations)

    @property
    def n(self) -> int:
        return int(self.observed_degrees.sum())

    def record(self, iteration: int, state: GibbsState, value: float) -> None:
        """Append the current state as a sample."""
        self.iterations.append(int(iteration))
        self.alpha.append(float(state.alpha))
        self.params.append(state.arrivals.params())
        self.log_joint.append(float(value))
        self.s_stat.append(s_statistic(state.degrees, state.times) if state.K >= 2 else math.nan)
        self.times.append(state.times.copy())
        self.sigma.append(state.sigma.copy())
        self.psi.append(None if state.psi is None else state.psi.psi.copy())

    def ordered_degrees(self, index: int) -> np.ndarray:
        """Arrival-ordered degrees of sample ``index``."""
        return self.observed_degrees[self.sigma[index]]

    def map_index(self) -> int:
        """Index of the sample with the highest log joint."""
        return int(np.argmax(self.log_joint))

    def l1_statistic(self, reference: Optional[np.ndarray] = None) -> np.ndarray:
        """
        log normalised L1 distance of each sample's ordered degrees to a
        reference sequence (default: the highest-log-joint sample).
        """
        if not self.iterations:
            return np.empty(0)
        ref = self.ordered_degrees(self.map_index()) if reference is None else np.asarray(reference)
        return np.array([log_l1_distance(self.ordered_degrees(i), ref) for i in range(len(self))])

    def posterior_means(self) -> Dict[str, float]:
        """Posterior means of α and the arrival parameters."""
        if not self.iterations:
            return {}
        means = {"alpha": float(np.mean(self.alpha))}
        for key in self.params[0]:
            means[key] = float(np.mean([p[key] for p in self.params]))
        return means

    def extend(self, other: "SampleArchive") -> None:
        """Append the samples of a continuation of this chain."""
        self.iterations.extend(other.iterations)
        self.alpha.extend(other.alpha)
        self.params.extend(other.params)
        self.log_joint.extend(other.log_joint)
        self.s_stat.extend(other.s_stat)
        self.times.extend(other.times)
        self.sigma.extend(other.sigma)
        self.psi.extend(other.psi)
        self.log_joint_trace.extend(other.log_joint_trace)
        self.runtime += other.runtime


class GibbsSampler:
    """
    Gibbs sampler for an unlabeled observation under one arrival family.

    Usage:
        sampler = GibbsSampler(observation, "geometric", ChainConfig(), rng=7)
        archive = sampler.run()
    """

    def __init__(
        self,
        observation: UnlabeledObservation,
        family: Union[ArrivalFamily, str],
        config: Optional[ChainConfig] = None,
        rng: Union[np.random.Generator, int, None] = None,
        initial_params: Optional[Dict[str, float]] = None,
    ):
        """
        Initialize the sampler at T_j = j with vertices in degree-descending
        order (ties by external label).

        Args:
            observation: Degrees with external labels
            family: Arrival family
            config: Chain settings
            rng: Generator or seed
            initial_params: Starting arrival parameters (family defaults otherwise)
        """
        self.observation = observation
        self.family = ArrivalFamily(family)
        self.config = config or ChainConfig()
        self.rng, seed = as_generator(rng if rng is not None else self.config.seed)
        self.seed = seed if seed is not None else self.config.seed
        self.iteration = 0

        sigma = self.initial_permutation(observation)
        alpha = self._initial_alpha()
        params = dict(DEFAULT_PARAMS[self.family])
        params.update(initial_params or {})
        arrivals = make_arrivals(self.family, **params)
        BNTLModel(alpha, arrivals)  # rejects an invalid (alpha, theta) pair
        self.state = GibbsState.build(observation, sigma, np.arange(1, observation.K + 1), alpha, arrivals)
        self.archive = self._new_archive()

        logger.info(
            f"Gibbs sampler ready: family={self.family.value}, n={observation.n}, "
            f"K={observation.K}, iterations={self.config.iterations}"
        )

    @staticmethod
    def initial_permutation(observation: UnlabeledObservation) -> np.ndarray:
        """Vertices by degree descending, ties broken by external label."""
        positions = range(observation.K)
        degrees = observation.degrees
        labels = observation.labels
        try:
            order = sorted(positions, key=lambda k: (-int(degrees[k]), labels[k]))
        except TypeError:
            order = sorted(positions, key=lambda k: (-int(degrees[k]), str(labels[k])))
        return np.array(order, dtype=np.int64)

    def _initial_alpha(self) -> float:
        lo, hi = self.config.alpha_prior.bounds
        if self.family is ArrivalFamily.COUPLED_PYP:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        default = 0.5 if self.family is ArrivalFamily.COUPLED_PYP else 0.0
        alpha = self.config.initial_alpha if self.config.initial_alpha is not None else default
        if lo < alpha < hi:
            return float(alpha)
        if not self.config.update_alpha:
            raise ParameterError("alpha_out_of_range", f"Fixed alpha {alpha} lies outside ({lo}, {hi})")
        finite_lo = lo if math.isfinite(lo) else hi - 1.0
        return float(0.5 * (finite_lo + hi))

    def _new_archive(self) -> SampleArchive:
        return SampleArchive(
            family=self.family,
            labels=self.observation.labels,
            observed_degrees=self.observation.degrees.copy(),
            initial_sigma=self.state.sigma.copy(),
            seed=self.seed,
        )

    # ---- single-site updates -------------------------------------------

    def update_psi(self, state: GibbsState, rng: np.random.Generator) -> GibbsState:
        """Draw Ψ_j ~ Beta(d_j − α, d̄_{j−1} − (j−1)α) for j >= 2; Ψ_1 = 1."""
        a, b = psi_conditional_params(state.degrees, state.alpha)
        if np.any(a <= 0) or np.any(b <= 0):
            raise InvariantViolation("psi_shape_nonpositive", "Beta shape parameters must be positive")
        draws = np.clip(rng.beta(a, b), _PSI_LOW, _PSI_HIGH) if a.size else np.empty(0)
        state.psi = StickWeights(np.concatenate(([1.0], draws)))
        return state

    def update_alpha(self, state: GibbsState, rng: np.random.Generator) -> GibbsState:
        """One slice move for α with Ψ marginalised (plus the arrival factor when coupled)."""
        degrees = state.ordered_degrees()
        times = state.arrival_times()
        prior = self.config.alpha_prior
        lower, upper = prior.bounds
        coupled = isinstance(state.arrivals, CoupledPYP)

        if coupled:
            theta = state.arrivals.theta
            lower, upper = max(lower, 0.0, -theta), min(upper, 1.0)
            n = state.n

            def target(alpha: float) -> float:
                if not (lower < alpha < upper and theta > -alpha):
                    return -math.inf
                return (
                    log_seq_prob_given_arrivals(degrees, times, alpha)
                    + log_arrival_sequence_prob(state.arrivals, times, n, alpha=alpha)
                    + prior.log_prior(alpha)
                    + self.config.arrival_priors.log_prior_theta(theta, alpha)
                )
        else:

            def target(alpha: float) -> float:
                if not lower < alpha < upper:
                    return -math.inf
                return log_seq_prob_given_arrivals(degrees, times, alpha) + prior.log_prior(alpha)

        state.alpha, _ = slice_sample(
            state.alpha,
            target,
            rng,
            width=self.config.alpha_width,
            max_steps_out=self.config.max_steps_out,
            lower=lower,
            upper=upper,
        )
        return state

    def update_phi(self, state: GibbsState, rng: np.random.Generator) -> GibbsState:
        """Update the arrival parameters given T."""
        state.arrivals = posterior_update_arrival_params(
            state.arrivals,
            state.arrival_times(),
            state.n,
            self.config.arrival_priors,
            rng,
            alpha=state.arrival_alpha,
            theta_width=self.config.theta_width,
            tau_width=self.config.tau_width,
            max_steps_out=self.config.max_steps_out,
        )
        return state

    def update_arrival_times(self, state: GibbsState, rng: np.random.Generator) -> GibbsState:
        """Resample T_2..T_K left to right from their exact discrete conditionals."""
        for k in range(1, state.K):
            candidates, weights = arrival_time_log_weights(state, k)
            if candidates.size == 1:
                state.times[k] = candidates[0]
                continue
            probs = np.exp(weights - weights.max())
            cdf = np.cumsum(probs)
            pick = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            state.times[k] = candidates[min(pick, candidates.size - 1)]
        return state

    def update_permutation(self, state: GibbsState, rng: np.random.Generator, sweeps: Optional[int] = None) -> GibbsState:
        """Propose ``sweeps`` adjacent swaps σ_j <-> σ_{j+1} at uniform positions."""
        K = state.K
        if K < 2:
            return state
        sweeps = K if sweeps is None else sweeps
        positions = rng.integers(1, K, size=sweeps)
        uniforms = rng.random(sweeps)
        for j, u in zip(positions, uniforms):
            j = int(j)
            if u < swap_probability(state, j):
                a = j - 1
                state.sigma[[a, a + 1]] = state.sigma[[a + 1, a]]
                state.degrees[[a, a + 1]] = state.degrees[[a + 1, a]]
                state.cumsums[a] = (state.cumsums[a - 1] if a > 0 else 0) + state.degrees[a]
        return state

    # ---- driver ---------------------------------------------------------

    def _check(self, state: GibbsState, step: str) -> None:
        if self.config.debug_checks and not state.is_feasible():
            raise InvariantViolation(
                "infeasible_state",
                f"State infeasible after {step} at iteration {self.iteration}",
                step=step,
                iteration=self.iteration,
            )

    def step(self) -> float:
        """Run one full iteration and return the log joint."""
        state, rng = self.state, self.rng
        if self.config.update_alpha:
            self.update_alpha(state, rng)
            self._check(state, "alpha")
        if self.config.update_phi:
            self.update_phi(state, rng)
            self._check(state, "phi")
        self.update_arrival_times(state, rng)
        self._check(state, "arrival_times")
        self.update_permutation(state, rng, self.config.swap_sweeps)
        self._check(state, "permutation")

        value = log_joint(state, self.config.alpha_prior, self.config.arrival_priors)
        if not math.isfinite(value):
            raise InvariantViolation(
                "nonfinite_log_joint",
                f"Log joint {value} at iteration {self.iteration}",
                iteration=self.iteration,
            )
        return value

    def run(
        self,
        until: Optional[int] = None,
        callback: Optional[Callable[[int, GibbsState], None]] = None,
    ) -> SampleArchive:
        """
        Run the chain up to iteration ``until`` (default: config.iterations).

        Args:
            until: Stop after this many total iterations
            callback: Called with (iteration, state) after every iteration

        Returns:
            The chain's archive (samples from every run() call so far)
        """
        until = self.config.iterations if until is None else min(until, self.config.iterations)
        started = time.perf_counter()
        while self.iteration < until:
            value = self.step()
            self.archive.log_joint_trace.append(value)
            if self.config.collects(self.iteration):
                self.update_psi(self.state, self.rng)
                self.archive.record(self.iteration, self.state, value)
            if callback is not None:
                callback(self.iteration, self.state)
            self.iteration += 1
            if self.config.log_every and self.iteration % self.config.log_every == 0:
                logger.info(
                    f"Iteration {self.iteration}/{self.config.iterations}: "
                    f"alpha={self.state.alpha:.4f}, log joint={value:.2f}"
                )
        self.archive.runtime += time.perf_counter() - started
        return self.archive

    # ---- checkpointing --------------------------------------------------

    def checkpoint(self) -> Dict[str, Any]:
        """JSON-serialisable snapshot of the chain state and RNG."""
        state = self.state
        return {
            "iteration": self.iteration,
            "family": self.family.value,
            "sigma": state.sigma.tolist(),
            "times": state.times.tolist(),
            "alpha": state.alpha,
            "params": state.arrivals.params(),
            "psi": None if state.psi is None else state.psi.psi.tolist(),
            "rng_state": self.rng.bit_generator.state,
            "seed": self.seed,
        }

    def restore(self, snapshot: Dict[str, Any], archive: Optional[SampleArchive] = None) -> None:
        """
        Continue from a checkpoint.

        Args:
            snapshot: Output of ``checkpoint`` (possibly JSON round-tripped)
            archive: Samples collected before the checkpoint, if kept
        """
        if ArrivalFamily(snapshot["family"]) is not self.family:
            raise ParameterError("checkpoint_family_mismatch", f"Checkpoint is for {snapshot['family']}")
        arrivals = make_arrivals(self.family, **snapshot["params"])
        psi = None if snapshot.get("psi") is None else StickWeights(snapshot["psi"])
        self.state = GibbsState.build(
            self.observation, snapshot["sigma"], snapshot["times"], snapshot["alpha"], arrivals, psi
        )
        if not self.state.is_feasible():
            raise InvariantViolation("infeasible_checkpoint", "Checkpoint state is infeasible")
        self.rng.bit_generator.state = snapshot["rng_state"]
        self.iteration = int(snapshot["iteration"])
        self.seed = snapshot.get("seed", self.seed)
        self.archive = archive if archive is not None else self._new_archive()
        logger.info(f"Resumed chain at iteration {self.iteration}")


def run_chain(
    observation: UnlabeledObservation,
    family: Union[ArrivalFamily, str],
    config: ChainConfig,
    rng: Union[np.random.Generator, int, None] = None,
) -> SampleArchive:
    """
    Run one Gibbs chain from the default initialisation.

    Args:
        observation: Degrees with external labels
        family: Arrival family
        config: Chain settings
        rng: Generator or seed

    Returns:
        SampleArchive
    """
    return GibbsSampler(observation, family, config, rng).run()


@dataclass
class ChainResult:
    """Archive of a finished chain with a checkpoint to resume it from."""

    archive: SampleArchive
    checkpoint: Dict[str, Any]


def _run_chain_worker(args: Tuple[UnlabeledObservation, str, ChainConfig, np.random.SeedSequence]) -> ChainResult:
    observation, family, config, seed_seq = args
    sampler = GibbsSampler(observation, family, config, np.random.default_rng(seed_seq))
    archive = sampler.run()
    return ChainResult(archive, sampler.checkpoint())


def run_chains(
    observation: UnlabeledObservation,
    family: Union[ArrivalFamily, str],
    config: ChainConfig,
    chains: int,
    seed: Optional[int] = None,
    max_workers: Optional[int] = None,
) -> List[ChainResult]:
    """
    Run independent chains in worker processes with split RNG streams.

    Args:
        observation: Degrees with external labels
        family: Arrival family
        config: Chain settings
        chains: Number of chains
        seed: Root seed (config.seed when None)
        max_workers: Process pool size (default: one per chain)

    Returns:
        One result (archive and checkpoint) per chain, in chain order
    """
    if chains < 1:
        raise ParameterError("invalid_chain_count", f"Need at least one chain, got {chains}")
    root = np.random.SeedSequence(seed if seed is not None else config.seed)
    family_value = ArrivalFamily(family).value
    jobs = [(observation, family_value, config, child) for child in root.spawn(chains)]
    if chains == 1:
        return [_run_chain_worker(jobs[0])]
    logger.info(f"Running {chains} chains in parallel")
    with ProcessPoolExecutor(max_workers=max_workers or chains) as pool:
        return list(pool.map(_run_chain_worker, jobs))
