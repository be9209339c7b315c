"""
Core Module - Domain types, validation and conversions

Vertex ids are 1-based and follow arrival order everywhere inside the
package; external labels survive only in the maps returned by
``canonical_relabel`` and in ``UnlabeledObservation.labels``.
All counts are 64-bit integers. Every type here is immutable after
construction (array fields are read-only views).
"""

import dataclasses
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, ClassVar, Dict, Hashable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InfeasibleError, LabelingError, ParameterError


logger = logging.getLogger(__name__)


def _readonly_int_array(values: Any) -> np.ndarray:
    """Copy values into a read-only 1-D int64 array."""
    arr = np.array(values, dtype=np.int64).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EdgeEndSequence:
    """
    Arrival-labeled sequence of edge ends (one vertex id per end).

    Attributes:
        ends: Vertex ids, ``ends[0] == 1`` and every new id is the
              previous maximum plus one.
    """

    ends: np.ndarray

    def __post_init__(self) -> None:
        ends = _readonly_int_array(self.ends)
        if ends.size == 0:
            raise LabelingError("empty_sequence", "An edge-end sequence needs at least one end")

        running_max = np.maximum.accumulate(ends)
        allowed = np.concatenate(([1], running_max[:-1] + 1))
        bad = np.flatnonzero((ends < 1) | (ends > allowed))
        if bad.size:
            position = int(bad[0])
            raise LabelingError(
                "vertex_out_of_order",
                f"Vertex {int(ends[position])} appears at position {position} "
                f"before vertex {int(allowed[position])}",
                position=position,
                vertex=int(ends[position]),
            )
        object.__setattr__(self, "ends", ends)

    def __len__(self) -> int:
        return int(self.ends.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EdgeEndSequence):
            return NotImplemented
        return np.array_equal(self.ends, other.ends)

    def __hash__(self) -> int:
        return hash(self.ends.tobytes())

    @property
    def n(self) -> int:
        """Number of ends."""
        return int(self.ends.size)

    @property
    def num_vertices(self) -> int:
        """Number of distinct vertices K."""
        return int(self.ends.max())

    def prefix(self, length: int) -> "EdgeEndSequence":
        """Return the first ``length`` ends."""
        return EdgeEndSequence(self.ends[:length])

    def __repr__(self) -> str:
        return f"EdgeEndSequence(n={self.n}, K={self.num_vertices})"


@dataclass(frozen=True, eq=False)
class ArrivalTimes:
    """
    Steps at which new vertices appear, ``1 = T_1 < T_2 < ... < T_K``.

    Attributes:
        times: Arrival times, 1-based positions in the edge-end sequence
    """

    times: np.ndarray

    def __post_init__(self) -> None:
        times = _readonly_int_array(self.times)
        if times.size == 0:
            raise InfeasibleError("empty_arrivals", "At least one arrival time is required")
        if times[0] != 1:
            raise InfeasibleError("first_arrival_not_one", f"T_1 must be 1, got {int(times[0])}")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise InfeasibleError("arrivals_not_increasing", "Arrival times must be strictly increasing")
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return int(self.times.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ArrivalTimes):
            return NotImplemented
        return np.array_equal(self.times, other.times)

    def __hash__(self) -> int:
        return hash(self.times.tobytes())

    @property
    def K(self) -> int:
        """Number of arrivals."""
        return int(self.times.size)

    @property
    def interarrivals(self) -> np.ndarray:
        """Interarrival times Δ_j = T_j − T_{j−1} for j = 2..K."""
        return np.diff(self.times)

    def __repr__(self) -> str:
        return f"ArrivalTimes(K={self.K}, last={int(self.times[-1])})"


@dataclass(frozen=True, eq=False)
class OrderedDegrees:
    """
    Vertex degrees in arrival order, with cumulative sums.

    Attributes:
        degrees: d_1..d_K, all at least 1
        cumsums: d̄_j = d_1 + ... + d_j
    """

    degrees: np.ndarray
    cumsums: np.ndarray = dataclasses.field(init=False)

    def __post_init__(self) -> None:
        degrees = _readonly_int_array(self.degrees)
        if degrees.size == 0:
            raise InfeasibleError("empty_degrees", "At least one vertex is required")
        if np.any(degrees < 1):
            raise InfeasibleError("degree_below_one", "Every vertex must have degree at least 1")
        cumsums = np.cumsum(degrees)
        cumsums.setflags(write=False)
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "cumsums", cumsums)

    def __len__(self) -> int:
        return int(self.degrees.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OrderedDegrees):
            return NotImplemented
        return np.array_equal(self.degrees, other.degrees)

    def __hash__(self) -> int:
        return hash(self.degrees.tobytes())

    @property
    def n(self) -> int:
        """Total number of ends d̄_K."""
        return int(self.cumsums[-1])

    @property
    def K(self) -> int:
        """Number of vertices."""
        return int(self.degrees.size)

    def __repr__(self) -> str:
        return f"OrderedDegrees(K={self.K}, n={self.n})"


class ArrivalFamily(Enum):
    """Interarrival model families"""

    GEOMETRIC = "geometric"
    SHIFTED_POISSON = "poisson"
    PYP = "pyp"
    COUPLED_PYP = "coupled-pyp"


@dataclass(frozen=True)
class Geometric:
    """i.i.d. Geom(β) interarrivals on {1, 2, ...}."""

    beta: float
    family: ClassVar[ArrivalFamily] = ArrivalFamily.GEOMETRIC

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 1.0:
            raise ParameterError("beta_out_of_range", f"beta must lie in (0, 1), got {self.beta}", beta=self.beta)

    def params(self) -> Dict[str, float]:
        return {"beta": float(self.beta)}


@dataclass(frozen=True)
class ShiftedPoisson:
    """i.i.d. interarrivals with Δ − 1 ~ Poisson(λ)."""

    lam: float
    family: ClassVar[ArrivalFamily] = ArrivalFamily.SHIFTED_POISSON

    def __post_init__(self) -> None:
        if not (self.lam > 0.0 and np.isfinite(self.lam)):
            raise ParameterError("lambda_out_of_range", f"lambda must be positive, got {self.lam}", lam=self.lam)

    def params(self) -> Dict[str, float]:
        return {"lam": float(self.lam)}


@dataclass(frozen=True)
class PYPInduced:
    """Interarrivals induced by a Pitman–Yor urn with its own (θ, τ)."""

    theta: float
    tau: float
    family: ClassVar[ArrivalFamily] = ArrivalFamily.PYP

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ParameterError("tau_out_of_range", f"tau must lie in (0, 1), got {self.tau}", tau=self.tau)
        if not (self.theta > -self.tau and np.isfinite(self.theta)):
            raise ParameterError(
                "theta_out_of_range",
                f"theta must exceed -tau = {-self.tau}, got {self.theta}",
                theta=self.theta,
            )

    def params(self) -> Dict[str, float]:
        return {"theta": float(self.theta), "tau": float(self.tau)}


@dataclass(frozen=True)
class CoupledPYP:
    """PYP-induced interarrivals whose discount is tied to the BNTL α."""

    theta: float
    family: ClassVar[ArrivalFamily] = ArrivalFamily.COUPLED_PYP

    def __post_init__(self) -> None:
        if not np.isfinite(self.theta):
            raise ParameterError("theta_out_of_range", f"theta must be finite, got {self.theta}", theta=self.theta)

    def params(self) -> Dict[str, float]:
        return {"theta": float(self.theta)}


InterarrivalModel = Union[Geometric, ShiftedPoisson, PYPInduced, CoupledPYP]

_FAMILY_CLASSES = {
    ArrivalFamily.GEOMETRIC: Geometric,
    ArrivalFamily.SHIFTED_POISSON: ShiftedPoisson,
    ArrivalFamily.PYP: PYPInduced,
    ArrivalFamily.COUPLED_PYP: CoupledPYP,
}

# Starting points for samplers and optimizers
DEFAULT_PARAMS: Dict[ArrivalFamily, Dict[str, float]] = {
    ArrivalFamily.GEOMETRIC: {"beta": 0.5},
    ArrivalFamily.SHIFTED_POISSON: {"lam": 1.0},
    ArrivalFamily.PYP: {"theta": 1.0, "tau": 0.5},
    ArrivalFamily.COUPLED_PYP: {"theta": 1.0},
}


def make_arrivals(family: Union[ArrivalFamily, str], **params: float) -> InterarrivalModel:
    """
    Build an interarrival model from a family and its parameters.

    Args:
        family: ArrivalFamily or its string value ("geometric", ...)
        **params: Model parameters; missing ones take the family defaults

    Returns:
        Interarrival model instance
    """
    family = ArrivalFamily(family)
    merged = dict(DEFAULT_PARAMS[family])
    merged.update({k: v for k, v in params.items() if v is not None})
    return _FAMILY_CLASSES[family](**merged)


@dataclass(frozen=True)
class BNTLModel:
    """
    A BNTL(α, Λ) model.

    Attributes:
        alpha: Discount parameter, α < 1
        arrivals: Interarrival law Λ^φ
    """

    alpha: float
    arrivals: InterarrivalModel

    def __post_init__(self) -> None:
        if not (self.alpha < 1.0 and np.isfinite(self.alpha)):
            raise ParameterError("alpha_out_of_range", f"alpha must be < 1, got {self.alpha}", alpha=self.alpha)
        if isinstance(self.arrivals, CoupledPYP):
            if not 0.0 < self.alpha < 1.0:
                raise ParameterError(
                    "alpha_out_of_range",
                    f"coupled PYP needs alpha in (0, 1), got {self.alpha}",
                    alpha=self.alpha,
                )
            if not self.arrivals.theta > -self.alpha:
                raise ParameterError(
                    "theta_out_of_range",
                    f"coupled PYP needs theta > -alpha, got {self.arrivals.theta}",
                    theta=self.arrivals.theta,
                )

    @property
    def family(self) -> ArrivalFamily:
        return self.arrivals.family

    def params(self) -> Dict[str, float]:
        """All parameters as a flat dictionary."""
        out = {"alpha": float(self.alpha)}
        out.update(self.arrivals.params())
        return out


@dataclass(frozen=True, eq=False)
class UnlabeledObservation:
    """
    A graph whose arrival order is unknown: degrees with stable external labels.

    Attributes:
        degrees: Degree of each presented vertex (presentation order)
        labels: External label of each presented vertex
    """

    degrees: np.ndarray
    labels: Tuple[Hashable, ...] = ()

    def __post_init__(self) -> None:
        degrees = _readonly_int_array(self.degrees)
        if degrees.size == 0:
            raise InfeasibleError("empty_observation", "The observation has no vertices")
        if np.any(degrees < 1):
            raise InfeasibleError("degree_below_one", "Every vertex must have degree at least 1")
        labels = tuple(self.labels) if len(self.labels) else tuple(range(1, degrees.size + 1))
        if len(labels) != degrees.size:
            raise InfeasibleError("label_count_mismatch", "One label per vertex is required")
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return int(self.degrees.sum())

    @property
    def K(self) -> int:
        return int(self.degrees.size)


def degrees_from_ends(ends: EdgeEndSequence) -> Tuple[OrderedDegrees, ArrivalTimes]:
    """
    Extract arrival-ordered degrees and arrival times from an end sequence.

    Args:
        ends: Valid edge-end sequence

    Returns:
        (OrderedDegrees, ArrivalTimes)
    """
    if not isinstance(ends, EdgeEndSequence):
        ends = EdgeEndSequence(ends)
    degrees = np.bincount(ends.ends)[1:]
    _, first_index = np.unique(ends.ends, return_index=True)
    return OrderedDegrees(degrees), ArrivalTimes(first_index + 1)


def validate_feasible(
    degrees: Union[OrderedDegrees, Sequence[int], np.ndarray],
    times: Union[ArrivalTimes, Sequence[int], np.ndarray],
) -> bool:
    """
    Check the arrival constraints for a (d, T) pair.

    True iff T_1 = 1, T is strictly increasing, T_j − 1 <= d̄_{j−1} for
    every j >= 2 and T_K <= n.

    Args:
        degrees: Ordered degrees (object or raw sequence)
        times: Arrival times (object or raw sequence)

    Returns:
        Whether the pair is feasible
    """
    d = degrees.degrees if isinstance(degrees, OrderedDegrees) else np.asarray(degrees, dtype=np.int64)
    t = times.times if isinstance(times, ArrivalTimes) else np.asarray(times, dtype=np.int64)
    if d.ndim != 1 or t.ndim != 1 or d.size == 0 or d.size != t.size:
        return False
    if np.any(d < 1) or t[0] != 1:
        return False
    if t.size > 1 and np.any(np.diff(t) <= 0):
        return False
    cumsums = np.cumsum(d)
    if t[-1] > cumsums[-1]:
        return False
    return bool(np.all(t[1:] - 1 <= cumsums[:-1]))


def require_feasible(degrees: OrderedDegrees, times: ArrivalTimes) -> None:
    """Raise InfeasibleError unless validate_feasible holds."""
    if not validate_feasible(degrees, times):
        raise InfeasibleError(
            "infeasible_arrivals",
            "Arrival times are incompatible with the ordered degrees",
            K=len(degrees),
            n=degrees.n,
        )


def canonical_relabel(ends: Sequence[Hashable]) -> Tuple[EdgeEndSequence, Dict[int, Hashable]]:
    """
    Relabel arbitrary vertex labels by order of first appearance.

    Args:
        ends: Nonempty sequence of hashable labels

    Returns:
        (EdgeEndSequence, map from new id to original label)
    """
    if len(ends) == 0:
        raise LabelingError("empty_sequence", "Cannot relabel an empty sequence")

    if not isinstance(ends, np.ndarray) and len({type(label) for label in ends}) > 1:
        return _relabel_by_dict(ends)
    try:
        arr = np.asarray(ends)
        if arr.dtype == object or arr.ndim != 1:
            raise TypeError("labels are not scalar")
        uniques, first_index, inverse = np.unique(arr, return_index=True, return_inverse=True)
    except (TypeError, ValueError):
        return _relabel_by_dict(ends)

    order = np.argsort(first_index, kind="stable")
    rank = np.empty(order.size, dtype=np.int64)
    rank[order] = np.arange(1, order.size + 1)
    relabeled = rank[inverse.reshape(-1)]
    originals = uniques[order].tolist()
    label_map = {new_id: label for new_id, label in enumerate(originals, start=1)}
    return EdgeEndSequence(relabeled), label_map


def _relabel_by_dict(ends: Sequence[Hashable]) -> Tuple[EdgeEndSequence, Dict[int, Hashable]]:
    seen: Dict[Hashable, int] = {}
    relabeled = np.empty(len(ends), dtype=np.int64)
    for i, label in enumerate(ends):
        if label not in seen:
            seen[label] = len(seen) + 1
        relabeled[i] = seen[label]
    return EdgeEndSequence(relabeled), {new_id: label for label, new_id in seen.items()}


def degree_counts(degrees: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Degree histogram m(d) as (distinct degrees, counts).

    Args:
        degrees: Degree array

    Returns:
        Sorted distinct degrees and their multiplicities
    """
    values, counts = np.unique(np.asarray(degrees, dtype=np.int64), return_counts=True)
    return values, counts


def arrival_alpha(model: BNTLModel) -> Optional[float]:
    """The discount an arrival law reads from its model (coupled family only)."""
    return model.alpha if isinstance(model.arrivals, CoupledPYP) else None


def as_generator(rng: Union[np.random.Generator, int, None]) -> Tuple[np.random.Generator, Optional[int]]:
    """
    Normalise a seed or generator argument.

    Args:
        rng: numpy Generator, integer seed, or None for fresh entropy

    Returns:
        (Generator, seed record or None when a Generator was passed)
    """
    if isinstance(rng, np.random.Generator):
        return rng, None
    if rng is None:
        seed = int(np.random.SeedSequence().entropy % (2 ** 63))
    else:
        seed = int(rng)
    return np.random.default_rng(seed), seed
