"""
Optimize - Bounded maximisation helpers

Thin wrappers over ``scipy.optimize.minimize_scalar`` (bounded golden-section
/ Brent search) that maximise, survive ``-inf`` objective values and report
whether the optimum sits on a bound.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.optimize import minimize_scalar


logger = logging.getLogger(__name__)

# Stand-in for -inf so the minimiser keeps comparing finite numbers
_PENALTY = 1e300


@dataclass
class ScalarMaximum:
    """Result of a bounded scalar maximisation."""

    x: float
    value: float
    at_boundary: bool
    evaluations: int


def maximize_scalar(
    objective: Callable[[float], float],
    lower: float,
    upper: float,
    xatol: float = 1e-10,
    maxiter: int = 500,
) -> ScalarMaximum:
    """
    Maximise a scalar function on [lower, upper].

    Args:
        objective: Function to maximise (may return -inf)
        lower: Lower bound
        upper: Upper bound
        xatol: Absolute tolerance on the argument
        maxiter: Iteration cap

    Returns:
        ScalarMaximum with argmax, value and boundary flag
    """

    def negated(x: float) -> float:
        value = objective(x)
        if not np.isfinite(value):
            return _PENALTY
        return -value

    result = minimize_scalar(
        negated,
        bounds=(lower, upper),
        method="bounded",
        options={"xatol": xatol, "maxiter": maxiter},
    )
    x = float(result.x)
    value = objective(x)
    span = upper - lower
    at_boundary = min(x - lower, upper - x) <= max(1e3 * xatol, 1e-7 * span)
    return ScalarMaximum(x=x, value=float(value), at_boundary=bool(at_boundary), evaluations=int(result.nfev))


def maximize_nested(
    objective: Callable[[float, float], float],
    outer_bounds: Tuple[float, float],
    inner_bounds: Callable[[float], Tuple[float, float]],
    xatol: float = 1e-8,
) -> Tuple[ScalarMaximum, ScalarMaximum]:
    """
    Maximise f(outer, inner) by profiling the inner parameter.

    Args:
        objective: Function of (outer, inner)
        outer_bounds: Bounds of the outer parameter
        inner_bounds: Bounds of the inner parameter given the outer one
        xatol: Tolerance for both searches

    Returns:
        (outer maximum, inner maximum at the outer argmax)
    """

    def profile(outer: float) -> float:
        lo, hi = inner_bounds(outer)
        return maximize_scalar(lambda inner: objective(outer, inner), lo, hi, xatol=xatol).value

    outer_best = maximize_scalar(profile, outer_bounds[0], outer_bounds[1], xatol=xatol)
    lo, hi = inner_bounds(outer_best.x)
    inner_best = maximize_scalar(lambda inner: objective(outer_best.x, inner), lo, hi, xatol=xatol)
    logger.debug(
        f"Nested maximum at outer={outer_best.x:.6g}, inner={inner_best.x:.6g}, "
        f"value={inner_best.value:.6f}"
    )
    return outer_best, inner_best
