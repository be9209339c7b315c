"""
Slice Sampling - Univariate stepping-out and shrinkage slice sampler

Used for every non-conjugate scalar update (α, θ, τ). The target is given as
an unnormalised log density that returns ``-inf`` outside its support; the
optional hard bounds keep the bracket inside an open interval.
"""

import logging
import math
from typing import Callable, Optional, Tuple

import numpy as np

from ..errors import InvariantViolation


logger = logging.getLogger(__name__)


def slice_sample(
    x0: float,
    log_density: Callable[[float], float],
    rng: np.random.Generator,
    width: float = 1.0,
    max_steps_out: int = 50,
    lower: float = -math.inf,
    upper: float = math.inf,
    log_density_x0: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Draw one slice-sampling update of a scalar.

    Stepping out uses Neal's randomised budget (``max_steps_out`` steps split
    between the two sides); shrinkage always accepts eventually because the
    current point lies in the slice.

    Args:
        x0: Current value (must have finite log density)
        log_density: Unnormalised log density
        rng: Random generator
        width: Initial bracket width
        max_steps_out: Total step-out budget
        lower: Open lower bound of the support
        upper: Open upper bound of the support
        log_density_x0: log_density(x0) when already known

    Returns:
        (new value, log density at the new value)
    """
    f0 = log_density(x0) if log_density_x0 is None else log_density_x0
    if not np.isfinite(f0):
        raise InvariantViolation(
            "slice_start_outside_support",
            f"Slice sampler started at {x0} with log density {f0}",
            x0=x0,
        )

    log_y = f0 - rng.exponential()

    left = x0 - width * rng.random()
    right = left + width
    steps_left = int(math.floor(max_steps_out * rng.random()))
    steps_right = max_steps_out - 1 - steps_left

    while steps_left > 0 and left > lower and log_density(left) > log_y:
        left -= width
        steps_left -= 1
    while steps_right > 0 and right < upper and log_density(right) > log_y:
        right += width
        steps_right -= 1

    left = max(left, lower)
    right = min(right, upper)

    while True:
        x1 = left + rng.random() * (right - left)
        if lower < x1 < upper:
            f1 = log_density(x1)
            if f1 > log_y:
                return float(x1), float(f1)
        if x1 < x0:
            left = x1
        else:
            right = x1
        if right - left <= 1e-14 * max(1.0, abs(x0)):
            logger.debug(f"Slice bracket collapsed at {x0}; keeping current value")
            return float(x0), float(f0)
