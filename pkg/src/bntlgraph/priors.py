"""
Priors Module - Prior distributions for α and the arrival parameters

Defaults: α ~ Uniform(−100, 1); β ~ Beta(1, 1); λ ~ Gamma(1, rate 1);
τ ~ Beta(1, 1); θ flat on (−τ, θ_max). Densities come from ``scipy.stats``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import stats

from .core import CoupledPYP, Geometric, InterarrivalModel, PYPInduced, ShiftedPoisson
from .errors import ParameterError


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlphaPrior:
    """
    Prior on the discount α.

    Attributes:
        kind: "uniform" on (low, high) or "normal"(loc, scale) truncated to α < 1
    """

    kind: str = "uniform"
    low: float = -100.0
    high: float = 1.0
    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "normal"):
            raise ParameterError("invalid_prior", f"Unknown alpha prior kind '{self.kind}'")
        if self.kind == "uniform" and not self.low < min(self.high, 1.0):
            raise ParameterError("invalid_prior", "Uniform alpha prior needs low < min(high, 1)")
        if self.kind == "normal" and not self.scale > 0:
            raise ParameterError("invalid_prior", "Normal alpha prior needs a positive scale")

    @property
    def bounds(self) -> Tuple[float, float]:
        """Open support of the prior intersected with α < 1."""
        if self.kind == "uniform":
            return float(self.low), float(min(self.high, 1.0))
        return -math.inf, 1.0

    def log_prior(self, alpha: float) -> float:
        """Log density up to a constant (−inf outside the support)."""
        lo, hi = self.bounds
        if not lo < alpha < hi:
            return -math.inf
        if self.kind == "uniform":
            return float(-math.log(hi - lo))
        return float(stats.norm.logpdf(alpha, loc=self.loc, scale=self.scale))

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "AlphaPrior":
        return cls(**{k: v for k, v in section.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class ArrivalPriors:
    """
    Priors on the interarrival parameters.

    Attributes:
        beta_a, beta_b: Beta prior on β
        lam_shape, lam_rate: Gamma(shape, rate) prior on λ
        tau_a, tau_b: Beta prior on τ
        theta_max: Upper truncation of the flat θ prior
    """

    beta_a: float = 1.0
    beta_b: float = 1.0
    lam_shape: float = 1.0
    lam_rate: float = 1.0
    tau_a: float = 1.0
    tau_b: float = 1.0
    theta_max: float = 1e4

    def __post_init__(self) -> None:
        for name in ("beta_a", "beta_b", "lam_shape", "lam_rate", "tau_a", "tau_b", "theta_max"):
            value = getattr(self, name)
            if not (value > 0 and np.isfinite(value)):
                raise ParameterError("invalid_prior", f"Prior hyperparameter {name} must be positive, got {value}")

    def log_prior(self, arrivals: InterarrivalModel, alpha: Optional[float] = None) -> float:
        """
        Log prior density of an interarrival model's parameters.

        Args:
            arrivals: Interarrival model
            alpha: BNTL discount (needed for the coupled family's θ range)

        Returns:
            Log density (−inf outside the support)
        """
        if isinstance(arrivals, Geometric):
            return float(stats.beta.logpdf(arrivals.beta, self.beta_a, self.beta_b))
        if isinstance(arrivals, ShiftedPoisson):
            return float(stats.gamma.logpdf(arrivals.lam, self.lam_shape, scale=1.0 / self.lam_rate))
        if isinstance(arrivals, PYPInduced):
            return self.log_prior_pyp(arrivals.theta, arrivals.tau)
        if isinstance(arrivals, CoupledPYP):
            if alpha is None:
                raise ParameterError("missing_alpha", "Coupled PYP prior needs alpha")
            return self.log_prior_theta(arrivals.theta, alpha)
        raise ParameterError("unknown_family", f"Unsupported arrivals {arrivals!r}")

    def log_prior_theta(self, theta: float, tau: float) -> float:
        """Flat θ prior on (−τ, θ_max)."""
        if -tau < theta < self.theta_max:
            return 0.0
        return -math.inf

    def log_prior_pyp(self, theta: float, tau: float) -> float:
        if not 0.0 < tau < 1.0:
            return -math.inf
        return float(stats.beta.logpdf(tau, self.tau_a, self.tau_b)) + self.log_prior_theta(theta, tau)

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "ArrivalPriors":
        return cls(**{k: v for k, v in section.items() if k in cls.__dataclass_fields__})
