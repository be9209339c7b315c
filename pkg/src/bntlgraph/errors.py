"""
Errors Module - Structured exceptions and zero-mass log probabilities

Every error carries a short machine-readable ``reason`` code plus a details
dictionary, and knows the process exit code the command line should use.
"""

import math
from typing import Any, Dict


class BNTLError(Exception):
    """
    Base class for all bntlgraph errors.

    Attributes:
        reason: Short reason code (e.g. "vertex_out_of_order")
        details: Extra context, JSON-serialisable after ``to_dict``
        exit_code: Exit status used by the command-line tool
    """

    exit_code: int = 1

    def __init__(self, reason: str, message: str = "", **details: Any) -> None:
        super().__init__(message or reason)
        self.reason = reason
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        """Return a JSON-friendly description of the error."""
        return {
            "error": type(self).__name__,
            "reason": self.reason,
            "message": str(self),
            "details": {key: _jsonable(value) for key, value in self.details.items()},
        }


class DataError(BNTLError):
    """Input data cannot be used as given."""

    exit_code = 3


class LabelingError(DataError):
    """Edge-end labels are not in order of first appearance."""


class InfeasibleError(DataError):
    """Degrees and arrival times violate the arrival constraints."""


class UnidentifiableError(DataError):
    """The data carry no information about the requested parameter."""


class InsufficientDataError(DataError):
    """Too few vertices or ends for the requested estimate."""


class ParseError(DataError):
    """A line of an edge-list file could not be parsed."""


class ParameterError(BNTLError):
    """A model parameter or prior hyperparameter is out of range."""

    exit_code = 2


class NumericError(BNTLError):
    """Numerical failure while evaluating or sampling."""

    exit_code = 4


class DomainError(NumericError):
    """A log-probability was requested outside its domain."""


class InvariantViolation(NumericError):
    """A sampler state broke one of its invariants."""


class ZeroMass(float):
    """
    A ``-inf`` log probability that remembers why the mass is zero.

    Behaves exactly like ``float('-inf')`` in arithmetic and comparisons.
    """

    reason: str

    def __new__(cls, reason: str) -> "ZeroMass":
        obj = super().__new__(cls, -math.inf)
        obj.reason = reason
        return obj

    def __repr__(self) -> str:
        return f"ZeroMass({self.reason!r})"


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return str(value)
