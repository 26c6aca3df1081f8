"""Exception hierarchy shared by all solver modules.

Every error carries a stable ``name`` so the CLI can report the originating
failure without relying on Python class paths.
"""

from __future__ import annotations


class RSPOMDPError(Exception):
    name = "RSPOMDPError"

    def __init__(self, message: str = "", **details: object) -> None:
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.name, "message": str(self)}
        if self.details:
            out["details"] = {k: _jsonable(v) for k, v in self.details.items()}
        return out


def _jsonable(v: object) -> object:
    if isinstance(v, (int, float, str, bool)) or v is None:
        return v
    return repr(v)


class ModelError(RSPOMDPError, ValueError):
    """Raised when a model document cannot be turned into a model at all."""

    name = "ModelError"


class InadmissibleAction(RSPOMDPError, ValueError):
    name = "InadmissibleAction"


class GridOverflow(RSPOMDPError, ValueError):
    name = "GridOverflow"


class DomainError(RSPOMDPError, ValueError):
    """A utility was evaluated outside the set where it is defined."""

    name = "DomainError"


class UnreachableObservation(RSPOMDPError, ValueError):
    """The observation has zero predictive mass, so no posterior exists."""

    name = "UnreachableObservation"


class WrongUtility(RSPOMDPError, TypeError):
    name = "WrongUtility"


class PolicyIncomplete(RSPOMDPError, KeyError):
    name = "PolicyIncomplete"

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return Exception.__str__(self)


class TooLarge(RSPOMDPError, RuntimeError):
    name = "TooLarge"


class BetaOne(RSPOMDPError, ValueError):
    name = "BetaOne"


class CostNotPositive(RSPOMDPError, ValueError):
    name = "CostNotPositive"


class NonMonotoneUtility(RSPOMDPError, ValueError):
    name = "NonMonotoneUtility"


class OutOfRange(RSPOMDPError, ValueError):
    name = "OutOfRange"


class ValueOverflow(RSPOMDPError, OverflowError):
    """Exponential weights left the floating-point range."""

    name = "OverflowError"
