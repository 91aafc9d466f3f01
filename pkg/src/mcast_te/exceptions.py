"""Error types shared by the solver, oracle and I/O layers."""

from __future__ import annotations


class McastTeError(Exception):
    """Base class for all package errors."""


class TopologyParseError(McastTeError):
    """Malformed GraphML / instance file; message carries line context."""


class InstanceError(McastTeError):
    """Instance violates a structural invariant (bad ids, self loop, ...)."""


class InfeasibleInstanceError(McastTeError):
    """A group cannot be routed (unreachable destination, dead residual graph)."""

    def __init__(self, message: str, group_id: int | None = None, node: str | None = None):
        super().__init__(message)
        self.group_id = group_id
        self.node = node


class BudgetExceededError(McastTeError):
    """Exhaustive search refused: instance exceeds the enumeration budget."""


class JoinRejectedError(McastTeError):
    """Membership join could not find a feasible graft path."""


class ContractViolation(McastTeError):
    """Caller broke an operation precondition (e.g. states outside branch set)."""
