"""Multicast traffic engineering: joint tree routing and state assignment."""

__version__ = "0.1.0"

from .graph import Edge, Instance, MulticastGroup, Network, Path  # noqa: F401
from .solver import SolverConfig, solve  # noqa: F401
from .trees import Solution, StateAssignment, TreeRouting  # noqa: F401
