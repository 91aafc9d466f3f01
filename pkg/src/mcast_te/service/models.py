"""Pydantic request/response models for the HTTP service (and the CLI,
which drives the same handlers in-process)."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

Rational = int | float | str


class EdgeModel(BaseModel):
    tail: str
    head: str
    cost: Rational = 1
    capacity: Optional[Rational] = None


class GroupModel(BaseModel):
    id: int
    source: str
    destinations: list[str]
    rate: Rational = 1


class InstanceModel(BaseModel):
    """Native instance format: nodes, per-node state capacity, directed
    edges with cost/capacity, and multicast groups."""

    nodes: list[str]
    node_capacity: dict[str, int] = Field(default_factory=dict)
    edges: list[EdgeModel] = Field(default_factory=list)
    groups: list[GroupModel] = Field(default_factory=list)


class TreeModel(BaseModel):
    group: int
    root: str
    rate: Rational = 1
    destinations: list[str]
    parents: dict[str, str]
    states: list[str]


class EdgeLoadModel(BaseModel):
    tail: str
    head: str
    copies: dict[str, int]
    flow: Rational


class NodeViolationModel(BaseModel):
    node: str
    used: int
    capacity: int


class EdgeViolationModel(BaseModel):
    tail: str
    head: str
    flow: Rational
    capacity: Rational


class FeasibilityModel(BaseModel):
    feasible: bool
    node_violations: list[NodeViolationModel] = Field(default_factory=list)
    edge_violations: list[EdgeViolationModel] = Field(default_factory=list)
    structural: list[str] = Field(default_factory=list)


class SolutionModel(BaseModel):
    mode: str
    total_cost: str
    max_destinations: int
    trees: list[TreeModel]
    edges: list[EdgeLoadModel]
    feasibility: FeasibilityModel


Algorithm = Literal["mtrsa", "spt", "st", "exact"]
Mode = Literal["node", "node-link"]


class SolveRequest(BaseModel):
    instance: InstanceModel
    algorithm: Algorithm = "mtrsa"
    mode: Mode = "node"
    seed: int = 0
    node_budget: int = 10
    assign_budget: int = 16


class SolveResponse(BaseModel):
    solution: SolutionModel
    wall_ms: float
    summary: str


class VerifyRequest(BaseModel):
    instance: InstanceModel
    solution: SolutionModel
    mode: Optional[str] = None


class VerifyResponse(BaseModel):
    ok: bool
    cost_matches: bool
    claimed_cost: str
    recomputed_cost: str
    feasibility: FeasibilityModel
    detail: str


class MembershipEvent(BaseModel):
    op: Literal["join", "leave"]
    group: int
    node: str


class MembershipRequest(BaseModel):
    instance: InstanceModel
    solution: SolutionModel
    events: list[MembershipEvent]


class MembershipStep(BaseModel):
    event: MembershipEvent
    changed: bool
    warning: Optional[str] = None
    total_cost: str
    solution: SolutionModel


class MembershipResponse(BaseModel):
    steps: list[MembershipStep]


class RandomInstanceRequest(BaseModel):
    topology: Optional[str] = None
    instance: Optional[InstanceModel] = None
    trees: int
    destinations: int
    node_capacity: int = 0
    rate: Rational = 1
    seed: int = 0


class CalibrateRequest(BaseModel):
    instance: InstanceModel
    algorithm: Literal["spt", "st"] = "spt"


class GadgetRequest(BaseModel):
    kind: Literal["node", "link"]
    dimacs: str
    replication: int = 1
    gap: Rational = 10


class ExportIpRequest(BaseModel):
    instance: InstanceModel


class ExportIpResponse(BaseModel):
    lp: str


class HealthResponse(BaseModel):
    status: str
    version: str


class TopologiesResponse(BaseModel):
    topologies: list[str]


def instance_payload(data: dict[str, Any]) -> InstanceModel:
    return InstanceModel.model_validate(data)
