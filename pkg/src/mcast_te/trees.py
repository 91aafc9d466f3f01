"""Tree routing, branch-state semantics, per-edge copy counts and cost.

A tree is an arborescence encoded as a child->parent map. Per group, every
member (destination or assigned state node) is served by a delivery segment
running from its nearest upstream state node (or the source) down to it; the
number of copies a packet makes on an edge equals the number of segments
crossing that edge. The source never consumes state capacity and always
forwards one copy per child demand collapse (it behaves like a state node).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .exceptions import ContractViolation, InstanceError
from .graph import MulticastGroup, Network, max_destinations
from .rational import common_denominator


class TreeRouting:
    """Rooted arborescence for one group, encoded as a parent map."""

    __slots__ = ("group_id", "root", "parent", "children")

    def __init__(self, group_id: int, root: int, parent: Mapping[int, int] | None = None):
        self.group_id = group_id
        self.root = root
        self.parent: dict[int, int] = dict(parent or {})
        self.children: dict[int, list[int]] = {root: []}
        for child, par in sorted(self.parent.items()):
            self.children.setdefault(par, [])
            self.children.setdefault(child, [])
            self.children[par].append(child)
        for kids in self.children.values():
            kids.sort()

    # -- structure -------------------------------------------------------

    def nodes(self) -> set[int]:
        return set(self.children.keys())

    def on_tree(self, v: int) -> bool:
        return v in self.children

    def child_count(self, v: int) -> int:
        kids = self.children.get(v)
        return 0 if kids is None else len(kids)

    def is_leaf(self, v: int) -> bool:
        return self.on_tree(v) and not self.children[v]

    def degree(self, v: int) -> int:
        """Number of tree edges at v (parent edge plus children)."""
        d = self.child_count(v)
        if v != self.root:
            d += 1
        return d

    def edges(self) -> list[tuple[int, int]]:
        return sorted((p, c) for c, p in self.parent.items())

    def clone(self) -> "TreeRouting":
        t = TreeRouting.__new__(TreeRouting)
        t.group_id = self.group_id
        t.root = self.root
        t.parent = dict(self.parent)
        t.children = {v: list(kids) for v, kids in self.children.items()}
        return t

    def attach(self, child: int, parent: int) -> None:
        if child in self.parent or child == self.root:
            raise InstanceError(f"node {child} already on tree")
        if parent not in self.children:
            raise InstanceError(f"parent {parent} not on tree")
        self.parent[child] = parent
        self.children[child] = []
        kids = self.children[parent]
        kids.append(child)
        kids.sort()

    def detach_leaf(self, v: int) -> None:
        if self.children.get(v):
            raise InstanceError(f"node {v} is not a leaf")
        par = self.parent.pop(v)
        self.children[par].remove(v)
        del self.children[v]

    def ancestors(self, v: int):
        """Walk from v's parent up to the root."""
        while v != self.root:
            v = self.parent[v]
            yield v

    def subtree(self, v: int) -> list[int]:
        """All nodes at or below v (preorder, deterministic)."""
        out = [v]
        stack = [v]
        while stack:
            u = stack.pop()
            for c in reversed(self.children[u]):
                out.append(c)
                stack.append(c)
        return out

    def postorder(self) -> list[int]:
        order: list[int] = []
        stack: list[tuple[int, bool]] = [(self.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                order.append(v)
                continue
            stack.append((v, True))
            for c in reversed(self.children[v]):
                stack.append((c, False))
        return order

    def depth_scaled(self, net: Network) -> dict[int, int]:
        """Scaled cost of the tree path from the root to every node."""
        depth = {self.root: 0}
        stack = [self.root]
        while stack:
            u = stack.pop()
            for c in self.children[u]:
                depth[c] = depth[u] + net.icost_between(u, c)
                stack.append(c)
        return depth

    def validate(self, net: Network, group: MulticastGroup) -> list[str]:
        """Structural invariants; returns a list of problems (empty = valid)."""
        problems: list[str] = []
        if self.root != group.source:
            problems.append(f"group {self.group_id}: root is not the group source")
        seen = {self.root}
        for child, par in self.parent.items():
            if child == self.root:
                problems.append(f"group {self.group_id}: root has a parent")
            if net.edge_between(par, child) is None:
                problems.append(
                    f"group {self.group_id}: tree edge {par}->{child} not in network"
                )
        # Every node must reach the root through parents (acyclicity).
        for v in self.parent:
            if v in seen:
                continue
            trail = [v]
            trail_set = {v}
            cur = v
            while cur not in seen:
                nxt = self.parent.get(cur)
                if nxt is None:
                    problems.append(f"group {self.group_id}: node {cur} detached from root")
                    break
                if nxt in trail_set:
                    problems.append(f"group {self.group_id}: cycle through node {nxt}")
                    break
                trail.append(nxt)
                trail_set.add(nxt)
                cur = nxt
            seen.update(trail)
        for d in group.destinations:
            if not self.on_tree(d):
                problems.append(f"group {self.group_id}: destination {d} not on tree")
        for v in self.children:
            if self.is_leaf(v) and v not in group.destinations and v != self.root:
                problems.append(f"group {self.group_id}: non-destination leaf {v}")
        return problems


def branch_nodes(tree: TreeRouting) -> frozenset[int]:
    """Non-root on-tree nodes with at least two children (>= 3 incident edges)."""
    return frozenset(
        v for v, kids in tree.children.items() if v != tree.root and len(kids) >= 2
    )


def nearest_upstream_state(tree: TreeRouting, states: Iterable[int], v: int) -> int:
    """First ancestor of v that holds a state for this tree, else the source."""
    if not tree.on_tree(v):
        raise ContractViolation(f"node {v} is not on the tree")
    state_set = set(states)
    for anc in tree.ancestors(v):
        if anc in state_set:
            return anc
    return tree.root


def edge_transmissions(
    tree: TreeRouting, destinations: Iterable[int], states: Iterable[int]
) -> dict[tuple[int, int], int]:
    """Copies of each packet crossing every tree edge under the given states.

    Leaves demand one copy; a stateless node forwards the sum of its
    children's demands (plus one if it is itself a destination, for its own
    delivery segment); a state node collapses its subtree to a single copy.
    """
    dests = set(destinations)
    state_set = set(states)
    bad = state_set - set(branch_nodes(tree))
    if bad:
        raise ContractViolation(f"states outside the branch set: {sorted(bad)}")
    eps: dict[tuple[int, int], int] = {}
    demand: dict[int, int] = {}
    for v in tree.postorder():
        if v == tree.root:
            continue
        below = sum(demand[c] for c in tree.children[v])
        if v in state_set:
            up = 1
        elif v in dests:
            up = below + 1
        else:
            up = below
        demand[v] = up
        eps[(tree.parent[v], v)] = up
    return eps


def _tree_cost_scaled(
    net: Network, tree: TreeRouting, destinations: Iterable[int], states: Iterable[int]
) -> int:
    dests = set(destinations)
    state_set = set(states)
    total = 0
    demand: dict[int, int] = {}
    for v in tree.postorder():
        if v == tree.root:
            continue
        below = sum(demand[c] for c in tree.children[v])
        if v in state_set:
            up = 1
        elif v in dests:
            up = below + 1
        else:
            up = below
        demand[v] = up
        total += up * net.icost_between(tree.parent[v], v)
    return total


def _segment_cost_sum_scaled(
    net: Network, tree: TreeRouting, destinations: Iterable[int], states: Iterable[int]
) -> int:
    """Independent definition: sum of delivery-segment costs over all members."""
    depth = tree.depth_scaled(net)
    state_set = set(states)
    total = 0
    for v in sorted(set(destinations) | state_set):
        anchor = nearest_upstream_state(tree, state_set, v)
        total += depth[v] - depth[anchor]
    return total


def tree_cost(
    net: Network,
    tree: TreeRouting,
    destinations: Iterable[int],
    states: Iterable[int] = (),
) -> Fraction:
    """Bandwidth cost of one tree under the given state set (rate excluded)."""
    dests = set(destinations)
    state_set = set(states)
    scaled = _tree_cost_scaled(net, tree, dests, state_set)
    assert scaled == _segment_cost_sum_scaled(net, tree, dests, state_set), (
        "copy-count cost and segment-sum cost diverge"
    )
    return net.cost_from_scaled(scaled)


class StateAssignment:
    """Per-tree branch-state sets (one column of capacity usage per node)."""

    __slots__ = ("states",)

    def __init__(self, states: Mapping[int, Iterable[int]] | None = None):
        self.states: dict[int, set[int]] = {
            gid: set(nodes) for gid, nodes in (states or {}).items()
        }

    def for_group(self, gid: int) -> set[int]:
        return self.states.setdefault(gid, set())

    def add(self, gid: int, node: int) -> None:
        self.for_group(gid).add(node)

    def discard(self, gid: int, node: int) -> None:
        self.for_group(gid).discard(node)

    def node_use_count(self, node: int) -> int:
        return sum(1 for nodes in self.states.values() if node in nodes)

    def groups_using(self, node: int) -> list[int]:
        return sorted(gid for gid, nodes in self.states.items() if node in nodes)

    def total_entries(self) -> int:
        return sum(len(nodes) for nodes in self.states.values())

    def clone(self) -> "StateAssignment":
        return StateAssignment(self.states)

    def canonical(self) -> dict[int, tuple[int, ...]]:
        return {gid: tuple(sorted(nodes)) for gid, nodes in sorted(self.states.items())}

    def __eq__(self, other) -> bool:
        return isinstance(other, StateAssignment) and self.canonical() == other.canonical()


def total_cost(
    net: Network,
    trees: Mapping[int, TreeRouting],
    assignment: StateAssignment,
    groups: Iterable[MulticastGroup],
) -> Fraction:
    """Sum over groups of rate times tree cost."""
    total = Fraction(0)
    for g in groups:
        tree = trees[g.id]
        scaled = _tree_cost_scaled(net, tree, g.destinations, assignment.for_group(g.id))
        total += g.rate * net.cost_from_scaled(scaled)
    return total


def state_gain_scaled(
    net: Network,
    tree: TreeRouting,
    destinations: set[int],
    states: set[int],
    node: int,
) -> int:
    """Scaled cost drop from adding one state at ``node`` (rate excluded).

    Equals (visible members below node minus one-if-not-a-destination) times
    the cost of the stateless segment from node up to its nearest state.
    """
    seg = 0
    cur = node
    while cur != tree.root:
        par = tree.parent[cur]
        seg += net.icost_between(par, cur)
        if par in states:
            break
        cur = par
    visible = 0
    stack = list(tree.children[node])
    while stack:
        v = stack.pop()
        if v in states:
            visible += 1
            continue
        if v in destinations:
            visible += 1
        stack.extend(tree.children[v])
    if node not in destinations:
        visible -= 1
    return visible * seg


def marginal_gain(
    net: Network,
    trees: Mapping[int, TreeRouting],
    assignment: StateAssignment,
    groups: Iterable[MulticastGroup],
    candidate: tuple[int, int],
) -> Fraction:
    """Total-cost reduction from adding state (group, node); always >= 0."""
    gid, node = candidate
    by_id = {g.id: g for g in groups}
    if gid not in by_id or gid not in trees:
        raise ContractViolation(f"unknown group {gid}")
    group = by_id[gid]
    tree = trees[gid]
    states = assignment.for_group(gid)
    if node in states:
        raise ContractViolation(f"state ({gid},{node}) already assigned")
    if node not in branch_nodes(tree):
        raise ContractViolation(f"node {node} is not a branch node of group {gid}")
    gain = state_gain_scaled(net, tree, set(group.destinations), states, node)
    return group.rate * net.cost_from_scaled(gain)


# ---------------------------------------------------------------------------
# Feasibility verification and the Solution value object
# ---------------------------------------------------------------------------

MODE_NODE = "node"
MODE_NODE_LINK = "node-link"
MODE_NODE_WEAK_LINK = "node-weak-link"
VERIFY_MODES = (MODE_NODE, MODE_NODE_LINK, MODE_NODE_WEAK_LINK)


@dataclass(frozen=True)
class NodeViolation:
    node: int
    label: str
    used: int
    capacity: int


@dataclass(frozen=True)
class EdgeViolation:
    tail: int
    head: int
    tail_label: str
    head_label: str
    flow: Fraction
    capacity: Fraction


@dataclass
class FeasibilityReport:
    mode: str
    node_violations: list[NodeViolation] = field(default_factory=list)
    edge_violations: list[EdgeViolation] = field(default_factory=list)
    structural: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not (self.node_violations or self.edge_violations or self.structural)

    def summary(self) -> str:
        if self.feasible:
            return f"feasible ({self.mode})"
        return (
            f"infeasible ({self.mode}): {len(self.node_violations)} node, "
            f"{len(self.edge_violations)} edge, {len(self.structural)} structural"
        )


def verify_feasible(
    net: Network,
    trees: Mapping[int, TreeRouting],
    assignment: StateAssignment,
    groups: Iterable[MulticastGroup],
    mode: str = MODE_NODE,
    *,
    weighted_nodes: bool = False,
) -> FeasibilityReport:
    """Check node capacities and (per mode) link capacities; never raises.

    ``weighted_nodes`` charges each state entry its tree degree instead of 1
    (the general storage model); the default matches the capacity constraint
    of the problem definition, one entry per tree.
    """
    if mode not in VERIFY_MODES:
        raise ContractViolation(f"unknown verification mode {mode!r}")
    report = FeasibilityReport(mode=mode)
    groups = sorted(groups, key=lambda g: g.id)

    node_use = [0] * net.num_nodes
    for g in groups:
        tree = trees.get(g.id)
        if tree is None:
            report.structural.append(f"group {g.id}: no tree")
            continue
        report.structural.extend(tree.validate(net, g))
        states = assignment.for_group(g.id)
        branches = branch_nodes(tree)
        for u in sorted(states):
            if u not in branches:
                report.structural.append(
                    f"group {g.id}: state at {u} which is not a branch node"
                )
            else:
                node_use[u] += tree.degree(u) if weighted_nodes else 1
    if report.structural:
        return report

    for u in range(net.num_nodes):
        if node_use[u] > net.node_capacity[u]:
            report.node_violations.append(
                NodeViolation(u, net.labels[u], node_use[u], net.node_capacity[u])
            )

    if mode in (MODE_NODE_LINK, MODE_NODE_WEAK_LINK):
        rate_scale = common_denominator(g.rate for g in groups) if groups else 1
        flow: dict[tuple[int, int], int] = {}
        for g in groups:
            tree = trees[g.id]
            irate = int(g.rate * rate_scale)
            if mode == MODE_NODE_WEAK_LINK:
                for edge in tree.edges():
                    flow[edge] = flow.get(edge, 0) + irate
            else:
                eps = edge_transmissions(tree, g.destinations, assignment.for_group(g.id))
                for edge, count in eps.items():
                    flow[edge] = flow.get(edge, 0) + irate * count
        for edge in sorted(flow):
            idx = net.edge_index.get(edge)
            if idx is None:
                continue  # tree validation already failed in that case
            cap = net.edges[idx].capacity
            if cap is not None and flow[edge] > cap * rate_scale:
                report.edge_violations.append(
                    EdgeViolation(
                        edge[0],
                        edge[1],
                        net.labels[edge[0]],
                        net.labels[edge[1]],
                        Fraction(flow[edge], rate_scale),
                        cap,
                    )
                )
    return report


@dataclass
class Solution:
    """Trees plus assignment with the recomputed cost and feasibility report."""

    mode: str
    groups: list[MulticastGroup]
    trees: dict[int, TreeRouting]
    assignment: StateAssignment
    total_cost: Fraction
    report: FeasibilityReport
    max_dest: int

    @classmethod
    def build(
        cls,
        net: Network,
        groups: Iterable[MulticastGroup],
        trees: Mapping[int, TreeRouting],
        assignment: StateAssignment,
        mode: str,
        *,
        weighted_nodes: bool = False,
    ) -> "Solution":
        groups = sorted(groups, key=lambda g: g.id)
        report = verify_feasible(
            net, trees, assignment, groups, mode, weighted_nodes=weighted_nodes
        )
        cost = total_cost(net, trees, assignment, groups)
        return cls(
            mode=mode,
            groups=list(groups),
            trees={g.id: trees[g.id] for g in groups},
            assignment=assignment.clone(),
            total_cost=cost,
            report=report,
            max_dest=max_destinations(groups),
        )

    def edge_copies(self) -> dict[tuple[int, int], dict[int, int]]:
        """Per-edge, per-group packet copy counts (sparse)."""
        out: dict[tuple[int, int], dict[int, int]] = {}
        for g in self.groups:
            eps = edge_transmissions(
                self.trees[g.id], g.destinations, self.assignment.for_group(g.id)
            )
            for edge, count in eps.items():
                out.setdefault(edge, {})[g.id] = count
        return out

    def edge_flows(self) -> dict[tuple[int, int], Fraction]:
        rates = {g.id: g.rate for g in self.groups}
        flows: dict[tuple[int, int], Fraction] = {}
        for edge, per_group in self.edge_copies().items():
            flows[edge] = sum(
                (rates[gid] * count for gid, count in per_group.items()), Fraction(0)
            )
        return flows
