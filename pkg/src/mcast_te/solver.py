"""Joint multi-tree routing and branch-state assignment.

Two phases. Routing: one shortest-path tree per group (in link-capacity mode
groups are processed by ascending rate on a residual graph), then local
splices move branch load off overloaded nodes whenever an equally cheap
detour exists. Assignment: greedy state placement maximizing exact cost
reduction (normalized by storage weight in link mode), followed by a local
search that rebalances contended nodes and reroutes around stateless
branches. Every accepted step keeps the total cost non-increasing, which is
what yields the worst-case bound of max-group-size times the optimum in
node-capacity-only mode.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Sequence

from .exceptions import (
    ContractViolation,
    InfeasibleInstanceError,
    InstanceError,
    JoinRejectedError,
)
from .graph import MulticastGroup, Network, shortest_path_forest
from .knapsack import knapsack_select
from .rational import common_denominator
from .trees import (
    MODE_NODE,
    MODE_NODE_LINK,
    Solution,
    StateAssignment,
    TreeRouting,
    _tree_cost_scaled,
    branch_nodes,
    edge_transmissions,
    state_gain_scaled,
)


@dataclass(frozen=True)
class SolverConfig:
    """Solver mode and stage toggles. The solver itself is deterministic;
    the seed only feeds baselines that share this config shape."""

    mode: str = MODE_NODE
    max_reroute_passes: int = 4
    knapsack_precision: Fraction = Fraction(1, 10)
    seed: int = 0
    enable_reroute: bool = True
    enable_greedy: bool = True
    enable_local_search: bool = True

    def validate(self) -> None:
        if self.mode not in (MODE_NODE, MODE_NODE_LINK):
            raise ContractViolation(f"unknown solver mode {self.mode!r}")
        if not 0 < self.knapsack_precision <= 1:
            raise ContractViolation("knapsack precision must be in (0, 1]")
        if self.max_reroute_passes < 1:
            raise ContractViolation("max_reroute_passes must be >= 1")


class NodeLoadLedger:
    """Per-node count of trees in which the node is currently a branch node."""

    __slots__ = ("counts", "capacity")

    def __init__(self, capacity: Sequence[int], counts: Optional[Sequence[int]] = None):
        self.capacity = list(capacity)
        self.counts = list(counts) if counts is not None else [0] * len(self.capacity)

    @classmethod
    def from_trees(cls, net: Network, trees: Iterable[TreeRouting]) -> "NodeLoadLedger":
        ledger = cls(net.node_capacity)
        for tree in trees:
            for u in branch_nodes(tree):
                ledger.counts[u] += 1
        return ledger

    def classify(self, u: int) -> str:
        if self.counts[u] > self.capacity[u]:
            return "overloaded"
        if self.counts[u] == self.capacity[u]:
            return "full"
        return "under"

    def under(self, u: int) -> bool:
        return self.counts[u] < self.capacity[u]

    def overloaded(self, u: int) -> bool:
        return self.counts[u] > self.capacity[u]

    def overloaded_nodes(self) -> list[int]:
        """Descending overload amount, ties by node index."""
        over = [u for u in range(len(self.counts)) if self.overloaded(u)]
        over.sort(key=lambda u: (-(self.counts[u] - self.capacity[u]), u))
        return over

    def apply_branch_diff(self, old: frozenset[int], new: frozenset[int]) -> None:
        for u in old - new:
            self.counts[u] -= 1
        for u in new - old:
            self.counts[u] += 1


class _SpliceResult(NamedTuple):
    tree: TreeRouting
    old_branches: frozenset[int]
    new_branches: frozenset[int]
    removed_edges: list[tuple[int, int]]
    added_edges: list[tuple[int, int]]


def _apply_splice(
    tree: TreeRouting,
    dests: set[int],
    v: int,
    path_nodes: tuple[int, ...],
    interior: set[int],
) -> _SpliceResult:
    """Replace v's current upstream segment with path_nodes (w ... v) on a clone.

    Order matters: the old segment interior is removed first (the new path
    may reuse those now-free nodes), the new path is attached, and only then
    is the dangling non-destination chain above the old segment pruned, so an
    anchor sitting on that chain is kept alive by its new child.
    """
    t = tree.clone()
    old_branches = branch_nodes(tree)
    removed: list[tuple[int, int]] = []
    added: list[tuple[int, int]] = []

    cur = t.parent[v]
    removed.append((cur, v))
    t.children[cur].remove(v)
    del t.parent[v]
    # Drop the old segment interior (a clean chain ending at v's old parent).
    while cur in interior:
        par = t.parent[cur]
        removed.append((par, cur))
        t.detach_leaf(cur)
        cur = par

    # Attach the new path; interior nodes are fresh, v is re-attached last.
    for prev, node in zip(path_nodes, path_nodes[1:]):
        added.append((prev, node))
        if node == v:
            t.parent[v] = prev
            kids = t.children[prev]
            kids.append(v)
            kids.sort()
        else:
            t.attach(node, prev)

    # Prune upward from the segment top: childless non-destinations go, and
    # anything that just received a new child stops the walk naturally.
    while cur != t.root and not t.children[cur] and cur not in dests:
        par = t.parent[cur]
        removed.append((par, cur))
        t.detach_leaf(cur)
        cur = par
    return _SpliceResult(t, old_branches, branch_nodes(t), removed, added)


class _Work:
    """Mutable solver state shared by the stages."""

    def __init__(self, net: Network, groups: Sequence[MulticastGroup], config: SolverConfig):
        config.validate()
        ids = [g.id for g in groups]
        if len(set(ids)) != len(ids):
            raise InstanceError("group ids are not unique")
        for g in groups:
            g.validate(net)
        self.net = net
        self.config = config
        self.link_mode = config.mode == MODE_NODE_LINK
        self.groups: dict[int, MulticastGroup] = {g.id: g for g in groups}
        self.dests: dict[int, set[int]] = {g.id: set(g.destinations) for g in groups}
        if self.link_mode:
            self.order = [g.id for g in sorted(groups, key=lambda g: (g.rate, g.id))]
        else:
            self.order = sorted(self.groups)
        self.rate_scale = common_denominator(g.rate for g in groups) if groups else 1
        self.irate: dict[int, int] = {
            g.id: int(g.rate * self.rate_scale) for g in groups
        }
        # Edge capacities scaled by the rate denominator (None = unbounded).
        self.cap_scaled: list[Optional[Fraction]] = [
            None if e.capacity is None else e.capacity * self.rate_scale
            for e in net.edges
        ]
        self.weak_load: list[int] = [0] * net.num_edges
        self.trees: dict[int, TreeRouting] = {}
        self.states = StateAssignment()
        self.ledger: Optional[NodeLoadLedger] = None

    # -- helpers ----------------------------------------------------------

    def tree_cost_scaled(self, gid: int, tree: Optional[TreeRouting] = None,
                         states: Optional[set[int]] = None) -> int:
        tree = tree if tree is not None else self.trees[gid]
        states = states if states is not None else self.states.for_group(gid)
        return _tree_cost_scaled(self.net, tree, self.dests[gid], states)

    def add_weak_load(self, edges: Iterable[tuple[int, int]], gid: int, sign: int) -> None:
        amount = sign * self.irate[gid]
        for edge in edges:
            self.weak_load[self.net.edge_index[edge]] += amount

    def weak_edge_ok(self, eidx: int, gid: int) -> bool:
        cap = self.cap_scaled[eidx]
        return cap is None or self.weak_load[eidx] + self.irate[gid] <= cap


# ---------------------------------------------------------------------------
# Phase 1: shortest-path trees plus overload rerouting
# ---------------------------------------------------------------------------


def _tree_from_forest(
    net: Network,
    gid: int,
    source: int,
    dests: set[int],
    dist: Sequence[Optional[int]],
    parent: Sequence[int],
) -> TreeRouting:
    pmap: dict[int, int] = {}
    for d in sorted(dests):
        if dist[d] is None:
            raise InfeasibleInstanceError(
                f"group {gid}: destination {net.labels[d]!r} unreachable",
                group_id=gid,
                node=net.labels[d],
            )
        v = d
        while v != source and v not in pmap:
            pmap[v] = parent[v]
            v = parent[v]
    return TreeRouting(gid, source, pmap)


def build_spt(
    net: Network,
    group: MulticastGroup,
    residual: Optional[dict[tuple[int, int], Fraction]] = None,
) -> TreeRouting:
    """Union of deterministic shortest paths from the source to each
    destination (on the residual graph when given); always a tree."""
    edge_ok = None
    if residual is not None:
        allowed = {
            net.edge_index[edge]
            for edge, remaining in residual.items()
            if remaining is None or remaining >= group.rate
        }
        unknown = {
            net.edge_index[e] for e in net.edge_index if e not in residual
        }
        ok_set = allowed | unknown
        edge_ok = lambda eidx: eidx in ok_set  # noqa: E731
    dist, _, parent = shortest_path_forest(net, [group.source], edge_ok=edge_ok)
    return _tree_from_forest(net, group.id, group.source, set(group.destinations), dist, parent)


def _build_phase1_trees(work: _Work) -> None:
    net = work.net
    forest_cache: dict[int, tuple] = {}
    for gid in work.order:
        g = work.groups[gid]
        if work.link_mode:
            edge_ok = lambda eidx, _g=gid: work.weak_edge_ok(eidx, _g)  # noqa: E731
            dist, _, parent = shortest_path_forest(net, [g.source], edge_ok=edge_ok)
        else:
            row = forest_cache.get(g.source)
            if row is None:
                row = shortest_path_forest(net, [g.source])
                forest_cache[g.source] = row
            dist, _, parent = row
        tree = _tree_from_forest(net, gid, g.source, work.dests[gid], dist, parent)
        work.trees[gid] = tree
        if work.link_mode:
            work.add_weak_load(tree.edges(), gid, +1)
    work.ledger = NodeLoadLedger.from_trees(net, work.trees.values())


def _segment_targets(tree: TreeRouting, u: int, dests: set[int]):
    """Per child direction of u: (segment cost ignored, v, interior nodes).

    v is the nearest downstream branch node or destination; the interior is
    clean (no branch, no destination). Cost is filled in by the caller.
    """
    targets = []
    for child in tree.children[u]:
        interior = []
        v = child
        while v not in dests and tree.child_count(v) == 1:
            interior.append(v)
            v = tree.children[v][0]
        if tree.child_count(v) >= 2 or v in dests:
            targets.append((v, interior))
    return targets


def _segment_cost(net: Network, tree: TreeRouting, u: int, v: int) -> int:
    total = 0
    cur = v
    while cur != u:
        par = tree.parent[cur]
        total += net.icost_between(par, cur)
        cur = par
    return total


def _detour_candidates(
    work: _Work,
    gid: int,
    tree: TreeRouting,
    v: int,
    interior_removed: set[int],
    budget: int,
    eligible: set[int],
) -> list[tuple[int, int]]:
    """(cost, w) pairs for paths w -> v of cost <= budget whose interior
    avoids the (post-removal) tree; found by one bounded reverse search."""
    net = work.net
    tree_nodes = tree.nodes() - interior_removed
    check_weak = work.link_mode
    dist: dict[int, int] = {v: 0}
    found: dict[int, int] = {}
    heap: list[tuple[int, int]] = [(0, v)]
    while heap:
        d, x = heapq.heappop(heap)
        if d != dist.get(x):
            continue
        for eidx in net.in_edges[x]:
            if check_weak and not work.weak_edge_ok(eidx, gid):
                continue
            t = net.edges[eidx].tail
            nd = d + net.icost[eidx]
            if nd > budget:
                continue
            if t in eligible:
                if nd < found.get(t, nd + 1):
                    found[t] = nd
            if t in tree_nodes or t == v:
                continue  # on-tree nodes cannot be interior
            if nd < dist.get(t, nd + 1):
                dist[t] = nd
                heapq.heappush(heap, (nd, t))
    return sorted((cost, w) for w, cost in found.items())


def _canonical_detour_path(
    work: _Work,
    gid: int,
    tree: TreeRouting,
    w: int,
    v: int,
    interior_removed: set[int],
) -> Optional[tuple[tuple[int, ...], int]]:
    """Deterministic cheapest path w -> v with off-tree interior."""
    net = work.net
    tree_nodes = tree.nodes() - interior_removed

    def node_ok(x: int) -> bool:
        return x == w or x == v or x not in tree_nodes

    edge_ok = None
    if work.link_mode:
        edge_ok = lambda eidx: work.weak_edge_ok(eidx, gid)  # noqa: E731
    dist, _, parent = shortest_path_forest(net, [w], edge_ok=edge_ok, node_ok=node_ok)
    if dist[v] is None:
        return None
    nodes = [v]
    while nodes[-1] != w:
        nodes.append(parent[nodes[-1]])
    nodes.reverse()
    return tuple(nodes), dist[v]


def _attempt_splice(work: _Work, gid: int, u: int, v: int, interior: list[int], *,
                    relaxed: bool) -> bool:
    """Try to move v's segment from u to some eligible w; returns True when a
    move was accepted. Phase 1 (relaxed=False) accepts when the stateless
    total cost does not increase; the local-search pass (relaxed=True)
    accepts when the cost under the current assignment does not increase."""
    net = work.net
    tree = work.trees[gid]
    dests = work.dests[gid]
    ledger = work.ledger
    interior_removed = set(interior)
    budget = _segment_cost(net, tree, u, v)
    subtree_v = set(tree.subtree(v))

    eligible: set[int] = set()
    for w in tree.nodes():
        if w == u or w in subtree_v or w in interior_removed:
            continue
        if not ledger.under(w):
            continue
        if not relaxed and tree.is_leaf(w):
            continue
        eligible.add(w)
    if not eligible:
        return False

    candidates = _detour_candidates(work, gid, tree, v, interior_removed, budget, eligible)
    if not candidates:
        return False

    depth = tree.depth_scaled(net)
    states = work.states.for_group(gid)
    old_cost = work.tree_cost_scaled(gid) if relaxed else None
    members_below = sum(1 for x in subtree_v if x in dests)

    for est_cost, w in candidates:
        got = _canonical_detour_path(work, gid, tree, w, v, interior_removed)
        if got is None:
            continue
        path_nodes, path_cost = got
        if path_cost > budget:
            continue
        if not relaxed:
            # Stateless acceptance: member depths below v must not grow.
            delta = depth[w] + path_cost - depth[v]
            if members_below * delta > 0:
                continue
            result = _apply_splice(tree, dests, v, path_nodes, interior_removed)
        else:
            result = _apply_splice(tree, dests, v, path_nodes, interior_removed)
            new_states = states & set(result.new_branches)
            new_cost = work.tree_cost_scaled(gid, result.tree, new_states)
            if new_cost > old_cost:
                continue
        _commit_splice(work, gid, result)
        return True
    return False


def _commit_splice(work: _Work, gid: int, result: _SpliceResult) -> None:
    work.trees[gid] = result.tree
    work.ledger.apply_branch_diff(result.old_branches, result.new_branches)
    lost = result.old_branches - result.new_branches
    states = work.states.for_group(gid)
    for u in lost & states:
        work.states.discard(gid, u)
    if work.link_mode:
        work.add_weak_load(result.removed_edges, gid, -1)
        work.add_weak_load(result.added_edges, gid, +1)


def reroute_overloaded(work: _Work) -> None:
    """Move branch segments off overloaded nodes onto under-capacity nodes."""
    ledger = work.ledger
    for _ in range(work.config.max_reroute_passes):
        over = ledger.overloaded_nodes()
        if not over or not any(ledger.under(u) for u in range(work.net.num_nodes)):
            return
        changed = False
        for u in over:
            if not ledger.overloaded(u):
                continue
            for gid in sorted(work.trees):
                if not ledger.overloaded(u):
                    break
                tree = work.trees[gid]
                if u not in branch_nodes(tree):
                    continue
                # Keep splicing this tree's segments off u while possible.
                while u in branch_nodes(work.trees[gid]):
                    tree = work.trees[gid]
                    targets = [
                        (_segment_cost(work.net, tree, u, v), v, interior)
                        for v, interior in _segment_targets(tree, u, work.dests[gid])
                    ]
                    targets.sort(key=lambda item: (item[0], item[1]))
                    moved = False
                    for _, v, interior in targets:
                        if _attempt_splice(work, gid, u, v, interior, relaxed=False):
                            moved = True
                            changed = True
                            break
                    if not moved:
                        break
        if not changed:
            return


# ---------------------------------------------------------------------------
# Phase 2: greedy assignment and local search
# ---------------------------------------------------------------------------


def _state_weight(tree: TreeRouting, u: int) -> int:
    """Storage charged for a state entry: the node's degree in the tree."""
    return tree.degree(u)


def greedy_assign(work: _Work) -> None:
    """Lazily-evaluated exact greedy over (group, node) candidates.

    Keys are cost reductions (divided by storage weight in link mode); cached
    keys are upper bounds because gains only shrink as states are added, so a
    popped entry whose recomputed key is unchanged is a true maximum. Ties
    break toward the smaller group id, then node id.
    """
    net = work.net
    weighted = work.link_mode
    used = [0] * net.num_nodes
    version = 0

    def key_of(gain_scaled_rate: int, weight: int):
        if weighted:
            return Fraction(-gain_scaled_rate, weight)
        return -gain_scaled_rate

    def gain_of(gid: int, u: int) -> int:
        return work.irate[gid] * state_gain_scaled(
            net, work.trees[gid], work.dests[gid], work.states.for_group(gid), u
        )

    heap: list[tuple] = []
    weights: dict[tuple[int, int], int] = {}
    for gid in sorted(work.trees):
        tree = work.trees[gid]
        for u in sorted(branch_nodes(tree)):
            weight = _state_weight(tree, u) if weighted else 1
            weights[(gid, u)] = weight
            gain = gain_of(gid, u)
            if gain > 0:
                heapq.heappush(heap, (key_of(gain, weight), gid, u, version))

    while heap:
        key, gid, u, ver = heapq.heappop(heap)
        weight = weights[(gid, u)]
        need = weight if weighted else 1
        if used[u] + need > net.node_capacity[u]:
            continue  # capacity only shrinks: drop for good
        if ver != version:
            gain = gain_of(gid, u)
            if gain <= 0:
                continue
            new_key = key_of(gain, weight)
            if new_key != key:
                heapq.heappush(heap, (new_key, gid, u, version))
                continue
        work.states.add(gid, u)
        used[u] += need
        version += 1


def _reassign_contended(work: _Work) -> None:
    """Per node whose branch demand exceeds its capacity, keep the states for
    the trees with the largest reductions (knapsack under weighted storage)."""
    net = work.net
    weighted = work.link_mode
    for u in range(net.num_nodes):
        holders = sorted(
            gid for gid, tree in work.trees.items() if u in branch_nodes(tree)
        )
        if not holders:
            continue
        demand = (
            sum(_state_weight(work.trees[gid], u) for gid in holders)
            if weighted
            else len(holders)
        )
        if demand <= net.node_capacity[u]:
            continue
        current = {gid for gid in holders if u in work.states.for_group(gid)}
        scored = []
        for gid in holders:
            base = work.states.for_group(gid) - {u}
            gain = work.irate[gid] * state_gain_scaled(
                net, work.trees[gid], work.dests[gid], base, u
            )
            scored.append((gid, gain))
        if weighted:
            items = [
                (gain, _state_weight(work.trees[gid], u), gid)
                for gid, gain in scored
                if gain > 0
            ]
            keep = set(
                knapsack_select(items, net.node_capacity[u], work.config.knapsack_precision)
            )
        else:
            ranked = sorted(
                (gid for gid, gain in scored if gain > 0),
                key=lambda gid: (-dict(scored)[gid], gid),
            )
            keep = set(ranked[: net.node_capacity[u]])
        for gid in current - keep:
            work.states.discard(gid, u)
        for gid in sorted(keep - current):
            work.states.add(gid, u)


def _capacity_used(work: _Work) -> list[int]:
    used = [0] * work.net.num_nodes
    for gid, nodes in work.states.states.items():
        tree = work.trees[gid]
        for u in nodes:
            used[u] += _state_weight(tree, u) if work.link_mode else 1
    return used


def _reroute_sweep(work: _Work) -> bool:
    """One local-search pass of splice attempts below every branch node."""
    changed = False
    for gid in sorted(work.trees):
        for u in sorted(branch_nodes(work.trees[gid])):
            tree = work.trees[gid]
            if u not in branch_nodes(tree):
                continue
            targets = [
                (_segment_cost(work.net, tree, u, v), v, interior)
                for v, interior in _segment_targets(tree, u, work.dests[gid])
            ]
            targets.sort(key=lambda item: (item[0], item[1]))
            for _, v, interior in targets:
                if not work.trees[gid].on_tree(v) or not work.trees[gid].on_tree(u):
                    continue
                if _attempt_splice(work, gid, u, v, interior, relaxed=True):
                    changed = True
                    break
    return changed


def _strict_flows(work: _Work) -> tuple[dict[tuple[int, int], int], dict[int, dict]]:
    flows: dict[tuple[int, int], int] = {}
    per_tree: dict[int, dict[tuple[int, int], int]] = {}
    for gid, tree in work.trees.items():
        eps = edge_transmissions(tree, work.dests[gid], work.states.for_group(gid))
        per_tree[gid] = eps
        irate = work.irate[gid]
        for edge, count in eps.items():
            flows[edge] = flows.get(edge, 0) + irate * count
    return flows, per_tree


def _total_excess(work: _Work, flows: dict[tuple[int, int], int]) -> Fraction:
    excess = Fraction(0)
    for edge, flow in flows.items():
        cap = work.cap_scaled[work.net.edge_index[edge]]
        if cap is not None and flow > cap:
            excess += flow - cap
    return excess


def _repair_link_overflows(work: _Work) -> None:
    """Reroute segments off edges whose aggregate copies exceed capacity.

    Accepts a move only when the new path has strict residual room for the
    copies it will carry, the tree cost does not increase, and the total
    overflow strictly decreases; leftovers stay in the feasibility report.
    """
    net = work.net
    for _ in range(work.config.max_reroute_passes):
        flows, per_tree = _strict_flows(work)
        base_excess = _total_excess(work, flows)
        if base_excess == 0:
            return
        violated = sorted(
            (
                edge
                for edge in flows
                if (cap := work.cap_scaled[net.edge_index[edge]]) is not None
                and flows[edge] > cap
            ),
            key=lambda edge: (-(flows[edge] - work.cap_scaled[net.edge_index[edge]]), edge),
        )
        progressed = False
        for edge in violated:
            crossers = sorted(
                (gid for gid, eps in per_tree.items() if edge in eps),
                key=lambda gid: (-work.irate[gid] * per_tree[gid][edge], gid),
            )
            for gid in crossers:
                if _attempt_link_repair(work, gid, edge, flows, per_tree, base_excess):
                    progressed = True
                    break
            if progressed:
                break
        if not progressed:
            return


def _attempt_link_repair(
    work: _Work,
    gid: int,
    edge: tuple[int, int],
    flows: dict[tuple[int, int], int],
    per_tree: dict[int, dict],
    base_excess: Fraction,
) -> bool:
    net = work.net
    tree = work.trees[gid]
    dests = work.dests[gid]
    states = work.states.for_group(gid)
    tail, head = edge
    if not tree.on_tree(head) or tree.parent.get(head) != tail:
        return False

    # Bottom of the clean segment through this edge.
    v = head
    while v not in dests and tree.child_count(v) == 1 and v not in states:
        v = tree.children[v][0]
    # Top of the clean segment (branch, destination, state or root).
    top = tail
    while (
        top != tree.root
        and top not in dests
        and top not in states
        and tree.child_count(top) == 1
    ):
        top = tree.parent[top]
    interior = []
    cur = tree.parent[v]
    while cur != top:
        interior.append(cur)
        cur = tree.parent[cur]
    interior_removed = set(interior)

    demand = per_tree[gid].get((tree.parent[v], v), 1)
    irate = work.irate[gid]
    subtree_v = set(tree.subtree(v))
    eligible = {
        w
        for w in tree.nodes()
        if w != top and w not in subtree_v and w not in interior_removed
        and work.ledger.under(w)
    }
    if not eligible:
        return False

    tree_nodes = tree.nodes() - interior_removed

    def node_ok(x: int, _w: Optional[int] = None) -> bool:
        return x not in tree_nodes

    # Strict residual filter for the copies the new path will carry.
    def edge_ok(eidx: int) -> bool:
        cap = work.cap_scaled[eidx]
        if cap is None:
            return True
        e = net.edges[eidx]
        return flows.get((e.tail, e.head), 0) + irate * demand <= cap

    best: Optional[tuple[int, int, tuple[int, ...]]] = None
    for w in sorted(eligible):
        dist, _, parent = shortest_path_forest(
            net, [w], edge_ok=edge_ok, node_ok=lambda x: x == w or x == v or node_ok(x)
        )
        if dist[v] is None:
            continue
        nodes = [v]
        while nodes[-1] != w:
            nodes.append(parent[nodes[-1]])
        nodes.reverse()
        cand = (dist[v], w, tuple(nodes))
        if best is None or cand[:2] < best[:2]:
            best = cand
    if best is None:
        return False

    path_cost, w, path_nodes = best
    old_cost = work.tree_cost_scaled(gid)
    result = _apply_splice(tree, dests, v, path_nodes, interior_removed)
    new_states = states & set(result.new_branches)
    new_cost = work.tree_cost_scaled(gid, result.tree, new_states)
    if new_cost > old_cost:
        return False
    # Full recheck: the overall overflow must strictly decrease.
    new_eps = edge_transmissions(result.tree, dests, new_states)
    trial = dict(flows)
    for e, count in per_tree[gid].items():
        trial[e] = trial.get(e, 0) - irate * count
    for e, count in new_eps.items():
        trial[e] = trial.get(e, 0) + irate * count
    if _total_excess(work, trial) >= base_excess:
        return False
    _commit_splice(work, gid, result)
    return True


def local_search(work: _Work) -> None:
    _reassign_contended(work)
    _reroute_sweep(work)
    if work.link_mode:
        _repair_link_overflows(work)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def solve(
    net: Network, groups: Sequence[MulticastGroup], config: SolverConfig | None = None
) -> Solution:
    """Full pipeline; deterministic for a fixed instance and config."""
    config = config or SolverConfig()
    work = _Work(net, groups, config)
    _build_phase1_trees(work)
    if config.enable_reroute:
        reroute_overloaded(work)
    if config.enable_greedy:
        greedy_assign(work)
    if config.enable_local_search:
        local_search(work)
    return Solution.build(
        net, list(work.groups.values()), work.trees, work.states, config.mode
    )


class MembershipResult(NamedTuple):
    solution: Solution
    changed: bool
    warning: Optional[str]


def _rebuild_work(net: Network, solution: Solution, config: SolverConfig) -> _Work:
    work = _Work(net, solution.groups, config)
    work.trees = {gid: tree.clone() for gid, tree in solution.trees.items()}
    work.states = solution.assignment.clone()
    work.ledger = NodeLoadLedger.from_trees(net, work.trees.values())
    if work.link_mode:
        for gid, tree in work.trees.items():
            work.add_weak_load(tree.edges(), gid, +1)
    return work


def _local_greedy(work: _Work, gid: int, candidates: set[int]) -> None:
    """Greedy restricted to the given nodes of one tree (membership updates)."""
    net = work.net
    used = _capacity_used(work)
    tree = work.trees[gid]
    states = work.states.for_group(gid)
    pool = {u for u in candidates if u in branch_nodes(tree)} - states
    while True:
        best: Optional[tuple[int, int, int]] = None
        for u in sorted(pool):
            need = _state_weight(tree, u) if work.link_mode else 1
            if used[u] + need > net.node_capacity[u]:
                continue
            gain = work.irate[gid] * state_gain_scaled(
                net, tree, work.dests[gid], states, u
            )
            if gain <= 0:
                continue
            if best is None:
                better = True
            elif work.link_mode:
                better = Fraction(gain, need) > Fraction(best[0], best[1])
            else:
                better = gain > best[0]
            if better:
                best = (gain, need, u)
        if best is None:
            return
        _, need, u = best
        work.states.add(gid, u)
        used[u] += need
        pool.discard(u)


def member_join(
    net: Network,
    solution: Solution,
    gid: int,
    node: int,
    config: SolverConfig | None = None,
) -> MembershipResult:
    """Graft one new member onto an existing solution without global recompute."""
    config = config or SolverConfig(mode=solution.mode)
    if gid not in solution.trees:
        raise InstanceError(f"unknown group {gid}")
    group = next(g for g in solution.groups if g.id == gid)
    if node == group.source:
        raise InstanceError(f"group {gid}: the source cannot join as a member")
    if node in group.destinations:
        return MembershipResult(solution, False, None)

    work = _rebuild_work(net, solution, config)
    tree = work.trees[gid]
    changed_nodes: set[int] = set()
    if tree.on_tree(node):
        changed_nodes.add(node)
        if node != tree.root:
            changed_nodes.add(tree.parent[node])
    else:
        # Leaf anchors are allowed (grafting onto a leaf destination simply
        # makes it a relay, the exact inverse of leave-pruning); the anchor
        # must still have branch-capacity headroom.
        eligible = {w for w in tree.nodes() if work.ledger.under(w)}
        if not eligible:
            raise JoinRejectedError(f"group {gid}: no eligible graft anchor")
        candidates = _detour_candidates(
            work, gid, tree, node, set(), _graft_budget(work), eligible
        )
        # Cheapest by the resulting tree cost after the local state
        # re-assignment, not by raw path cost: a cheap edge below a stateless
        # member duplicates every upstream copy, and re-creating a branch may
        # win its state back.
        new_dests = work.dests[gid] | {node}
        used = _capacity_used(work)
        best = None
        for path_cost, w in candidates:
            got = _canonical_detour_path(work, gid, tree, w, node, set())
            if got is None:
                continue
            trial = tree.clone()
            for prev, nxt in zip(got[0], got[0][1:]):
                trial.attach(nxt, prev)
            cost_after = _graft_cost_with_local_states(
                work, gid, trial, new_dests, set(got[0]), used
            )
            key = (cost_after, path_cost, w)
            if best is None or key < best[0]:
                best = (key, got[0])
        if best is None:
            raise JoinRejectedError(
                f"group {gid}: no feasible graft path to {net.labels[node]!r}"
            )
        path = best[1]
        old_branches = branch_nodes(tree)
        for prev, nxt in zip(path, path[1:]):
            tree.attach(nxt, prev)
        if work.link_mode:
            work.add_weak_load(list(zip(path, path[1:])), gid, +1)
        work.ledger.apply_branch_diff(old_branches, branch_nodes(tree))
        changed_nodes.update(path)

    new_dests = frozenset(group.destinations | {node})
    new_group = replace(group, destinations=new_dests)
    work.groups[gid] = new_group
    work.dests[gid] = set(new_dests)
    _local_greedy(work, gid, changed_nodes)
    sol = Solution.build(
        net, list(work.groups.values()), work.trees, work.states, config.mode
    )
    return MembershipResult(sol, True, None)


def _graft_budget(work: _Work) -> int:
    # No segment is being replaced, so any path cost is admissible.
    return sum(work.net.icost) + 1


def _graft_cost_with_local_states(
    work: _Work,
    gid: int,
    trial: TreeRouting,
    dests: set[int],
    touched: set[int],
    used: Sequence[int],
) -> int:
    """Scaled tree cost after greedily re-assigning states at the touched
    nodes (mirrors the restricted greedy that runs post-commit)."""
    net = work.net
    states = set(work.states.for_group(gid))
    extra: dict[int, int] = {}
    pool = {u for u in touched if u in branch_nodes(trial)} - states
    while True:
        best = None
        for u in sorted(pool):
            need = _state_weight(trial, u) if work.link_mode else 1
            if used[u] + extra.get(u, 0) + need > net.node_capacity[u]:
                continue
            gain = state_gain_scaled(net, trial, dests, states, u)
            if gain <= 0:
                continue
            if best is None:
                better = True
            elif work.link_mode:
                better = Fraction(gain, need) > Fraction(best[0], best[1])
            else:
                better = gain > best[0]
            if better:
                best = (gain, need, u)
        if best is None:
            break
        _, need, u = best
        states.add(u)
        extra[u] = extra.get(u, 0) + need
        pool.discard(u)
    return _tree_cost_scaled(net, trial, dests, states)


def member_leave(
    net: Network,
    solution: Solution,
    gid: int,
    node: int,
    config: SolverConfig | None = None,
) -> MembershipResult:
    """Remove a member, pruning its dangling branch and releasing states."""
    config = config or SolverConfig(mode=solution.mode)
    if gid not in solution.trees:
        raise InstanceError(f"unknown group {gid}")
    group = next(g for g in solution.groups if g.id == gid)
    if node not in group.destinations:
        return MembershipResult(
            solution, False, f"group {gid}: {net.labels[node]!r} is not a member"
        )
    if len(group.destinations) == 1:
        raise InstanceError(
            f"group {gid}: cannot remove the last member; delete the group instead"
        )

    work = _rebuild_work(net, solution, config)
    tree = work.trees[gid]
    new_dests = set(group.destinations) - {node}
    work.dests[gid] = new_dests
    work.groups[gid] = replace(group, destinations=frozenset(new_dests))

    old_branches = branch_nodes(tree)
    removed_edges: list[tuple[int, int]] = []
    changed_nodes: set[int] = set()
    cur = node
    while cur != tree.root and tree.is_leaf(cur) and cur not in new_dests:
        par = tree.parent[cur]
        removed_edges.append((par, cur))
        tree.detach_leaf(cur)
        cur = par
    changed_nodes.add(cur)
    new_branches = branch_nodes(tree)
    work.ledger.apply_branch_diff(old_branches, new_branches)
    for u in (old_branches - new_branches) & work.states.for_group(gid):
        work.states.discard(gid, u)
    if work.link_mode and removed_edges:
        work.add_weak_load(removed_edges, gid, -1)

    _local_greedy(work, gid, changed_nodes)
    sol = Solution.build(
        net, list(work.groups.values()), work.trees, work.states, config.mode
    )
    return MembershipResult(sol, True, None)
