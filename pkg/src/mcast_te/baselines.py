"""Comparison algorithms: shortest-path trees and Steiner-heuristic trees.

Both admit groups sequentially on a residual graph (edges without room for
the next rate are removed) and assign states per node by a seeded uniform
shuffle among the contending trees. Their link guarantee is therefore the
weak one (each tree counted once per edge), which is what their solutions
record and verify against.
"""

from __future__ import annotations

import random
from typing import Optional, Sequence

from .exceptions import InfeasibleInstanceError
from .graph import MulticastGroup, Network, shortest_path_forest
from .rational import common_denominator
from .solver import _tree_from_forest
from .trees import MODE_NODE_WEAK_LINK, Solution, StateAssignment, TreeRouting, branch_nodes


class _Admission:
    """Residual weak-capacity tracking shared by both baselines."""

    def __init__(self, net: Network, groups: Sequence[MulticastGroup]):
        self.net = net
        self.rate_scale = common_denominator(g.rate for g in groups) if groups else 1
        self.cap_scaled = [
            None if e.capacity is None else e.capacity * self.rate_scale
            for e in net.edges
        ]
        self.load = [0] * net.num_edges

    def edge_ok(self, eidx: int, irate: int) -> bool:
        cap = self.cap_scaled[eidx]
        return cap is None or self.load[eidx] + irate <= cap

    def admit(self, tree: TreeRouting, irate: int) -> None:
        for edge in tree.edges():
            self.load[self.net.edge_index[edge]] += irate


def _random_states(
    net: Network, trees: dict[int, TreeRouting], seed: int
) -> StateAssignment:
    """Per node, keep states for a seeded uniform choice of contending trees."""
    rng = random.Random(seed)
    contenders: dict[int, list[int]] = {}
    for gid in sorted(trees):
        for u in branch_nodes(trees[gid]):
            contenders.setdefault(u, []).append(gid)
    assignment = StateAssignment()
    for u in sorted(contenders):
        gids = sorted(contenders[u])
        cap = net.node_capacity[u]
        if len(gids) > cap:
            rng.shuffle(gids)
            gids = gids[:cap]
        for gid in gids:
            assignment.add(gid, u)
    return assignment


def solve_spt(net: Network, groups: Sequence[MulticastGroup], seed: int = 0) -> Solution:
    """Shortest-path trees added iteratively with random state assignment."""
    admission = _Admission(net, groups)
    trees: dict[int, TreeRouting] = {}
    for g in groups:
        irate = int(g.rate * admission.rate_scale)
        dist, _, parent = shortest_path_forest(
            net, [g.source], edge_ok=lambda eidx: admission.edge_ok(eidx, irate)
        )
        tree = _tree_from_forest(net, g.id, g.source, set(g.destinations), dist, parent)
        trees[g.id] = tree
        admission.admit(tree, irate)
    assignment = _random_states(net, trees, seed)
    return Solution.build(net, groups, trees, assignment, MODE_NODE_WEAK_LINK)


def _steiner_tree(
    net: Network,
    group: MulticastGroup,
    admission: Optional[_Admission],
    irate: int,
) -> TreeRouting:
    """Cheapest-destination insertion: repeatedly connect the nearest
    unconnected destination to the partial tree by a shortest path."""
    tree = TreeRouting(group.id, group.source)
    remaining = set(group.destinations)
    edge_ok = None
    if admission is not None:
        edge_ok = lambda eidx: admission.edge_ok(eidx, irate)  # noqa: E731
    while remaining:
        sources = sorted(tree.nodes())
        dist, hops, parent = shortest_path_forest(net, sources, edge_ok=edge_ok)
        best = None
        for d in sorted(remaining):
            if dist[d] is None:
                continue
            key = (dist[d], hops[d], d)
            if best is None or key < best:
                best = key
        if best is None:
            d = min(remaining)
            raise InfeasibleInstanceError(
                f"group {group.id}: destination {net.labels[d]!r} unreachable",
                group_id=group.id,
                node=net.labels[d],
            )
        d = best[2]
        chain = [d]
        while parent[chain[-1]] != -1:
            chain.append(parent[chain[-1]])
        chain.reverse()
        for prev, node in zip(chain, chain[1:]):
            tree.attach(node, prev)
        remaining -= tree.nodes()
    return tree


def solve_steiner(net: Network, groups: Sequence[MulticastGroup], seed: int = 0) -> Solution:
    """Steiner-heuristic trees added iteratively with random state assignment."""
    admission = _Admission(net, groups)
    trees: dict[int, TreeRouting] = {}
    for g in groups:
        irate = int(g.rate * admission.rate_scale)
        tree = _steiner_tree(net, g, admission, irate)
        trees[g.id] = tree
        admission.admit(tree, irate)
    assignment = _random_states(net, trees, seed)
    return Solution.build(net, groups, trees, assignment, MODE_NODE_WEAK_LINK)


def steiner_tree_unconstrained(net: Network, group: MulticastGroup) -> TreeRouting:
    """Insertion-heuristic tree ignoring capacities (used for calibration)."""
    return _steiner_tree(net, group, None, 0)
