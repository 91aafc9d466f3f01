import itertools
import random
from fractions import Fraction

import pytest

from mcast_te.graph import Edge, MulticastGroup, Network


def brute_force_shortest(net: Network, src: int, dst: int):
    """Minimum path cost by exhaustive simple-path enumeration (oracle)."""
    best = None
    stack = [(src, {src}, Fraction(0))]
    while stack:
        node, visited, cost = stack.pop()
        if node == dst:
            if best is None or cost < best:
                best = cost
            continue
        for eidx in net.out_edges[node]:
            e = net.edges[eidx]
            if e.head in visited:
                continue
            stack.append((e.head, visited | {e.head}, cost + e.cost))
    return best


def brute_force_shortest_avoiding(net: Network, src: int, dst: int, forbidden):
    banned = set(forbidden)
    best = None
    stack = [(src, {src}, Fraction(0))]
    while stack:
        node, visited, cost = stack.pop()
        if node == dst:
            if best is None or cost < best:
                best = cost
            continue
        for eidx in net.out_edges[node]:
            e = net.edges[eidx]
            if e.head in visited or (e.head != dst and e.head in banned):
                continue
            stack.append((e.head, visited | {e.head}, cost + e.cost))
    return best


def random_network(rng: random.Random, n: int, edge_prob: float = 0.35,
                   fractional: bool = False, node_cap: int = 2,
                   two_way: bool = False) -> Network:
    """Random digraph; a spanning arborescence from node 0 keeps it connected
    (in both directions when two_way is set, so any node can be a source)."""
    edges = {}
    for v in range(1, n):
        u = rng.randrange(v)
        edges[(u, v)] = None
        if two_way:
            edges[(v, u)] = None
    for u, v in itertools.permutations(range(n), 2):
        if (u, v) not in edges and rng.random() < edge_prob:
            edges[(u, v)] = None
            if two_way:
                edges[(v, u)] = None
    out = []
    for (u, v) in sorted(edges):
        if fractional and rng.random() < 0.3:
            cost = Fraction(rng.randint(1, 12), rng.choice([2, 3, 4]))
        else:
            cost = Fraction(rng.randint(1, 9))
        out.append(Edge(u, v, cost))
    labels = [f"n{i}" for i in range(n)]
    return Network(labels, [node_cap] * n, out)


def random_group(rng: random.Random, net: Network, gid: int, dest_count: int,
                 rate=Fraction(1)) -> MulticastGroup:
    source = 0
    pool = [v for v in range(net.num_nodes) if v != source]
    dests = frozenset(rng.sample(pool, dest_count))
    return MulticastGroup(gid, source, dests, rate)


def random_tree(rng: random.Random, net: Network, group: MulticastGroup):
    """Random arborescence spanning the group (not a shortest-path tree):
    grow by random frontier edges, then prune non-destination leaves."""
    from mcast_te.trees import TreeRouting

    parent = {}
    reached = {group.source}
    frontier = list(net.out_edges[group.source])
    while frontier and not set(group.destinations) <= reached:
        pick = rng.randrange(len(frontier))
        frontier[pick], frontier[-1] = frontier[-1], frontier[pick]
        eidx = frontier.pop()
        e = net.edges[eidx]
        if e.head in reached:
            continue
        parent[e.head] = e.tail
        reached.add(e.head)
        frontier.extend(net.out_edges[e.head])
    if not set(group.destinations) <= reached:
        return None
    tree = TreeRouting(group.id, group.source, parent)
    changed = True
    while changed:
        changed = False
        for v in sorted(tree.nodes()):
            if v != tree.root and tree.is_leaf(v) and v not in group.destinations:
                tree.detach_leaf(v)
                changed = True
    return tree


def random_valid_assignment(rng: random.Random, net: Network, trees, groups):
    """Random capacity-feasible state assignment over the trees' branch nodes."""
    from mcast_te.trees import StateAssignment, branch_nodes

    assignment = StateAssignment()
    used = [0] * net.num_nodes
    candidates = []
    for g in groups:
        for u in sorted(branch_nodes(trees[g.id])):
            candidates.append((g.id, u))
    rng.shuffle(candidates)
    for gid, u in candidates:
        if used[u] < net.node_capacity[u] and rng.random() < 0.6:
            assignment.add(gid, u)
            used[u] += 1
    return assignment


@pytest.fixture
def rng():
    return random.Random(20240811)
