"""Instance generators: random experiments, capacity calibration, CNF
hardness gadgets, crafted showcase instances and synthetic WAN topologies."""

from __future__ import annotations

import random
from fractions import Fraction
from importlib import resources
from typing import Callable, Optional, Sequence

from .baselines import steiner_tree_unconstrained
from .exceptions import InstanceError
from .graph import Edge, Instance, MulticastGroup, Network, load_graphml
from .rational import parse_rational
from .solver import build_spt

Clause = tuple[int, int, int]

BUILTIN_TOPOLOGIES = {
    "columbus": "Columbus.graphml",
    "vtlwavenet2011": "VtlWavenet2011.graphml",
}


def load_topology(name: str, *, node_capacity: int = 0) -> Network:
    """Load one of the bundled GraphML topologies by short name."""
    key = name.lower()
    if key not in BUILTIN_TOPOLOGIES:
        raise InstanceError(
            f"unknown topology {name!r}; choose from {sorted(BUILTIN_TOPOLOGIES)}"
        )
    data = resources.files("mcast_te.data").joinpath(BUILTIN_TOPOLOGIES[key]).read_bytes()
    return load_graphml(data, node_capacity=node_capacity)


def random_instance(
    net: Network,
    t: int,
    dest_count: int,
    *,
    seed: int = 0,
    rates: Fraction | int | str | Callable[[random.Random], Fraction] = 1,
    node_capacity: Optional[int] = None,
) -> Instance:
    """Seeded groups with uniformly chosen distinct source and destinations."""
    if dest_count >= net.num_nodes:
        raise InstanceError(
            f"dest_count {dest_count} must be below the node count {net.num_nodes}"
        )
    if dest_count < 1:
        raise InstanceError("dest_count must be at least 1")
    rng = random.Random(seed)
    groups: list[MulticastGroup] = []
    nodes = list(range(net.num_nodes))
    for gid in range(t):
        source = rng.choice(nodes)
        pool = [v for v in nodes if v != source]
        dests = frozenset(rng.sample(pool, dest_count))
        rate = parse_rational(rates(rng)) if callable(rates) else parse_rational(rates)
        groups.append(MulticastGroup(gid, source, dests, rate))
    out_net = net if node_capacity is None else net.with_node_capacity(node_capacity)
    return Instance(out_net, groups)


def calibrate_capacity(
    net: Network, groups: Sequence[MulticastGroup], *, algorithm: str = "spt"
) -> Network:
    """Set every edge capacity to the peak per-edge load of the unconstrained
    reference solution (one copy per on-tree edge, weighted by rate), so that
    solution is exactly feasible with its bottleneck at 100% utilization."""
    if algorithm not in ("spt", "st"):
        raise InstanceError("calibration algorithm must be 'spt' or 'st'")
    load: dict[tuple[int, int], Fraction] = {}
    for g in sorted(groups, key=lambda g: g.id):
        if algorithm == "spt":
            tree = build_spt(net, g)
        else:
            tree = steiner_tree_unconstrained(net, g)
        for edge in tree.edges():
            load[edge] = load.get(edge, Fraction(0)) + g.rate
    if not load:
        return net
    peak = max(load.values())
    return net.with_edge_capacities({(e.tail, e.head): peak for e in net.edges})


# ---------------------------------------------------------------------------
# CNF utilities and hardness gadgets
# ---------------------------------------------------------------------------


def parse_dimacs(text: str) -> list[Clause]:
    clauses: list[Clause] = []
    current: list[int] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith(("c", "%")):
            continue
        if line.startswith("p"):
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                if current:
                    clauses.append(_as_clause(current))
                    current = []
            else:
                current.append(lit)
    if current:
        clauses.append(_as_clause(current))
    return clauses


def _as_clause(lits: list[int]) -> Clause:
    if len(lits) != 3 or any(l == 0 for l in lits):
        raise InstanceError(f"clauses must have exactly 3 nonzero literals, got {lits}")
    return (lits[0], lits[1], lits[2])


def _formula_shape(clauses: Sequence[Clause]) -> tuple[int, int]:
    for c in clauses:
        _as_clause(list(c))
    n = max((abs(l) for c in clauses for l in c), default=0)
    return n, len(clauses)


def truth_table_satisfiable(clauses: Sequence[Clause], max_vars: int = 20) -> bool:
    """Exhaustive satisfiability check for small formulas."""
    n, _ = _formula_shape(clauses)
    if n > max_vars:
        raise InstanceError(f"{n} variables exceed the truth-table limit {max_vars}")
    for bits in range(1 << n):
        ok = True
        for clause in clauses:
            if not any(
                (bits >> (abs(l) - 1)) & 1 == (1 if l > 0 else 0) for l in clause
            ):
                ok = False
                break
        if ok:
            return True
    return False


def cnf_node_gadget(clauses: Sequence[Clause], replication: int = 1) -> Instance:
    """Two-group instance whose node capacities encode a 3-CNF formula.

    Literal nodes cost p^q from the source (p = max(#clauses, #vars),
    q = replication); clause copies and variable checkpoints cost 1. All node
    capacities are 1. A satisfying assignment yields total bandwidth cost
    3n*p^q + m*p^q; unsatisfiable formulas force heavy copy duplication.
    """
    n, m = _formula_shape(clauses)
    if n == 0:
        raise InstanceError("empty formula")
    if replication < 1:
        raise InstanceError("replication must be >= 1")
    p = max(m, n)
    copies = p**replication
    lit_cost = Fraction(copies)

    labels = ["s"]
    pos = {}
    neg = {}
    for i in range(1, n + 1):
        pos[i] = len(labels)
        labels.append(f"u{i}")
        neg[i] = len(labels)
        labels.append(f"nu{i}")
    d1 = {}
    for j in range(1, m + 1):
        for k in range(1, copies + 1):
            d1[(j, k)] = len(labels)
            labels.append(f"d{j}_{k}")
    d2 = {}
    for i in range(1, n + 1):
        for k in range(1, copies + 1):
            d2[(i, k)] = len(labels)
            labels.append(f"w{i}_{k}")

    edges: list[Edge] = []
    for i in range(1, n + 1):
        edges.append(Edge(0, pos[i], lit_cost))
        edges.append(Edge(0, neg[i], lit_cost))
    one = Fraction(1)
    placed: set[tuple[int, int]] = set()
    for j, clause in enumerate(clauses, start=1):
        for lit in clause:
            node = pos[abs(lit)] if lit > 0 else neg[abs(lit)]
            for k in range(1, copies + 1):
                key = (node, d1[(j, k)])
                # A literal may repeat within a clause; place one edge only.
                if key not in placed:
                    placed.add(key)
                    edges.append(Edge(node, d1[(j, k)], one))
    for i in range(1, n + 1):
        for k in range(1, copies + 1):
            edges.append(Edge(pos[i], d2[(i, k)], one))
            edges.append(Edge(neg[i], d2[(i, k)], one))

    net = Network(labels, [1] * len(labels), edges)
    groups = [
        MulticastGroup(1, 0, frozenset(d1.values()), Fraction(1)),
        MulticastGroup(2, 0, frozenset(d2.values()), Fraction(1)),
    ]
    return Instance(net, groups)


def cnf_link_gadget(clauses: Sequence[Clause], gap: Fraction | int = 10) -> Instance:
    """Two-group instance whose unit link capacities encode a 3-CNF formula.

    Every edge has capacity 1 and both rates are 1, so the two trees must be
    edge-disjoint with no copy duplication anywhere. The bypass edges from
    the source to the variable checkpoints cost (m + 3n) * gap; a satisfying
    assignment avoids them entirely for a total cost of m + 3n.
    """
    n, m = _formula_shape(clauses)
    if n == 0:
        raise InstanceError("empty formula")
    gap = parse_rational(gap)
    expensive = Fraction(m + 3 * n) * gap
    one = Fraction(1)

    labels = ["s"]
    pos = {}
    neg = {}
    for i in range(1, n + 1):
        pos[i] = len(labels)
        labels.append(f"u{i}")
        neg[i] = len(labels)
        labels.append(f"nu{i}")
    d1 = {}
    for j in range(1, m + 1):
        d1[j] = len(labels)
        labels.append(f"d{j}")
    d2 = {}
    for i in range(1, n + 1):
        d2[i] = len(labels)
        labels.append(f"dp{i}")

    edges: list[Edge] = []
    for i in range(1, n + 1):
        edges.append(Edge(0, pos[i], one, one))
        edges.append(Edge(0, neg[i], one, one))
    for j, clause in enumerate(clauses, start=1):
        seen: set[int] = set()
        for lit in clause:
            node = pos[abs(lit)] if lit > 0 else neg[abs(lit)]
            if node not in seen:
                seen.add(node)
                edges.append(Edge(node, d1[j], one, one))
    for i in range(1, n + 1):
        edges.append(Edge(0, d2[i], expensive, one))
        edges.append(Edge(pos[i], d2[i], one, one))
        edges.append(Edge(neg[i], d2[i], one, one))

    net = Network(labels, [2] * len(labels), edges)
    groups = [
        MulticastGroup(1, 0, frozenset(d1.values()), Fraction(1)),
        MulticastGroup(2, 0, frozenset(d2.values()), Fraction(1)),
    ]
    return Instance(net, groups)


# ---------------------------------------------------------------------------
# Crafted instances
# ---------------------------------------------------------------------------


def relay_pair_instance(cap_a: int = 1, cap_b: int = 0) -> Instance:
    """Five nodes, two interchangeable relays, one group with two members.

    The classic joint-routing/state example: with a state available at relay
    a the optimum is 3 (multicast through a); with no states anywhere the
    optimum is 4 (either tunneling through a relay or two disjoint paths).
    """
    labels = ["s", "a", "b", "d1", "d2"]
    idx = {lab: i for i, lab in enumerate(labels)}
    one = Fraction(1)
    edges = [
        Edge(idx["s"], idx["a"], one),
        Edge(idx["s"], idx["b"], one),
        Edge(idx["a"], idx["d1"], one),
        Edge(idx["a"], idx["d2"], one),
        Edge(idx["b"], idx["d1"], one),
        Edge(idx["b"], idx["d2"], one),
    ]
    caps = [0, cap_a, cap_b, 0, 0]
    net = Network(labels, caps, edges)
    groups = [MulticastGroup(0, idx["s"], frozenset({idx["d1"], idx["d2"]}), one)]
    return Instance(net, groups)


def showcase_instance() -> Instance:
    """Fixed 14-node, two-group instance where joint routing plus greedy
    assignment strictly beats both baselines for every seed.

    Both trees are forced to branch at x (capacity 1). The solver spaces the
    second group's deep subtree onto the equal-cost relay detour y->z and
    keeps the state at x for the first group, reaching the exact optimum
    (26); either random keeper choice leaves the baselines at 27. The f/q
    pair makes the two baselines route differently (the insertion heuristic
    shares f->q, the shortest-path tree goes direct) at identical cost.
    """
    labels = ["s", "a", "x", "y", "z", "d1", "d2", "f", "q", "e1", "e2", "e3", "e4", "dy"]
    idx = {lab: i for i, lab in enumerate(labels)}
    c = lambda v: Fraction(v)  # noqa: E731
    edges = [
        Edge(idx["s"], idx["a"], c(1)),
        Edge(idx["a"], idx["x"], c(1)),
        Edge(idx["a"], idx["y"], c(1)),
        Edge(idx["x"], idx["d1"], c(1)),
        Edge(idx["x"], idx["d2"], c(1)),
        Edge(idx["x"], idx["z"], c(3)),
        Edge(idx["y"], idx["z"], c(3)),
        Edge(idx["x"], idx["e3"], c(1)),
        Edge(idx["x"], idx["e4"], c(1)),
        Edge(idx["z"], idx["e1"], c(1)),
        Edge(idx["z"], idx["e2"], c(1)),
        Edge(idx["y"], idx["dy"], c(1)),
        Edge(idx["s"], idx["f"], c(4)),
        Edge(idx["f"], idx["q"], c(2)),
        Edge(idx["s"], idx["q"], c(6)),
    ]
    net = Network(labels, [1] * len(labels), edges)
    g1 = MulticastGroup(
        1,
        idx["s"],
        frozenset({idx["d1"], idx["d2"], idx["f"], idx["q"]}),
        Fraction(1),
    )
    g2 = MulticastGroup(
        2,
        idx["s"],
        frozenset({idx["e1"], idx["e2"], idx["e3"], idx["e4"], idx["dy"]}),
        Fraction(1),
    )
    return Instance(net, [g1, g2])


# ---------------------------------------------------------------------------
# Synthetic WAN topologies (bundled GraphML stand-ins)
# ---------------------------------------------------------------------------


def synthetic_wan_links(
    num_nodes: int, num_links: int, seed: int, concentration: float = 1.6
) -> list[tuple[int, int]]:
    """Sparse fiber-network shape: a preferential-attachment tree (the
    concentration exponent controls how strongly traffic hubs emerge) plus
    chord links for redundancy."""
    if num_links < num_nodes - 1:
        raise InstanceError("need at least a spanning tree worth of links")
    rng = random.Random(seed)
    links: set[tuple[int, int]] = set()
    degree = [0] * num_nodes

    def add(u: int, v: int) -> bool:
        if u == v:
            return False
        key = (min(u, v), max(u, v))
        if key in links:
            return False
        links.add(key)
        degree[u] += 1
        degree[v] += 1
        return True

    # Growth with preferential attachment: early nodes become hubs.
    for v in range(1, num_nodes):
        weights = [(degree[u] + 1) ** concentration for u in range(v)]
        total = sum(weights)
        pick = rng.random() * total
        u = 0
        while pick >= weights[u] and u < v - 1:
            pick -= weights[u]
            u += 1
        add(u, v)
    while len(links) < num_links:
        u = rng.randrange(num_nodes)
        v = rng.randrange(num_nodes)
        add(u, v)
    return sorted(links)


def synthetic_wan_graphml(num_nodes: int, num_links: int, seed: int, name: str) -> str:
    links = synthetic_wan_links(num_nodes, num_links, seed)
    lines = [
        '<?xml version="1.0" encoding="utf-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
        f'  <graph id="{name}" edgedefault="undirected">',
    ]
    for v in range(num_nodes):
        lines.append(f'    <node id="{v}" />')
    for u, v in links:
        lines.append(f'    <edge source="{u}" target="{v}" />')
    lines.append("  </graph>")
    lines.append("</graphml>")
    return "\n".join(lines) + "\n"
