"""Directed network model, GraphML ingestion and deterministic shortest paths.

Costs, capacities and rates are exact rationals. Internally every cost is
rescaled to an integer (lcm of denominators) so all comparisons and sums are
exact int arithmetic; the public API converts back to Fraction.

Shortest-path ties are broken by (cost, fewer hops, lexicographically
smallest node-index sequence), which makes the predecessor of every node
unique per source and lets unions of shortest paths form trees.
"""

from __future__ import annotations

import heapq
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Sequence

from .exceptions import InstanceError, TopologyParseError
from .rational import common_denominator, parse_rational


@dataclass(frozen=True)
class Edge:
    """One directed edge with unit bandwidth cost and capacity (None = unbounded)."""

    tail: int
    head: int
    cost: Fraction
    capacity: Optional[Fraction] = None


@dataclass(frozen=True)
class MulticastGroup:
    """One tree request: source node, destination set and flow rate."""

    id: int
    source: int
    destinations: frozenset[int]
    rate: Fraction = Fraction(1)

    def validate(self, net: "Network") -> None:
        if not self.destinations:
            raise InstanceError(f"group {self.id}: empty destination set")
        if self.source in self.destinations:
            raise InstanceError(f"group {self.id}: source is also a destination")
        for v in {self.source, *self.destinations}:
            if not 0 <= v < net.num_nodes:
                raise InstanceError(f"group {self.id}: unknown node index {v}")
        if self.rate <= 0:
            raise InstanceError(f"group {self.id}: rate must be positive")


@dataclass(frozen=True)
class Path:
    """Simple directed path; cost equals the sum of its edge costs."""

    nodes: tuple[int, ...]
    cost: Fraction


class Network:
    """Immutable directed graph with per-edge cost/capacity and per-node state capacity."""

    def __init__(self, labels: Sequence[str], node_capacity: Sequence[int], edges: Iterable[Edge]):
        self.labels: list[str] = list(labels)
        if len(set(self.labels)) != len(self.labels):
            raise InstanceError("node labels are not unique")
        self.index: dict[str, int] = {lab: i for i, lab in enumerate(self.labels)}
        self.node_capacity: list[int] = [int(c) for c in node_capacity]
        if len(self.node_capacity) != len(self.labels):
            raise InstanceError("node_capacity length does not match node count")
        if any(c < 0 for c in self.node_capacity):
            raise InstanceError("node capacities must be nonnegative")

        self.edges: list[Edge] = []
        self.edge_index: dict[tuple[int, int], int] = {}
        n = len(self.labels)
        for e in edges:
            if not (0 <= e.tail < n and 0 <= e.head < n):
                raise InstanceError(f"edge ({e.tail},{e.head}): unknown node index")
            if e.tail == e.head:
                raise InstanceError(f"self-loop at node {self.labels[e.tail]!r}")
            if (e.tail, e.head) in self.edge_index:
                raise InstanceError(
                    f"duplicate edge {self.labels[e.tail]!r}->{self.labels[e.head]!r}"
                )
            if e.cost < 0:
                raise InstanceError("edge costs must be nonnegative")
            if e.capacity is not None and e.capacity <= 0:
                raise InstanceError("edge capacities must be positive (or unbounded)")
            self.edge_index[(e.tail, e.head)] = len(self.edges)
            self.edges.append(e)

        self.out_edges: list[list[int]] = [[] for _ in range(n)]
        self.in_edges: list[list[int]] = [[] for _ in range(n)]
        for idx, e in enumerate(self.edges):
            self.out_edges[e.tail].append(idx)
            self.in_edges[e.head].append(idx)
        # Deterministic adjacency order: by neighbor index.
        for u in range(n):
            self.out_edges[u].sort(key=lambda i: self.edges[i].head)
            self.in_edges[u].sort(key=lambda i: self.edges[i].tail)

        self.cost_scale: int = common_denominator(e.cost for e in self.edges) if self.edges else 1
        self.icost: list[int] = [int(e.cost * self.cost_scale) for e in self.edges]

    # -- basic accessors -------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def out_neighbors(self, u: int) -> list[int]:
        return [self.edges[i].head for i in self.out_edges[u]]

    def in_neighbors(self, u: int) -> list[int]:
        return [self.edges[i].tail for i in self.in_edges[u]]

    def edge_between(self, tail: int, head: int) -> Optional[Edge]:
        idx = self.edge_index.get((tail, head))
        return self.edges[idx] if idx is not None else None

    def icost_between(self, tail: int, head: int) -> int:
        return self.icost[self.edge_index[(tail, head)]]

    def cost_from_scaled(self, value: int) -> Fraction:
        return Fraction(value, self.cost_scale)

    def with_node_capacity(self, capacity: Sequence[int] | int) -> "Network":
        caps = [capacity] * self.num_nodes if isinstance(capacity, int) else list(capacity)
        return Network(self.labels, caps, self.edges)

    def with_edge_capacities(self, capacities: dict[tuple[int, int], Optional[Fraction]]) -> "Network":
        new_edges = [
            Edge(e.tail, e.head, e.cost, capacities.get((e.tail, e.head), e.capacity))
            for e in self.edges
        ]
        return Network(self.labels, self.node_capacity, new_edges)


class Instance(NamedTuple):
    """A network plus the multicast groups requested on it."""

    network: Network
    groups: list[MulticastGroup]


def max_destinations(groups: Iterable[MulticastGroup]) -> int:
    """Largest destination-set size over the groups (the approximation ratio bound)."""
    return max((len(g.destinations) for g in groups), default=0)


# ---------------------------------------------------------------------------
# Deterministic single-source shortest paths
# ---------------------------------------------------------------------------


def shortest_path_forest(
    net: Network,
    sources: Sequence[int],
    *,
    edge_ok=None,
    node_ok=None,
) -> tuple[list[Optional[int]], list[Optional[int]], list[int]]:
    """Dijkstra from one or more sources with the canonical tie-break.

    Returns (dist_scaled, hops, parent); parent[source] == -1, parent of an
    unreachable node is -1 and its dist is None. With several sources each
    node is claimed by the (cost, hops, lex) smallest path over all of them.
    """
    n = net.num_nodes
    dist: list[Optional[int]] = [None] * n
    hops: list[Optional[int]] = [None] * n
    heap: list[tuple[int, int, int]] = []
    for s in sources:
        if node_ok is not None and not node_ok(s):
            continue
        dist[s] = 0
        hops[s] = 0
        heapq.heappush(heap, (0, 0, s))
    while heap:
        d, h, u = heapq.heappop(heap)
        if (d, h) != (dist[u], hops[u]):
            continue
        for eidx in net.out_edges[u]:
            e = net.edges[eidx]
            v = e.head
            if node_ok is not None and not node_ok(v):
                continue
            if edge_ok is not None and not edge_ok(eidx):
                continue
            nd = d + net.icost[eidx]
            nh = h + 1
            old = dist[v]
            if old is None or (nd, nh) < (old, hops[v]):
                dist[v] = nd
                hops[v] = nh
                heapq.heappush(heap, (nd, nh, v))

    # Second pass: among optimal predecessors pick the one whose node
    # sequence is lexicographically smallest. Sequences compared over equal
    # length (hops are fixed), so prefix order decides.
    parent = [-1] * n
    seq: dict[int, tuple[int, ...]] = {}
    for s in sources:
        if dist[s] == 0 and hops[s] == 0:
            seq[s] = (s,)
    order = sorted((dist[v], hops[v], v) for v in range(n) if dist[v] is not None)
    for d, h, v in order:
        if v in seq:
            continue
        best: Optional[tuple[int, ...]] = None
        best_p = -1
        for eidx in net.in_edges[v]:
            e = net.edges[eidx]
            u = e.tail
            if dist[u] is None or u not in seq:
                continue
            if edge_ok is not None and not edge_ok(eidx):
                continue
            if dist[u] == d - net.icost[eidx] and hops[u] == h - 1:
                cand = seq[u]
                if best is None or cand < best:
                    best = cand
                    best_p = u
        if best is None:
            # No valid predecessor (can happen only for filtered sources).
            dist[v] = None
            hops[v] = None
            continue
        parent[v] = best_p
        seq[v] = best + (v,)
    return dist, hops, parent


class DistanceTable:
    """All-pairs shortest path costs with deterministic path reconstruction."""

    def __init__(self, net: Network):
        self.net = net
        self._rows: dict[int, tuple[list, list, list]] = {}

    def _row(self, source: int):
        row = self._rows.get(source)
        if row is None:
            row = shortest_path_forest(self.net, [source])
            self._rows[source] = row
        return row

    def cost_scaled(self, u: int, v: int) -> Optional[int]:
        return self._row(u)[0][v]

    def cost(self, u: int, v: int) -> Optional[Fraction]:
        d = self.cost_scaled(u, v)
        return None if d is None else self.net.cost_from_scaled(d)

    def parent_array(self, source: int) -> list[int]:
        return self._row(source)[2]

    def path(self, u: int, v: int) -> Optional[Path]:
        dist, _, parent = self._row(u)
        if dist[v] is None:
            return None
        nodes = [v]
        while nodes[-1] != u:
            nodes.append(parent[nodes[-1]])
        nodes.reverse()
        return Path(tuple(nodes), self.net.cost_from_scaled(dist[v]))


def all_pairs_shortest_paths(net: Network) -> DistanceTable:
    """Distance table over all ordered pairs (computed per source on demand)."""
    return DistanceTable(net)


def shortest_path_avoiding(
    net: Network, source: int, target: int, forbidden: Iterable[int]
) -> Optional[Path]:
    """Cheapest simple path source->target whose nodes avoid ``forbidden``."""
    banned = set(forbidden)
    if source in banned or target in banned:
        raise InstanceError("endpoints may not be forbidden")
    dist, _, parent = shortest_path_forest(net, [source], node_ok=lambda v: v not in banned)
    if dist[target] is None:
        return None
    nodes = [target]
    while nodes[-1] != source:
        nodes.append(parent[nodes[-1]])
    nodes.reverse()
    return Path(tuple(nodes), net.cost_from_scaled(dist[target]))


# ---------------------------------------------------------------------------
# GraphML ingestion (Topology Zoo dialect)
# ---------------------------------------------------------------------------


def _strip_ns(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def load_graphml(
    data: bytes | str,
    *,
    node_capacity: int = 0,
    default_cost: Fraction | int = 1,
    default_capacity: Optional[Fraction] = None,
) -> Network:
    """Build a Network from GraphML bytes.

    Every undirected source edge becomes two directed edges carrying the full
    stated capacity. Edge costs default to 1, capacities to unbounded and
    node capacities to the caller-supplied uniform value; link attribute
    labels (bandwidth etc.) are ignored.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise TopologyParseError(f"malformed GraphML at line {line}, column {col}: {exc}") from exc

    graph = None
    for el in root.iter():
        if _strip_ns(el.tag) == "graph":
            graph = el
            break
    if graph is None:
        raise TopologyParseError("no <graph> element found")
    directed = graph.get("edgedefault", "undirected") == "directed"

    labels: list[str] = []
    seen: set[str] = set()
    raw_edges: list[tuple[str, str]] = []
    for el in graph:
        tag = _strip_ns(el.tag)
        if tag == "node":
            node_id = el.get("id")
            if node_id is None:
                raise TopologyParseError("node element without id attribute")
            if node_id in seen:
                raise TopologyParseError(f"duplicate node id {node_id!r}")
            seen.add(node_id)
            labels.append(node_id)
        elif tag == "edge":
            src, dst = el.get("source"), el.get("target")
            if src is None or dst is None:
                raise TopologyParseError("edge element without source/target")
            raw_edges.append((src, dst))

    index = {lab: i for i, lab in enumerate(labels)}
    cost = parse_rational(default_cost)
    edges: list[Edge] = []
    placed: set[tuple[int, int]] = set()
    for src, dst in raw_edges:
        if src not in index or dst not in index:
            raise TopologyParseError(f"edge references unknown node {src!r} or {dst!r}")
        u, v = index[src], index[dst]
        if u == v:
            raise TopologyParseError(f"self-loop at node {src!r}")
        pairs = [(u, v)] if directed else [(u, v), (v, u)]
        for pair in pairs:
            if pair in placed:
                raise TopologyParseError(
                    f"duplicate edge {labels[pair[0]]!r}->{labels[pair[1]]!r}"
                )
            placed.add(pair)
            edges.append(Edge(pair[0], pair[1], cost, default_capacity))

    return Network(labels, [node_capacity] * len(labels), edges)
