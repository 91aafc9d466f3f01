import random
from fractions import Fraction

import pytest

from mcast_te.exceptions import InstanceError, TopologyParseError
from mcast_te.graph import (
    Edge,
    Network,
    all_pairs_shortest_paths,
    load_graphml,
    shortest_path_avoiding,
)

from conftest import brute_force_shortest, brute_force_shortest_avoiding, random_network


def chain_network():
    labels = ["s", "a", "d"]
    edges = [Edge(0, 1, Fraction(1)), Edge(1, 2, Fraction(1)), Edge(0, 2, Fraction(5))]
    return Network(labels, [1, 1, 1], edges)


def test_chain_distances():
    net = chain_network()
    table = all_pairs_shortest_paths(net)
    assert table.cost(0, 2) == 2
    assert table.cost(0, 0) == 0
    assert table.path(0, 2).nodes == (0, 1, 2)


def test_identity_distance_everywhere():
    net = random_network(random.Random(7), 8)
    table = all_pairs_shortest_paths(net)
    for u in range(net.num_nodes):
        assert table.cost(u, u) == 0


def test_apsp_against_enumeration():
    for seed in range(8):
        net = random_network(random.Random(seed), 8, fractional=True)
        table = all_pairs_shortest_paths(net)
        for u in range(net.num_nodes):
            for v in range(net.num_nodes):
                if u == v:
                    continue
                assert table.cost(u, v) == brute_force_shortest(net, u, v)


def test_path_reconstruction_cost_matches_table():
    net = random_network(random.Random(3), 9, fractional=True)
    table = all_pairs_shortest_paths(net)
    for u in range(net.num_nodes):
        for v in range(net.num_nodes):
            path = table.path(u, v)
            if path is None:
                continue
            total = sum(
                (net.edge_between(a, b).cost for a, b in zip(path.nodes, path.nodes[1:])),
                Fraction(0),
            )
            assert total == table.cost(u, v) == path.cost


def test_triangle_inequality():
    net = random_network(random.Random(11), 9)
    table = all_pairs_shortest_paths(net)
    n = net.num_nodes
    for u in range(n):
        for v in range(n):
            for w in range(n):
                duv, duw, dwv = table.cost(u, v), table.cost(u, w), table.cost(w, v)
                if duw is None or dwv is None:
                    continue
                assert duv is not None and duv <= duw + dwv


def test_cost_scaling_linearity():
    net = random_network(random.Random(5), 8, fractional=True)
    doubled = Network(
        net.labels,
        net.node_capacity,
        [Edge(e.tail, e.head, 2 * e.cost, e.capacity) for e in net.edges],
    )
    t1 = all_pairs_shortest_paths(net)
    t2 = all_pairs_shortest_paths(doubled)
    for u in range(net.num_nodes):
        for v in range(net.num_nodes):
            c1, c2 = t1.cost(u, v), t2.cost(u, v)
            assert (c1 is None) == (c2 is None)
            if c1 is not None:
                assert c2 == 2 * c1


def test_avoiding_unique_alternative():
    net = chain_network()
    path = shortest_path_avoiding(net, 0, 2, {1})
    assert path.nodes == (0, 2)
    assert path.cost == 5


def test_avoiding_empty_matches_table():
    net = random_network(random.Random(13), 8)
    table = all_pairs_shortest_paths(net)
    for u in range(net.num_nodes):
        for v in range(net.num_nodes):
            if u == v:
                continue
            path = shortest_path_avoiding(net, u, v, set())
            cost = table.cost(u, v)
            assert (path is None) == (cost is None)
            if path is not None:
                assert path.cost == cost


def test_avoiding_against_enumeration():
    rng = random.Random(17)
    for seed in range(6):
        net = random_network(random.Random(seed + 100), 8)
        for _ in range(10):
            u, v = rng.sample(range(net.num_nodes), 2)
            pool = [x for x in range(net.num_nodes) if x not in (u, v)]
            forbidden = set(rng.sample(pool, rng.randint(0, len(pool) // 2)))
            path = shortest_path_avoiding(net, u, v, forbidden)
            best = brute_force_shortest_avoiding(net, u, v, forbidden)
            assert (path is None) == (best is None)
            if path is not None:
                assert path.cost == best
                assert not forbidden & set(path.nodes)


def test_deterministic_tie_break_prefers_fewer_hops_then_lex():
    labels = ["s", "a", "b", "d"]
    edges = [
        Edge(0, 3, Fraction(2)),       # direct, 1 hop
        Edge(0, 1, Fraction(1)),
        Edge(1, 3, Fraction(1)),       # via a, 2 hops, same cost
        Edge(0, 2, Fraction(1)),
        Edge(2, 3, Fraction(1)),       # via b, 2 hops, same cost
    ]
    net = Network(labels, [0] * 4, edges)
    table = all_pairs_shortest_paths(net)
    assert table.path(0, 3).nodes == (0, 3)
    # Remove the direct edge: lex picks via a (index 1 < 2).
    net2 = Network(labels, [0] * 4, edges[1:])
    assert all_pairs_shortest_paths(net2).path(0, 3).nodes == (0, 1, 3)


GRAPHML = """<?xml version="1.0" encoding="utf-8"?>
<graphml xmlns="http://graphml.graphdrawing.org/xmlns">
  <graph edgedefault="undirected">
    <node id="0" /><node id="1" /><node id="2" />
    <edge source="0" target="1" />
    <edge source="1" target="2" />
  </graph>
</graphml>
"""


def test_load_graphml_doubles_undirected_edges():
    net = load_graphml(GRAPHML, node_capacity=3)
    assert net.num_nodes == 3
    assert net.num_edges == 4
    assert net.edge_between(0, 1).cost == 1
    assert net.edge_between(1, 0).capacity is None
    assert net.node_capacity == [3, 3, 3]


def test_load_graphml_single_node_no_edges():
    text = GRAPHML.replace('<node id="1" /><node id="2" />', "").split("<edge")[0]
    text += "</graph>\n</graphml>"
    net = load_graphml(text)
    assert net.num_nodes == 1
    assert net.num_edges == 0


def test_load_graphml_rejects_malformed_xml():
    with pytest.raises(TopologyParseError, match="line"):
        load_graphml(b"<graphml><graph><node id='0'>")


def test_load_graphml_rejects_duplicate_edges():
    bad = GRAPHML.replace(
        '<edge source="1" target="2" />',
        '<edge source="1" target="2" /><edge source="2" target="1" />',
    )
    with pytest.raises(TopologyParseError, match="duplicate"):
        load_graphml(bad)


def test_network_rejects_self_loop_and_duplicate():
    with pytest.raises(InstanceError):
        Network(["a", "b"], [0, 0], [Edge(0, 0, Fraction(1))])
    with pytest.raises(InstanceError):
        Network(
            ["a", "b"],
            [0, 0],
            [Edge(0, 1, Fraction(1)), Edge(0, 1, Fraction(2))],
        )
