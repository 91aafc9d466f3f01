import random
from fractions import Fraction

import pytest

from mcast_te.exceptions import ContractViolation
from mcast_te.graph import Edge, MulticastGroup, Network
from mcast_te.trees import (
    MODE_NODE,
    MODE_NODE_LINK,
    Solution,
    StateAssignment,
    TreeRouting,
    branch_nodes,
    edge_transmissions,
    marginal_gain,
    nearest_upstream_state,
    total_cost,
    tree_cost,
    verify_feasible,
)

from conftest import random_group, random_network, random_tree, random_valid_assignment


def line_net(costs, caps=None):
    """Chain s -> n1 -> n2 ... with the given edge costs."""
    labels = [f"n{i}" for i in range(len(costs) + 1)]
    edges = [Edge(i, i + 1, Fraction(c)) for i, c in enumerate(costs)]
    return Network(labels, caps or [1] * len(labels), edges)


def star_after_stem(stem_costs, leaf_count, leaf_cost=1, node_cap=1):
    """s -> ... -> hub -> {d1..dk}; returns (net, group, tree, hub index)."""
    n_stem = len(stem_costs)
    labels = [f"v{i}" for i in range(n_stem + 1)] + [f"d{i}" for i in range(leaf_count)]
    edges = [Edge(i, i + 1, Fraction(c)) for i, c in enumerate(stem_costs)]
    hub = n_stem
    for k in range(leaf_count):
        edges.append(Edge(hub, n_stem + 1 + k, Fraction(leaf_cost)))
    net = Network(labels, [node_cap] * len(labels), edges)
    dests = frozenset(range(n_stem + 1, n_stem + 1 + leaf_count))
    group = MulticastGroup(0, 0, dests)
    parent = {i + 1: i for i in range(n_stem)}
    parent.update({d: hub for d in dests})
    tree = TreeRouting(0, 0, parent)
    return net, group, tree, hub


def test_branch_nodes_path_and_star():
    net, group, tree, hub = star_after_stem([1], 3)
    assert branch_nodes(tree) == {hub}
    # Pure path: no fan-out anywhere.
    chain = TreeRouting(0, 0, {1: 0, 2: 1})
    assert branch_nodes(chain) == frozenset()
    # Root with many children is excluded.
    root_star = TreeRouting(0, 0, {1: 0, 2: 0, 3: 0})
    assert branch_nodes(root_star) == frozenset()


def test_nearest_upstream_state():
    net, group, tree, hub = star_after_stem([1], 2)
    d = sorted(group.destinations)[0]
    assert nearest_upstream_state(tree, set(), d) == 0
    assert nearest_upstream_state(tree, {hub}, d) == hub
    chain = TreeRouting(0, 0, {1: 0, 2: 1})
    assert nearest_upstream_state(chain, set(), 2) == 0


def test_edge_transmissions_tunneling_and_state():
    net, group, tree, hub = star_after_stem([1], 2)
    eps = edge_transmissions(tree, group.destinations, set())
    assert eps[(0, hub)] == 2
    assert all(eps[(hub, d)] == 1 for d in group.destinations)
    eps_state = edge_transmissions(tree, group.destinations, {hub})
    assert eps_state[(0, hub)] == 1


def test_edge_transmissions_rejects_non_branch_state():
    chain = TreeRouting(0, 0, {1: 0, 2: 1})
    with pytest.raises(ContractViolation):
        edge_transmissions(chain, {2}, {1})


def test_edge_transmissions_equals_segment_enumeration(rng):
    """Copy counts equal the number of delivery segments crossing each edge."""
    from mcast_te.trees import nearest_upstream_state as nus

    checked = 0
    for seed in range(40):
        local = random.Random(seed)
        net = random_network(local, 7)
        group = random_group(local, net, 0, dest_count=local.randint(1, 4))
        tree = random_tree(local, net, group)
        if tree is None:
            continue
        assignment = random_valid_assignment(local, net, {0: tree}, [group])
        states = assignment.for_group(0)
        eps = edge_transmissions(tree, group.destinations, states)
        depth = tree.depth_scaled(net)
        expect: dict = {}
        for v in sorted(set(group.destinations) | states):
            anchor = nus(tree, states, v)
            cur = v
            while cur != anchor:
                par = tree.parent[cur]
                expect[(par, cur)] = expect.get((par, cur), 0) + 1
                cur = par
        assert eps == expect
        checked += 1
    assert checked >= 20


def test_tree_cost_chain():
    net = line_net([2, 3])
    tree = TreeRouting(0, 0, {1: 0, 2: 1})
    assert tree_cost(net, tree, {2}, set()) == 5


def test_tree_cost_stem_star_with_and_without_state():
    # Stem cost 9 then three unit leaves: tunneling 9*3+3, state 9+3.
    net, group, tree, hub = star_after_stem([9], 3)
    assert tree_cost(net, tree, group.destinations, set()) == 30
    assert tree_cost(net, tree, group.destinations, {hub}) == 12


def test_segment_gain_sixty_three():
    # Stateless segment of cost 21 above a candidate with 4 downstream members.
    net, group, tree, hub = star_after_stem([10, 11], 4)
    before = tree_cost(net, tree, group.destinations, set())
    after = tree_cost(net, tree, group.destinations, {hub})
    assert before - after == (4 - 1) * 21 == 63
    gain = marginal_gain(net, {0: tree}, StateAssignment(), [group], (0, hub))
    assert gain == 63


def test_segment_gain_thirty():
    net, group, tree, hub = star_after_stem([7, 8], 3)
    gain = marginal_gain(net, {0: tree}, StateAssignment(), [group], (0, hub))
    assert gain == (3 - 1) * 15 == 30


def test_first_hop_gains_eighteen_vs_nine():
    # Same first-hop segment cost 9; one tree has 3 members below, other 2.
    labels = ["s", "a"] + [f"d{i}" for i in range(3)] + [f"e{i}" for i in range(2)]
    edges = [Edge(0, 1, Fraction(9))]
    edges += [Edge(1, 2 + i, Fraction(1)) for i in range(3)]
    edges += [Edge(1, 5 + i, Fraction(1)) for i in range(2)]
    net = Network(labels, [2] * len(labels), edges)
    g1 = MulticastGroup(1, 0, frozenset({2, 3, 4}))
    g2 = MulticastGroup(2, 0, frozenset({5, 6}))
    t1 = TreeRouting(1, 0, {1: 0, 2: 1, 3: 1, 4: 1})
    t2 = TreeRouting(2, 0, {1: 0, 5: 1, 6: 1})
    trees = {1: t1, 2: t2}
    empty = StateAssignment()
    assert marginal_gain(net, trees, empty, [g1, g2], (1, 1)) == 18
    assert marginal_gain(net, trees, empty, [g1, g2], (2, 1)) == 9


def test_single_downstream_member_gain_zero():
    # A branch node whose segment serves one member saves nothing... build a
    # destination with a single pass-through child under the candidate.
    labels = ["s", "u", "d1", "d2", "x"]
    edges = [
        Edge(0, 1, Fraction(5)),
        Edge(1, 2, Fraction(1)),
        Edge(1, 4, Fraction(1)),
        Edge(4, 3, Fraction(1)),
    ]
    net = Network(labels, [1] * 5, edges)
    # u branches to d1 and x->d2; candidate x is not a branch node, u is.
    tree = TreeRouting(0, 0, {1: 0, 2: 1, 4: 1, 3: 4})
    group = MulticastGroup(0, 0, frozenset({2, 3}))
    assert branch_nodes(tree) == {1}
    gain_u = marginal_gain(net, {0: tree}, StateAssignment(), [group], (0, 1))
    assert gain_u == (2 - 1) * 5


def test_total_cost_sums_and_scales():
    # Two independent chains with stateless costs 142 and 92 total 234.
    labels = ["s", "m", "a", "b"]
    edges = [Edge(0, 2, Fraction(142)), Edge(1, 3, Fraction(92))]
    net = Network(labels, [0] * 4, edges)
    g1 = MulticastGroup(1, 0, frozenset({2}))
    g2 = MulticastGroup(2, 1, frozenset({3}))
    trees = {1: TreeRouting(1, 0, {2: 0}), 2: TreeRouting(2, 1, {3: 1})}
    assert total_cost(net, trees, StateAssignment(), [g1, g2]) == 234
    # Rate scaling: one group, rate 2, tree cost 5 -> 10.
    net2 = line_net([2, 3])
    g = MulticastGroup(0, 0, frozenset({2}), Fraction(2))
    assert total_cost(net2, {0: TreeRouting(0, 0, {1: 0, 2: 1})}, StateAssignment(), [g]) == 10


def test_branch_free_tree_ignores_assignment():
    net = line_net([2, 3])
    tree = TreeRouting(0, 0, {1: 0, 2: 1})
    group = MulticastGroup(0, 0, frozenset({2}))
    assert tree_cost(net, tree, group.destinations, set()) == tree_cost(
        net, tree, group.destinations, branch_nodes(tree)
    )


def test_full_assignment_is_pure_multicast_minimum(rng):
    for seed in range(30):
        local = random.Random(seed + 500)
        net = random_network(local, 7, node_cap=5)
        group = random_group(local, net, 0, dest_count=local.randint(2, 4))
        tree = random_tree(local, net, group)
        if tree is None:
            continue
        full = branch_nodes(tree)
        full_cost = tree_cost(net, tree, group.destinations, full)
        edge_sum = sum(
            (net.edge_between(p, c).cost for p, c in tree.edges()), Fraction(0)
        )
        # A destination with exactly one child cannot hold state, so its own
        # delivery segment still duplicates traffic upstream; only without
        # such pass-through destinations does the full assignment reach the
        # bare edge-cost sum.
        if all(tree.child_count(d) != 1 for d in group.destinations):
            assert full_cost == edge_sum
        else:
            assert full_cost > edge_sum
        # Full assignment is the minimum over every assignment regardless.
        for _ in range(8):
            subset = {u for u in full if local.random() < 0.5}
            assert tree_cost(net, tree, group.destinations, subset) >= full_cost


def test_verify_feasible_node_capacity():
    net, group, tree, hub = star_after_stem([1], 2, node_cap=0)
    assignment = StateAssignment({0: {hub}})
    report = verify_feasible(net, {0: tree}, assignment, [group], MODE_NODE)
    assert not report.feasible
    assert report.node_violations[0].node == hub
    # Empty assignment with zero capacities is fine.
    report2 = verify_feasible(net, {0: tree}, StateAssignment(), [group], MODE_NODE)
    assert report2.feasible


def test_verify_feasible_link_capacity():
    # Two rate-1 trees share an edge of capacity 1.
    labels = ["s", "a", "d"]
    edges = [Edge(0, 1, Fraction(1), Fraction(1)), Edge(1, 2, Fraction(1), Fraction(1))]
    net = Network(labels, [1] * 3, edges)
    g1 = MulticastGroup(1, 0, frozenset({2}))
    g2 = MulticastGroup(2, 0, frozenset({2}))
    trees = {1: TreeRouting(1, 0, {1: 0, 2: 1}), 2: TreeRouting(2, 0, {1: 0, 2: 1})}
    report = verify_feasible(net, trees, StateAssignment(), [g1, g2], MODE_NODE_LINK)
    assert not report.feasible
    assert len(report.edge_violations) == 2
    report_node = verify_feasible(net, trees, StateAssignment(), [g1, g2], MODE_NODE)
    assert report_node.feasible


def test_solution_build_recomputes_cost():
    net, group, tree, hub = star_after_stem([9], 3)
    sol = Solution.build(net, [group], {0: tree}, StateAssignment({0: {hub}}), MODE_NODE)
    assert sol.total_cost == 12
    assert sol.max_dest == 3
    assert sol.report.feasible
    assert sol.edge_copies()[(0, hub)] == {0: 1}
    assert sol.edge_flows()[(0, hub)] == 1
