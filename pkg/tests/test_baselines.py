import random
from fractions import Fraction

import pytest

from mcast_te.baselines import solve_spt, solve_steiner
from mcast_te.exceptions import InfeasibleInstanceError
from mcast_te.generators import relay_pair_instance
from mcast_te.graph import Edge, MulticastGroup, Network, all_pairs_shortest_paths
from mcast_te.solver import SolverConfig
from mcast_te.trees import MODE_NODE_WEAK_LINK, StateAssignment, total_cost

from conftest import random_network


def test_spt_no_contention_cost_is_tree_edge_sum():
    net, groups = relay_pair_instance(cap_a=5, cap_b=5)
    sol = solve_spt(net, groups, seed=1)
    edge_sum = sum(
        (net.edge_between(p, c).cost for p, c in sol.trees[0].edges()), Fraction(0)
    )
    assert sol.total_cost == edge_sum == 3


def test_spt_zero_capacity_cost_four():
    net, groups = relay_pair_instance(cap_a=0, cap_b=0)
    sol = solve_spt(net, groups, seed=0)
    assert sol.total_cost == 4
    assert sol.report.feasible


def test_baselines_deterministic_per_seed():
    local = random.Random(99)
    net = random_network(local, 9, node_cap=1)
    groups = []
    for gid in range(3):
        pool = list(range(1, 9))
        groups.append(MulticastGroup(gid, 0, frozenset(local.sample(pool, 3))))
    try:
        a = solve_spt(net, groups, seed=5)
        b = solve_spt(net, groups, seed=5)
        c = solve_spt(net, groups, seed=6)
    except InfeasibleInstanceError:
        pytest.skip("sampled instance infeasible")
    assert a.total_cost == b.total_cost
    assert a.assignment == b.assignment
    assert {g: t.edges() for g, t in a.trees.items()} == {
        g: t.edges() for g, t in c.trees.items()
    }  # trees ignore the seed; only states may differ


def test_steiner_single_destination_matches_spt():
    labels = ["s", "a", "d"]
    net = Network(labels, [1] * 3, [Edge(0, 1, Fraction(1)), Edge(1, 2, Fraction(1)), Edge(0, 2, Fraction(5))])
    group = MulticastGroup(0, 0, frozenset({2}))
    spt = solve_spt(net, [group], seed=0)
    st = solve_steiner(net, [group], seed=0)
    assert spt.trees[0].edges() == st.trees[0].edges()


def test_steiner_shares_relay_on_diamond():
    # Sharing the relay beats the shortest-path tree, which routes d2 direct
    # (equal cost, fewer hops) and misses the shared segment.
    labels = ["s", "r", "d1", "d2"]
    edges = [
        Edge(0, 1, Fraction(2)),
        Edge(1, 2, Fraction(1)),
        Edge(1, 3, Fraction(2)),
        Edge(0, 3, Fraction(4)),
    ]
    net = Network(labels, [5] * 4, edges)
    group = MulticastGroup(0, 0, frozenset({2, 3}))
    st = solve_steiner(net, [group], seed=0)
    spt = solve_spt(net, [group], seed=0)
    st_sum = sum((net.edge_between(p, c).cost for p, c in st.trees[0].edges()), Fraction(0))
    spt_sum = sum((net.edge_between(p, c).cost for p, c in spt.trees[0].edges()), Fraction(0))
    assert st_sum == 5 < spt_sum == 7


def test_steiner_insertion_bound():
    # Tree edge cost never exceeds the sum of source->destination distances.
    for seed in range(8):
        local = random.Random(seed + 800)
        net = random_network(local, 9, node_cap=2)
        pool = list(range(1, 9))
        group = MulticastGroup(0, 0, frozenset(local.sample(pool, 4)))
        try:
            st = solve_steiner(net, [group], seed=0)
        except InfeasibleInstanceError:
            continue
        table = all_pairs_shortest_paths(net)
        bound = sum(table.cost(0, d) for d in group.destinations)
        st_sum = sum(
            (net.edge_between(p, c).cost for p, c in st.trees[0].edges()), Fraction(0)
        )
        assert st_sum <= bound


def test_baselines_verify_in_their_mode():
    for seed in range(6):
        local = random.Random(seed + 4500)
        net = random_network(local, 9, node_cap=1)
        groups = [
            MulticastGroup(g, 0, frozenset(local.sample(list(range(1, 9)), 3)))
            for g in range(4)
        ]
        try:
            spt = solve_spt(net, groups, seed=seed)
            st = solve_steiner(net, groups, seed=seed)
        except InfeasibleInstanceError:
            continue
        assert spt.mode == st.mode == MODE_NODE_WEAK_LINK
        assert spt.report.feasible
        assert st.report.feasible


def test_phase1_trees_no_costlier_than_spt_baseline_trees():
    # With unbounded capacity and identical order, both build the same
    # deterministic shortest-path trees.
    for seed in range(6):
        local = random.Random(seed + 7100)
        net = random_network(local, 9, node_cap=10)
        groups = [
            MulticastGroup(g, 0, frozenset(local.sample(list(range(1, 9)), 3)))
            for g in range(3)
        ]
        try:
            base = solve_spt(net, groups, seed=0)
        except InfeasibleInstanceError:
            continue
        empty = StateAssignment()
        base_cost = total_cost(net, base.trees, empty, groups)
        from mcast_te.solver import _Work, _build_phase1_trees

        work = _Work(net, groups, SolverConfig(enable_reroute=False))
        _build_phase1_trees(work)
        mine = total_cost(net, work.trees, empty, groups)
        assert mine <= base_cost
