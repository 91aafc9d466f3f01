import json
from fractions import Fraction

import pytest

from mcast_te.exceptions import InstanceError
from mcast_te.generators import relay_pair_instance, showcase_instance
from mcast_te.graph import Instance
from mcast_te.serialize import (
    dumps_canonical,
    instance_from_dict,
    instance_to_dict,
    solution_from_dict,
    solution_to_dict,
)
from mcast_te.solver import solve


def test_instance_round_trip():
    inst = showcase_instance()
    data = instance_to_dict(inst)
    back = instance_from_dict(json.loads(json.dumps(data)))
    assert back.network.labels == inst.network.labels
    assert back.network.node_capacity == inst.network.node_capacity
    assert [(e.tail, e.head, e.cost, e.capacity) for e in back.network.edges] == [
        (e.tail, e.head, e.cost, e.capacity) for e in inst.network.edges
    ]
    assert back.groups == sorted(inst.groups, key=lambda g: g.id)


def test_instance_rational_fields():
    data = {
        "nodes": ["a", "b"],
        "node_capacity": {"a": 1},
        "edges": [{"tail": "a", "head": "b", "cost": "7/2", "capacity": "3/4"}],
        "groups": [{"id": 0, "source": "a", "destinations": ["b"], "rate": "1/3"}],
    }
    net, groups = instance_from_dict(data)
    assert net.edges[0].cost == Fraction(7, 2)
    assert net.edges[0].capacity == Fraction(3, 4)
    assert groups[0].rate == Fraction(1, 3)
    out = instance_to_dict(Instance(net, groups))
    assert out["edges"][0]["cost"] == "7/2"
    assert out["groups"][0]["rate"] == "1/3"


def test_instance_errors():
    with pytest.raises(InstanceError):
        instance_from_dict({"nodes": ["a", "a"]})
    with pytest.raises(InstanceError):
        instance_from_dict(
            {"nodes": ["a"], "edges": [{"tail": "a", "head": "zz"}]}
        )


def test_solution_round_trip_and_claim():
    net, groups = relay_pair_instance(cap_a=1, cap_b=0)
    sol = solve(net, groups)
    data = solution_to_dict(net, sol)
    assert data["total_cost"] == "3"
    rebuilt, claimed = solution_from_dict(net, json.loads(json.dumps(data)))
    assert claimed == sol.total_cost
    assert rebuilt.total_cost == sol.total_cost
    assert rebuilt.assignment == sol.assignment
    assert rebuilt.report.feasible


def test_solution_detects_tampered_cost():
    net, groups = relay_pair_instance(cap_a=1, cap_b=0)
    sol = solve(net, groups)
    data = solution_to_dict(net, sol)
    data["total_cost"] = "999"
    rebuilt, claimed = solution_from_dict(net, data)
    assert claimed == 999
    assert rebuilt.total_cost != claimed


def test_canonical_bytes_identical():
    net, groups = showcase_instance()
    a = dumps_canonical(solution_to_dict(net, solve(net, groups)))
    b = dumps_canonical(solution_to_dict(net, solve(net, groups)))
    assert a == b


def test_solution_edge_payload_shape():
    net, groups = relay_pair_instance(cap_a=1, cap_b=0)
    sol = solve(net, groups)
    data = solution_to_dict(net, sol)
    edge = data["edges"][0]
    assert set(edge) == {"tail", "head", "copies", "flow"}
    tree = data["trees"][0]
    assert set(tree) == {"group", "root", "rate", "destinations", "parents", "states"}
