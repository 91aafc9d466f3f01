"""Instance and solution file formats (JSON with exact rational strings).

Instance fields: nodes[], node_capacity{}, edges[{tail,head,cost,capacity}],
groups[{id,source,destinations,rate}]. Capacity null means unbounded.
Solutions carry per-tree parent maps over node labels, per-tree state sets,
per-edge copy counts and flows, and the total cost as an exact rational
string; serialization is canonical so identical solutions give identical
bytes.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any

from .exceptions import InstanceError
from .graph import Edge, Instance, MulticastGroup, Network
from .rational import format_rational, parse_rational, rational_json
from .trees import Solution, StateAssignment, TreeRouting, VERIFY_MODES


def instance_to_dict(instance: Instance) -> dict[str, Any]:
    net, groups = instance
    return {
        "nodes": list(net.labels),
        "node_capacity": {net.labels[i]: c for i, c in enumerate(net.node_capacity)},
        "edges": [
            {
                "tail": net.labels[e.tail],
                "head": net.labels[e.head],
                "cost": rational_json(e.cost),
                "capacity": None if e.capacity is None else rational_json(e.capacity),
            }
            for e in net.edges
        ],
        "groups": [
            {
                "id": g.id,
                "source": net.labels[g.source],
                "destinations": sorted(net.labels[d] for d in g.destinations),
                "rate": rational_json(g.rate),
            }
            for g in sorted(groups, key=lambda g: g.id)
        ],
    }


def instance_from_dict(data: dict[str, Any]) -> Instance:
    try:
        labels = list(data["nodes"])
    except (KeyError, TypeError) as exc:
        raise InstanceError("instance file needs a 'nodes' list") from exc
    index = {lab: i for i, lab in enumerate(labels)}
    if len(index) != len(labels):
        raise InstanceError("duplicate node labels")
    caps_in = data.get("node_capacity", {})
    unknown = set(caps_in) - set(index)
    if unknown:
        raise InstanceError(f"node_capacity references unknown nodes {sorted(unknown)}")
    caps = [int(caps_in.get(lab, 0)) for lab in labels]

    def node(label: Any, where: str) -> int:
        if label not in index:
            raise InstanceError(f"{where}: unknown node {label!r}")
        return index[label]

    edges = []
    for spec in data.get("edges", []):
        cap = spec.get("capacity")
        edges.append(
            Edge(
                node(spec["tail"], "edge"),
                node(spec["head"], "edge"),
                parse_rational(spec.get("cost", 1)),
                None if cap is None else parse_rational(cap),
            )
        )
    net = Network(labels, caps, edges)
    groups = []
    for spec in data.get("groups", []):
        group = MulticastGroup(
            int(spec["id"]),
            node(spec["source"], f"group {spec.get('id')}"),
            frozenset(node(d, f"group {spec.get('id')}") for d in spec["destinations"]),
            parse_rational(spec.get("rate", 1)),
        )
        group.validate(net)
        groups.append(group)
    ids = [g.id for g in groups]
    if len(set(ids)) != len(ids):
        raise InstanceError("duplicate group ids")
    return Instance(net, groups)


def solution_to_dict(net: Network, solution: Solution) -> dict[str, Any]:
    lab = net.labels
    copies = solution.edge_copies()
    flows = solution.edge_flows()
    return {
        "mode": solution.mode,
        "total_cost": format_rational(solution.total_cost),
        "max_destinations": solution.max_dest,
        "trees": [
            {
                "group": g.id,
                "root": lab[solution.trees[g.id].root],
                "rate": rational_json(g.rate),
                "destinations": sorted(lab[d] for d in g.destinations),
                "parents": {
                    lab[child]: lab[parent]
                    for child, parent in sorted(solution.trees[g.id].parent.items())
                },
                "states": sorted(lab[u] for u in solution.assignment.for_group(g.id)),
            }
            for g in solution.groups
        ],
        "edges": [
            {
                "tail": lab[t],
                "head": lab[h],
                "copies": {str(gid): count for gid, count in sorted(per.items())},
                "flow": rational_json(flows[(t, h)]),
            }
            for (t, h), per in sorted(copies.items())
        ],
        "feasibility": {
            "feasible": solution.report.feasible,
            "node_violations": [
                {"node": v.label, "used": v.used, "capacity": v.capacity}
                for v in solution.report.node_violations
            ],
            "edge_violations": [
                {
                    "tail": v.tail_label,
                    "head": v.head_label,
                    "flow": rational_json(v.flow),
                    "capacity": rational_json(v.capacity),
                }
                for v in solution.report.edge_violations
            ],
            "structural": list(solution.report.structural),
        },
    }


def solution_from_dict(net: Network, data: dict[str, Any]) -> tuple[Solution, Fraction]:
    """Rebuild a Solution (recomputing cost and feasibility from scratch);
    returns it together with the file's claimed cost."""
    mode = data.get("mode", "node")
    if mode not in VERIFY_MODES:
        raise InstanceError(f"unknown solution mode {mode!r}")
    claimed = parse_rational(data["total_cost"])
    index = net.index
    groups = []
    trees: dict[int, TreeRouting] = {}
    assignment = StateAssignment()
    for spec in data.get("trees", []):
        gid = int(spec["group"])
        root = index[spec["root"]]
        dests = frozenset(index[d] for d in spec["destinations"])
        rate = parse_rational(spec.get("rate", 1))
        groups.append(MulticastGroup(gid, root, dests, rate))
        parent = {index[c]: index[p] for c, p in spec.get("parents", {}).items()}
        trees[gid] = TreeRouting(gid, root, parent)
        assignment.for_group(gid)
        for u in spec.get("states", []):
            assignment.add(gid, index[u])
    solution = Solution.build(net, groups, trees, assignment, mode)
    return solution, claimed


def dumps_canonical(data: dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n"


def dumps_pretty(data: dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"
