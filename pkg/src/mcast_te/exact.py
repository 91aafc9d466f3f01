"""Exhaustive solving on tiny instances and integer-program text export.

The enumeration replaces an external IP solver: all inclusion-minimal
arborescences per group (every leaf a destination) crossed with all feasible
state assignments. Restricting to minimal trees is sound because any optimal
tree prunes to a minimal one of no greater cost under every assignment.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Optional, Sequence

from .exceptions import BudgetExceededError, ContractViolation, InfeasibleInstanceError
from .graph import MulticastGroup, Network
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
)

_EXPANSION_CAP = 5_000_000


def _forward_closure(net: Network, start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for eidx in net.out_edges[u]:
            v = net.edges[eidx].head
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def _backward_closure(net: Network, targets: Iterable[int]) -> set[int]:
    seen = set(targets)
    stack = list(seen)
    while stack:
        u = stack.pop()
        for eidx in net.in_edges[u]:
            v = net.edges[eidx].tail
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def enumerate_trees(
    net: Network, group: MulticastGroup, node_budget: int = 10
) -> list[TreeRouting]:
    """All inclusion-minimal arborescences rooted at the source spanning the
    destinations; empty when some destination is unreachable."""
    if net.num_nodes > node_budget:
        raise BudgetExceededError(
            f"{net.num_nodes} nodes exceed the enumeration budget {node_budget}"
        )
    src = group.source
    dests = set(group.destinations)
    reachable = _forward_closure(net, src)
    if not dests <= reachable:
        return []
    useful = _backward_closure(net, dests)
    free = sorted((reachable & useful) - dests - {src})
    required = dests | {src}

    results: list[TreeRouting] = []
    seen_edge_sets: set[frozenset[tuple[int, int]]] = set()
    expansions = 0

    for mask in range(1 << len(free)):
        chosen = {free[i] for i in range(len(free)) if mask >> i & 1}
        node_set = required | chosen
        order = sorted(node_set - {src})
        in_choices: list[list[int]] = []
        feasible = True
        for v in order:
            parents = [
                net.edges[eidx].tail
                for eidx in net.in_edges[v]
                if net.edges[eidx].tail in node_set
            ]
            if not parents:
                feasible = False
                break
            in_choices.append(sorted(parents))
        if not feasible:
            continue

        parent: dict[int, int] = {}

        def creates_cycle(v: int, p: int) -> bool:
            cur = p
            while cur != src:
                if cur == v:
                    return True
                nxt = parent.get(cur)
                if nxt is None:
                    return False
                cur = nxt
            return False

        def rec(i: int) -> None:
            nonlocal expansions
            expansions += 1
            if expansions > _EXPANSION_CAP:
                raise BudgetExceededError("tree enumeration exceeded the expansion cap")
            if i == len(order):
                tree = TreeRouting(group.id, src, parent)
                for v in node_set:
                    if tree.is_leaf(v) and v not in dests:
                        return
                key = frozenset(parent.items())
                if key not in seen_edge_sets:
                    seen_edge_sets.add(key)
                    results.append(tree.clone())
                return
            v = order[i]
            for p in in_choices[i]:
                if creates_cycle(v, p):
                    continue
                parent[v] = p
                rec(i + 1)
                del parent[v]

        rec(0)

    results.sort(key=lambda t: t.edges())
    return results


def _subset_costs(
    net: Network, tree: TreeRouting, group: MulticastGroup
) -> tuple[list[int], dict[int, int]]:
    """Branch-node list plus scaled tree cost for every subset bitmask."""
    branches = sorted(branch_nodes(tree))
    costs: dict[int, int] = {}
    for mask in range(1 << len(branches)):
        states = {branches[i] for i in range(len(branches)) if mask >> i & 1}
        costs[mask] = _tree_cost_scaled(net, tree, group.destinations, states)
    return branches, costs


def optimal_assignment(
    net: Network,
    trees: Mapping[int, TreeRouting],
    groups: Sequence[MulticastGroup],
    assign_budget: int = 16,
) -> tuple[StateAssignment, Fraction]:
    """Exhaustive minimum-cost state assignment for fixed trees (count capacity)."""
    groups = sorted(groups, key=lambda g: g.id)
    per_tree = [(g, *_subset_costs(net, trees[g.id], g)) for g in groups]
    total_candidates = sum(len(branches) for _, branches, _ in per_tree)
    if total_candidates > assign_budget:
        raise BudgetExceededError(
            f"{total_candidates} branch candidates exceed the assignment budget {assign_budget}"
        )

    rate_scale = common_denominator(g.rate for g in groups) if groups else 1
    cost_scale = net.cost_scale * rate_scale
    best_cost: Optional[int] = None
    best_key = None
    best_masks: Optional[tuple[int, ...]] = None
    usage = [0] * net.num_nodes

    def rec(k: int, running: int, masks: list[int]) -> None:
        nonlocal best_cost, best_key, best_masks
        if k == len(per_tree):
            key = tuple(masks)
            if best_cost is None or running < best_cost or (
                running == best_cost and key < best_key
            ):
                best_cost = running
                best_key = key
                best_masks = tuple(masks)
            return
        g, branches, costs = per_tree[k]
        irate = int(g.rate * rate_scale)
        for mask in range(1 << len(branches)):
            chosen = [branches[i] for i in range(len(branches)) if mask >> i & 1]
            ok = True
            for u in chosen:
                usage[u] += 1
                if usage[u] > net.node_capacity[u]:
                    ok = False
            if ok:
                masks.append(mask)
                rec(k + 1, running + irate * costs[mask], masks)
                masks.pop()
            for u in chosen:
                usage[u] -= 1

    rec(0, 0, [])
    assert best_masks is not None  # the empty assignment is always feasible
    assignment = StateAssignment()
    for (g, branches, _), mask in zip(per_tree, best_masks):
        assignment.for_group(g.id)
        for i, u in enumerate(branches):
            if mask >> i & 1:
                assignment.add(g.id, u)
    return assignment, Fraction(best_cost, cost_scale)


def solve_exact(
    net: Network,
    groups: Sequence[MulticastGroup],
    mode: str = MODE_NODE,
    *,
    node_budget: int = 10,
    assign_budget: int = 16,
) -> Solution:
    """Optimal solution by exhaustive search; ties by lexicographic edge set."""
    if mode not in (MODE_NODE, MODE_NODE_LINK):
        raise ContractViolation(f"unsupported exact mode {mode!r}")
    groups = sorted(groups, key=lambda g: g.id)
    for g in groups:
        g.validate(net)
    candidates: list[list[TreeRouting]] = []
    for g in groups:
        trees = enumerate_trees(net, g, node_budget)
        if not trees:
            raise InfeasibleInstanceError(
                f"group {g.id}: no arborescence spans its destinations", group_id=g.id
            )
        candidates.append(trees)

    rate_scale = common_denominator(g.rate for g in groups) if groups else 1
    irates = [int(g.rate * rate_scale) for g in groups]
    link_mode = mode == MODE_NODE_LINK
    finite_caps = {
        (e.tail, e.head): e.capacity * rate_scale
        for e in net.edges
        if e.capacity is not None
    }

    # Per candidate tree: branch list, subset costs, and (lazily) eps maps.
    meta: list[list[dict]] = []
    for g, trees in zip(groups, candidates):
        entries = []
        for tree in trees:
            branches, costs = _subset_costs(net, tree, g)
            entries.append(
                {
                    "tree": tree,
                    "branches": branches,
                    "costs": costs,
                    "edges": tree.edges(),
                    "eps": {},
                }
            )
        meta.append(entries)

    def eps_for(entry: dict, g: MulticastGroup, mask: int) -> dict[tuple[int, int], int]:
        cached = entry["eps"].get(mask)
        if cached is None:
            branches = entry["branches"]
            states = {branches[i] for i in range(len(branches)) if mask >> i & 1}
            cached = edge_transmissions(entry["tree"], g.destinations, states)
            entry["eps"][mask] = cached
        return cached

    best: Optional[tuple[int, tuple, tuple[int, ...], tuple[dict, ...]]] = None

    def consider(cost: int, combo: tuple[dict, ...], masks: tuple[int, ...]) -> None:
        nonlocal best
        key = (
            cost,
            tuple(tuple(entry["edges"]) for entry in combo),
            masks,
        )
        if best is None or key < best[:3]:
            best = (*key, combo)

    for combo in product(*meta):
        # Weak link screen: every tree edge carries at least one copy.
        if link_mode:
            weak: dict[tuple[int, int], int] = {}
            ok = True
            for irate, entry in zip(irates, combo):
                for edge in entry["edges"]:
                    weak[edge] = weak.get(edge, 0) + irate
                    cap = finite_caps.get(edge)
                    if cap is not None and weak[edge] > cap:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue

        contention = False
        usage: dict[int, int] = {}
        for entry in combo:
            for u in entry["branches"]:
                usage[u] = usage.get(u, 0) + 1
                if usage[u] > net.node_capacity[u]:
                    contention = True
        if not contention:
            # Full assignment is optimal and, per-edge, eps == 1 is minimal.
            full_masks = tuple((1 << len(entry["branches"])) - 1 for entry in combo)
            cost = sum(
                irate * entry["costs"][mask]
                for irate, entry, mask in zip(irates, combo, full_masks)
            )
            consider(cost, combo, full_masks)
            continue

        branch_lists = [entry["branches"] for entry in combo]

        def rec(k: int, running: int, masks: list[int], node_use: dict[int, int]) -> None:
            if k == len(combo):
                if link_mode:
                    flow: dict[tuple[int, int], int] = {}
                    for irate, entry, g, mask in zip(irates, combo, groups, masks):
                        for edge, count in eps_for(entry, g, mask).items():
                            flow[edge] = flow.get(edge, 0) + irate * count
                    for edge, value in flow.items():
                        cap = finite_caps.get(edge)
                        if cap is not None and value > cap:
                            return
                consider(running, combo, tuple(masks))
                return
            entry = combo[k]
            branches = branch_lists[k]
            for mask in range(1 << len(branches)):
                chosen = [branches[i] for i in range(len(branches)) if mask >> i & 1]
                ok = True
                for u in chosen:
                    node_use[u] = node_use.get(u, 0) + 1
                    if node_use[u] > net.node_capacity[u]:
                        ok = False
                if ok:
                    masks.append(mask)
                    rec(k + 1, running + irates[k] * entry["costs"][mask], masks, node_use)
                    masks.pop()
                for u in chosen:
                    node_use[u] -= 1

        total_branches = sum(len(b) for b in branch_lists)
        if total_branches > assign_budget:
            raise BudgetExceededError(
                f"{total_branches} branch candidates exceed the assignment budget {assign_budget}"
            )
        rec(0, 0, [], {})

    if best is None:
        raise InfeasibleInstanceError("no feasible tree/assignment combination exists")

    _, _, masks, combo = best
    trees = {g.id: entry["tree"].clone() for g, entry in zip(groups, combo)}
    assignment = StateAssignment()
    for g, entry, mask in zip(groups, combo, masks):
        assignment.for_group(g.id)
        for i, u in enumerate(entry["branches"]):
            if mask >> i & 1:
                assignment.add(g.id, u)
    return Solution.build(net, groups, trees, assignment, mode)


# ---------------------------------------------------------------------------
# Integer-program text export (LP format)
# ---------------------------------------------------------------------------


def export_ip(net: Network, groups: Sequence[MulticastGroup]) -> str:
    """Emit the integer program as LP-format text.

    Variables: pi_i_d_u_v (binary path indicators), eps_i_u_v (integer copy
    counts) and beta_i_u (binary state indicators), all over node indices.
    The objective is scaled by a positive integer (noted in the header) so
    every coefficient is integral; capacity rows are scaled per row.
    """
    groups = sorted(groups, key=lambda g: g.id)
    for g in groups:
        g.validate(net)
    rate_scale = common_denominator(g.rate for g in groups) if groups else 1
    obj_scale = net.cost_scale * rate_scale

    lines: list[str] = []
    lines.append("\\ multicast traffic engineering integer program")
    lines.append(f"\\ nodes={net.num_nodes} edges={net.num_edges} groups={len(groups)}")
    lines.append(f"\\ objective_scale: {obj_scale} (divide the optimum by this)")
    lines.append("\\ node index -> label: " + ", ".join(
        f"{i}={lab}" for i, lab in enumerate(net.labels)
    ))
    lines.append("Minimize")
    terms = []
    for g in groups:
        irate = int(g.rate * rate_scale)
        for e in net.edges:
            coeff = irate * net.icost[net.edge_index[(e.tail, e.head)]]
            if coeff:
                terms.append(f"{coeff} eps_{g.id}_{e.tail}_{e.head}")
    lines.append(" obj: " + (" + ".join(terms) if terms else "0"))
    lines.append("Subject To")

    def pi(g: MulticastGroup, d: int, u: int, v: int) -> str:
        return f"pi_{g.id}_{d}_{u}_{v}"

    # C1: unit net outgoing path flow at the source, per destination.
    lines.append("\\ C1: net source outflow equals one per destination")
    for g in groups:
        s = g.source
        for d in sorted(g.destinations):
            pos = [pi(g, d, s, v) for v in net.out_neighbors(s)]
            neg = [pi(g, d, v, s) for v in net.in_neighbors(s)]
            expr = " + ".join(pos) if pos else "0"
            for t in neg:
                expr += f" - {t}"
            lines.append(f" C1_{g.id}_{d}: {expr} = 1")

    # C2: unit net incoming path flow at each destination.
    lines.append("\\ C2: net destination inflow equals one")
    for g in groups:
        for d in sorted(g.destinations):
            pos = [pi(g, d, u, d) for u in net.in_neighbors(d)]
            neg = [pi(g, d, d, u) for u in net.out_neighbors(d)]
            expr = " + ".join(pos) if pos else "0"
            for t in neg:
                expr += f" - {t}"
            lines.append(f" C2_{g.id}_{d}: {expr} = 1")

    # C3: path-flow conservation at every other node.
    lines.append("\\ C3: path flow conservation at relay nodes")
    for g in groups:
        for d in sorted(g.destinations):
            for u in range(net.num_nodes):
                if u == d or u == g.source:
                    continue
                pos = [pi(g, d, v, u) for v in net.in_neighbors(u)]
                neg = [pi(g, d, u, v) for v in net.out_neighbors(u)]
                if not pos and not neg:
                    continue
                expr = " + ".join(pos) if pos else "0"
                for t in neg:
                    expr += f" - {t}"
                lines.append(f" C3_{g.id}_{d}_{u}: {expr} = 0")

    # C4: copies lower-bounded by every path indicator.
    lines.append("\\ C4: copy counts cover chosen paths")
    for g in groups:
        for d in sorted(g.destinations):
            for e in net.edges:
                lines.append(
                    f" C4_{g.id}_{d}_{e.tail}_{e.head}: "
                    f"{pi(g, d, e.tail, e.head)} - eps_{g.id}_{e.tail}_{e.head} <= 0"
                )

    # C5: stateless nodes forward the sum of their outgoing demands.
    lines.append("\\ C5: stateless relays conserve copy counts (big-M disabled by state)")
    for g in groups:
        big_m = len(g.destinations) ** 2
        for u in range(net.num_nodes):
            if u == g.source:
                continue
            outs = [f"eps_{g.id}_{u}_{v}" for v in net.out_neighbors(u)]
            ins = [f"eps_{g.id}_{v}_{u}" for v in net.in_neighbors(u)]
            if not outs:
                continue
            expr = f"-{big_m} beta_{g.id}_{u}"
            for t in outs:
                expr += f" + {t}"
            for t in ins:
                expr += f" - {t}"
            lines.append(f" C5_{g.id}_{u}: {expr} <= 0")

    # C6: node state capacity.
    lines.append("\\ C6: node state capacity")
    for u in range(net.num_nodes):
        terms_u = [f"beta_{g.id}_{u}" for g in groups]
        lines.append(f" C6_{u}: " + " + ".join(terms_u) + f" <= {net.node_capacity[u]}")

    # C7: link capacity (finite capacities only; rows scaled to integers).
    lines.append("\\ C7: link capacity (unbounded edges omitted)")
    for e in net.edges:
        if e.capacity is None:
            continue
        cap = e.capacity * rate_scale
        row_scale = cap.denominator
        parts = []
        for g in groups:
            irate = int(g.rate * rate_scale) * row_scale
            parts.append(f"{irate} eps_{g.id}_{e.tail}_{e.head}")
        lines.append(
            f" C7_{e.tail}_{e.head}: " + " + ".join(parts) + f" <= {cap.numerator}"
        )

    lines.append("Bounds")
    lines.append("\\ eps are nonnegative integers (default lower bound 0)")
    lines.append("Generals")
    for g in groups:
        for e in net.edges:
            lines.append(f" eps_{g.id}_{e.tail}_{e.head}")
    lines.append("Binaries")
    for g in groups:
        for d in sorted(g.destinations):
            for e in net.edges:
                lines.append(f" {pi(g, d, e.tail, e.head)}")
        for u in range(net.num_nodes):
            if u != g.source:
                lines.append(f" beta_{g.id}_{u}")
    lines.append("End")
    return "\n".join(lines) + "\n"
