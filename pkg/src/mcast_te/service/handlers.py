"""Service handlers: the single implementation behind both the HTTP
endpoints and the CLI's in-process mode."""

from __future__ import annotations

import time

from .. import generators
from ..exact import export_ip
from ..exceptions import InstanceError
from ..graph import Instance
from ..serialize import instance_from_dict, instance_to_dict, solution_from_dict, solution_to_dict
from ..rational import format_rational
from ..solver import SolverConfig, member_join, member_leave
from ..trees import Solution
from . import models


def _instance(model: models.InstanceModel) -> Instance:
    return instance_from_dict(model.model_dump())


def _instance_model(instance: Instance) -> models.InstanceModel:
    return models.InstanceModel.model_validate(instance_to_dict(instance))


def _solution_model(net, solution: Solution) -> models.SolutionModel:
    return models.SolutionModel.model_validate(solution_to_dict(net, solution))


def solve_handler(req: models.SolveRequest) -> models.SolveResponse:
    net, groups = _instance(req.instance)
    start = time.perf_counter()
    if req.algorithm == "exact":
        from ..exact import solve_exact

        sol = solve_exact(
            net, groups, req.mode,
            node_budget=req.node_budget, assign_budget=req.assign_budget,
        )
    else:
        sol = _resolve(req.algorithm, net, groups, req.seed, req.mode)
    wall_ms = (time.perf_counter() - start) * 1000.0
    summary = (
        f"algorithm={req.algorithm} cost={format_rational(sol.total_cost)} "
        f"{sol.report.summary()} wall_ms={wall_ms:.1f}"
    )
    return models.SolveResponse(
        solution=_solution_model(net, sol), wall_ms=wall_ms, summary=summary
    )


def _resolve(algorithm: str, net, groups, seed: int, mode: str) -> Solution:
    from ..baselines import solve_spt, solve_steiner
    from ..solver import solve

    if algorithm == "mtrsa":
        return solve(net, groups, SolverConfig(mode=mode, seed=seed))
    if algorithm == "spt":
        return solve_spt(net, groups, seed=seed)
    if algorithm == "st":
        return solve_steiner(net, groups, seed=seed)
    raise InstanceError(f"unknown algorithm {algorithm!r}")


def verify_handler(req: models.VerifyRequest) -> models.VerifyResponse:
    net, _ = _instance(req.instance)
    data = req.solution.model_dump()
    if req.mode is not None:
        data["mode"] = req.mode
    solution, claimed = solution_from_dict(net, data)
    cost_matches = solution.total_cost == claimed
    ok = cost_matches and solution.report.feasible
    if not cost_matches:
        detail = (
            f"cost mismatch: claimed {format_rational(claimed)}, "
            f"recomputed {format_rational(solution.total_cost)}"
        )
    elif not solution.report.feasible:
        detail = solution.report.summary()
    else:
        detail = "ok"
    payload = solution_to_dict(net, solution)
    return models.VerifyResponse(
        ok=ok,
        cost_matches=cost_matches,
        claimed_cost=format_rational(claimed),
        recomputed_cost=format_rational(solution.total_cost),
        feasibility=models.FeasibilityModel.model_validate(payload["feasibility"]),
        detail=detail,
    )


def membership_handler(req: models.MembershipRequest) -> models.MembershipResponse:
    net, _ = _instance(req.instance)
    solution, _claimed = solution_from_dict(net, req.solution.model_dump())
    steps: list[models.MembershipStep] = []
    for event in req.events:
        if event.node not in net.index:
            raise InstanceError(f"unknown node {event.node!r}")
        node = net.index[event.node]
        if event.op == "join":
            result = member_join(net, solution, event.group, node)
        else:
            result = member_leave(net, solution, event.group, node)
        solution = result.solution
        steps.append(
            models.MembershipStep(
                event=event,
                changed=result.changed,
                warning=result.warning,
                total_cost=format_rational(solution.total_cost),
                solution=_solution_model(net, solution),
            )
        )
    return models.MembershipResponse(steps=steps)


def random_instance_handler(req: models.RandomInstanceRequest) -> models.InstanceModel:
    if (req.topology is None) == (req.instance is None):
        raise InstanceError("provide exactly one of 'topology' or 'instance'")
    if req.topology is not None:
        net = generators.load_topology(req.topology)
    else:
        net, _ = _instance(req.instance)
    inst = generators.random_instance(
        net,
        req.trees,
        req.destinations,
        seed=req.seed,
        rates=req.rate,
        node_capacity=req.node_capacity,
    )
    return _instance_model(inst)


def calibrate_handler(req: models.CalibrateRequest) -> models.InstanceModel:
    net, groups = _instance(req.instance)
    calibrated = generators.calibrate_capacity(net, groups, algorithm=req.algorithm)
    return _instance_model(Instance(calibrated, groups))


def gadget_handler(req: models.GadgetRequest) -> models.InstanceModel:
    clauses = generators.parse_dimacs(req.dimacs)
    if req.kind == "node":
        inst = generators.cnf_node_gadget(clauses, req.replication)
    else:
        inst = generators.cnf_link_gadget(clauses, req.gap)
    return _instance_model(inst)


def showcase_handler() -> models.InstanceModel:
    return _instance_model(generators.showcase_instance())


def export_ip_handler(req: models.ExportIpRequest) -> models.ExportIpResponse:
    net, groups = _instance(req.instance)
    return models.ExportIpResponse(lp=export_ip(net, groups))
