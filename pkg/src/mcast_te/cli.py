"""Command-line client.

Every data-path command builds the same validated request models the HTTP
service uses and runs the service handler in-process; pass --server to send
the request to a running instance instead. The sweep benchmark always runs
locally: it times the solver directly and shuttling thousands of exact
solutions through HTTP would only distort the measurement.

Exit codes: 0 success, 1 usage or input error, 2 infeasible instance,
3 verification failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .bench import SweepConfig, rows_to_csv, run_sweep
from .exceptions import InfeasibleInstanceError, JoinRejectedError, McastTeError
from .serialize import dumps_pretty
from .service import handlers
from .service import models as m

_REMOTE_PATHS = {
    handlers.solve_handler: "/solve",
    handlers.verify_handler: "/verify",
    handlers.membership_handler: "/membership",
    handlers.random_instance_handler: "/instances/random",
    handlers.calibrate_handler: "/instances/calibrate",
    handlers.gadget_handler: "/instances/gadget",
    handlers.export_ip_handler: "/export-ip",
}

_RESPONSE_TYPES = {
    "/solve": m.SolveResponse,
    "/verify": m.VerifyResponse,
    "/membership": m.MembershipResponse,
    "/instances/random": m.InstanceModel,
    "/instances/calibrate": m.InstanceModel,
    "/instances/gadget": m.InstanceModel,
    "/export-ip": m.ExportIpResponse,
}


class _VerifyFailed(Exception):
    pass


def _call(ctx, handler, request):
    server = ctx.obj.get("server")
    if not server:
        return handler(request)
    import httpx

    path = _REMOTE_PATHS[handler]
    resp = httpx.post(
        server.rstrip("/") + path,
        json=request.model_dump(mode="json"),
        timeout=None,
    )
    if resp.status_code >= 400:
        detail = resp.json().get("detail", resp.text) if resp.headers.get(
            "content-type", ""
        ).startswith("application/json") else resp.text
        if resp.status_code == 409:
            raise InfeasibleInstanceError(detail)
        raise McastTeError(detail)
    return _RESPONSE_TYPES[path].model_validate(resp.json())


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise click.UsageError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise McastTeError(f"{path}: invalid JSON ({exc})") from exc


def _write(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


@click.group()
@click.option("--server", envvar="MCAST_TE_SERVER", default=None,
              help="Base URL of a running service; default runs in-process.")
@click.pass_context
def cli(ctx, server):
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@cli.command()
@click.argument("instance", type=click.Path())
@click.option("--algorithm", "-a", default="mtrsa",
              type=click.Choice(["mtrsa", "spt", "st", "exact"]))
@click.option("--mode", default="node", type=click.Choice(["node", "node-link"]))
@click.option("--seed", default=0, type=int)
@click.option("--node-budget", default=10, type=int, help="Exact-search node budget.")
@click.option("--assign-budget", default=16, type=int)
@click.option("--output", "-o", default=None, type=click.Path())
@click.pass_context
def solve(ctx, instance, algorithm, mode, seed, node_budget, assign_budget, output):
    """Solve an instance file and write the solution."""
    req = m.SolveRequest(
        instance=m.InstanceModel.model_validate(_load_json(instance)),
        algorithm=algorithm, mode=mode, seed=seed,
        node_budget=node_budget, assign_budget=assign_budget,
    )
    resp = _call(ctx, handlers.solve_handler, req)
    _write(dumps_pretty(resp.solution.model_dump()), output)
    click.echo(resp.summary, err=True)


@cli.command()
@click.argument("solution", type=click.Path())
@click.argument("instance", type=click.Path())
@click.option("--mode", default=None, type=click.Choice(["node", "node-link", "node-weak-link"]),
              help="Override the solution file's verification mode.")
@click.pass_context
def verify(ctx, solution, instance, mode):
    """Re-verify a solution file against its instance (exit 3 on failure)."""
    req = m.VerifyRequest(
        instance=m.InstanceModel.model_validate(_load_json(instance)),
        solution=m.SolutionModel.model_validate(_load_json(solution)),
        mode=mode,
    )
    resp = _call(ctx, handlers.verify_handler, req)
    click.echo(resp.detail)
    for v in resp.feasibility.node_violations:
        click.echo(f"node violation: {v.node} uses {v.used} > {v.capacity}")
    for v in resp.feasibility.edge_violations:
        click.echo(f"edge violation: {v.tail}->{v.head} flow {v.flow} > {v.capacity}")
    for s in resp.feasibility.structural:
        click.echo(f"structural: {s}")
    if not resp.ok:
        raise _VerifyFailed(resp.detail)


@cli.command()
@click.argument("instance", type=click.Path())
@click.argument("solution", type=click.Path())
@click.argument("events", type=click.Path())
@click.option("--output", "-o", default=None, type=click.Path(),
              help="Write the final solution here; snapshots go to stdout summaries.")
@click.option("--snapshots", default=None, type=click.Path(),
              help="Directory for per-event solution snapshots.")
@click.pass_context
def membership(ctx, instance, solution, events, output, snapshots):
    """Apply join/leave events in order, emitting a snapshot after each."""
    events_data = _load_json(events)
    req = m.MembershipRequest(
        instance=m.InstanceModel.model_validate(_load_json(instance)),
        solution=m.SolutionModel.model_validate(_load_json(solution)),
        events=[m.MembershipEvent.model_validate(e) for e in events_data],
    )
    resp = _call(ctx, handlers.membership_handler, req)
    for i, step in enumerate(resp.steps):
        note = f" ({step.warning})" if step.warning else ""
        click.echo(
            f"{step.event.op} group={step.event.group} node={step.event.node}: "
            f"cost={step.total_cost}{note}"
        )
        if snapshots:
            path = Path(snapshots) / f"solution_{i:03d}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(dumps_pretty(step.solution.model_dump()))
    if resp.steps and output:
        _write(dumps_pretty(resp.steps[-1].solution.model_dump()), output)
    elif not resp.steps:
        _write(dumps_pretty(req.solution.model_dump()), output)


@cli.command()
@click.argument("config", type=click.Path())
@click.option("--output", "-o", default=None, type=click.Path())
def sweep(config, output):
    """Run a seeded parameter sweep and emit CSV (always in-process)."""
    cfg = SweepConfig.from_dict(_load_json(config))
    rows = run_sweep(cfg, log=lambda msg: click.echo(msg, err=True))
    _write(rows_to_csv(rows), output)


@cli.group()
def gen():
    """Instance generators."""


@gen.command("random")
@click.option("--topology", default="columbus")
@click.option("--instance", "instance_path", default=None, type=click.Path(),
              help="Use this instance file's network instead of a bundled topology.")
@click.option("--trees", "-t", required=True, type=int)
@click.option("--destinations", "-d", required=True, type=int)
@click.option("--node-capacity", default=0, type=int)
@click.option("--rate", default="1")
@click.option("--seed", default=0, type=int)
@click.option("--output", "-o", default=None, type=click.Path())
@click.pass_context
def gen_random(ctx, topology, instance_path, trees, destinations, node_capacity, rate, seed, output):
    req = m.RandomInstanceRequest(
        topology=None if instance_path else topology,
        instance=m.InstanceModel.model_validate(_load_json(instance_path))
        if instance_path else None,
        trees=trees, destinations=destinations,
        node_capacity=node_capacity, rate=rate, seed=seed,
    )
    resp = _call(ctx, handlers.random_instance_handler, req)
    _write(dumps_pretty(resp.model_dump()), output)


@gen.command("node-gadget")
@click.argument("dimacs", type=click.Path())
@click.option("--replication", default=1, type=int)
@click.option("--output", "-o", default=None, type=click.Path())
@click.pass_context
def gen_node_gadget(ctx, dimacs, replication, output):
    req = m.GadgetRequest(kind="node", dimacs=Path(dimacs).read_text(),
                          replication=replication)
    resp = _call(ctx, handlers.gadget_handler, req)
    _write(dumps_pretty(resp.model_dump()), output)


@gen.command("link-gadget")
@click.argument("dimacs", type=click.Path())
@click.option("--gap", default="10")
@click.option("--output", "-o", default=None, type=click.Path())
@click.pass_context
def gen_link_gadget(ctx, dimacs, gap, output):
    req = m.GadgetRequest(kind="link", dimacs=Path(dimacs).read_text(), gap=gap)
    resp = _call(ctx, handlers.gadget_handler, req)
    _write(dumps_pretty(resp.model_dump()), output)


@gen.command("showcase")
@click.option("--output", "-o", default=None, type=click.Path())
def gen_showcase(output):
    resp = handlers.showcase_handler()
    _write(dumps_pretty(resp.model_dump()), output)


@cli.command()
@click.argument("instance", type=click.Path())
@click.option("--algorithm", default="spt", type=click.Choice(["spt", "st"]))
@click.option("--output", "-o", default=None, type=click.Path())
@click.pass_context
def calibrate(ctx, instance, algorithm, output):
    """Set edge capacities so the reference solution peaks at 100%."""
    req = m.CalibrateRequest(
        instance=m.InstanceModel.model_validate(_load_json(instance)),
        algorithm=algorithm,
    )
    resp = _call(ctx, handlers.calibrate_handler, req)
    _write(dumps_pretty(resp.model_dump()), output)


@cli.command("export-ip")
@click.argument("instance", type=click.Path())
@click.option("--output", "-o", default=None, type=click.Path())
@click.pass_context
def export_ip_cmd(ctx, instance, output):
    """Emit the integer program for the instance as LP-format text."""
    req = m.ExportIpRequest(instance=m.InstanceModel.model_validate(_load_json(instance)))
    resp = _call(ctx, handlers.export_ip_handler, req)
    _write(resp.lp, output)


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
        return 0
    except click.exceptions.Exit as exc:
        return 0 if exc.exit_code == 0 else 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except _VerifyFailed:
        return 3
    except (InfeasibleInstanceError, JoinRejectedError) as exc:
        click.echo(f"infeasible: {exc}", err=True)
        return 2
    except McastTeError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
