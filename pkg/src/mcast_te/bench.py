"""Benchmark harness: seeded parameter sweeps over trees/destinations/node
capacity with per-sample timing, reproducing the simulation protocol
(averaged samples, identical instance streams across algorithms)."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Sequence

from .baselines import solve_spt, solve_steiner
from .exact import solve_exact
from .exceptions import InstanceError, McastTeError
from .generators import calibrate_capacity, load_topology, random_instance
from .graph import Network, load_graphml
from .rational import format_rational
from .solver import SolverConfig, solve
from .trees import MODE_NODE

CSV_COLUMNS = (
    "topology",
    "t",
    "dest",
    "cap",
    "algo",
    "seed_base",
    "mean_cost",
    "std_cost",
    "mean_ms",
    "samples",
)

ALGORITHMS = ("mtrsa", "spt", "st", "exact")

WORKERS_ENV = "MCAST_TE_WORKERS"


@dataclass
class SweepConfig:
    topology: str
    trees: list[int]
    destinations: list[int]
    node_capacity: list[int]
    algorithms: list[str]
    samples: int = 1
    seed_base: int = 0
    mode: str = MODE_NODE
    calibrate: bool = False
    topology_path: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SweepConfig":
        def as_list(key, default=None):
            v = data.get(key, default)
            if v is None:
                raise InstanceError(f"sweep config missing {key!r}")
            return list(v) if isinstance(v, (list, tuple)) else [v]

        algos = as_list("algorithms", ["mtrsa"])
        for a in algos:
            if a not in ALGORITHMS:
                raise InstanceError(f"unknown algorithm {a!r}")
        return cls(
            topology=data.get("topology", "columbus"),
            topology_path=data.get("topology_path"),
            trees=[int(x) for x in as_list("trees")],
            destinations=[int(x) for x in as_list("destinations")],
            node_capacity=[int(x) for x in as_list("node_capacity")],
            algorithms=algos,
            samples=int(data.get("samples", 1)),
            seed_base=int(data.get("seed_base", 0)),
            mode=data.get("mode", MODE_NODE),
            calibrate=bool(data.get("calibrate", False)),
        )

    def load_network(self) -> Network:
        if self.topology_path:
            return load_graphml(Path(self.topology_path).read_bytes())
        return load_topology(self.topology)


def run_algorithm(
    algo: str, net: Network, groups, seed: int, mode: str = MODE_NODE
) -> tuple[Fraction, float]:
    """Solve and time one sample; wall time covers the solve call only."""
    start = time.perf_counter()
    if algo == "mtrsa":
        sol = solve(net, groups, SolverConfig(mode=mode, seed=seed))
    elif algo == "spt":
        sol = solve_spt(net, groups, seed=seed)
    elif algo == "st":
        sol = solve_steiner(net, groups, seed=seed)
    elif algo == "exact":
        sol = solve_exact(net, groups, mode)
    else:
        raise InstanceError(f"unknown algorithm {algo!r}")
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    return sol.total_cost, elapsed_ms


def _one_sample(args) -> tuple[int, Optional[tuple[Fraction, float]], Optional[str]]:
    (net, t, dest, cap, algo, seed, mode, calibrate, index) = args
    try:
        inst = random_instance(net, t, dest, seed=seed, node_capacity=cap)
        sample_net = inst.network
        if calibrate:
            sample_net = calibrate_capacity(sample_net, inst.groups)
        cost, ms = run_algorithm(algo, sample_net, inst.groups, seed, mode)
        return index, (cost, ms), None
    except McastTeError as exc:
        return index, None, f"{type(exc).__name__}: {exc}"


def _aggregate(costs: list[Fraction], times: list[float]) -> tuple[str, str, str]:
    if not costs:
        return ("", "", "")
    mean = sum(costs, Fraction(0)) / len(costs)
    var = sum((c - mean) ** 2 for c in costs) / len(costs)
    std = math.sqrt(float(var))
    mean_ms = sum(times) / len(times)
    return (format_rational(mean), f"{std:.6g}", f"{mean_ms:.3f}")


def run_sweep(config: SweepConfig, *, log=None) -> list[dict[str, str]]:
    """One row per (t, dest, cap, algorithm); deterministic given the seeds
    (the timing column excepted). Per-sample seeds are seed_base + index and
    the instance stream is identical for every algorithm at a sample index."""
    net = config.load_network()
    workers = int(os.environ.get(WORKERS_ENV, "1") or "1")
    rows: list[dict[str, str]] = []
    for t in config.trees:
        for dest in config.destinations:
            for cap in config.node_capacity:
                per_algo: dict[str, tuple[list[Fraction], list[float], int]] = {}
                for algo in config.algorithms:
                    jobs = [
                        (net, t, dest, cap, algo, config.seed_base + i,
                         config.mode, config.calibrate, i)
                        for i in range(config.samples)
                    ]
                    results: list = [None] * len(jobs)
                    if workers > 1:
                        with ProcessPoolExecutor(max_workers=workers) as pool:
                            for index, payload, error in pool.map(_one_sample, jobs):
                                results[index] = (payload, error)
                    else:
                        for job in jobs:
                            index, payload, error = _one_sample(job)
                            results[index] = (payload, error)
                    costs: list[Fraction] = []
                    times: list[float] = []
                    failures = 0
                    for payload, error in results:
                        if error is not None:
                            failures += 1
                            if log:
                                log(f"sample failed ({algo}, t={t}, dest={dest}): {error}")
                            continue
                        cost, ms = payload
                        costs.append(cost)
                        times.append(ms)
                    per_algo[algo] = (costs, times, failures)
                for algo in config.algorithms:
                    costs, times, failures = per_algo[algo]
                    mean_cost, std_cost, mean_ms = _aggregate(costs, times)
                    rows.append(
                        {
                            "topology": config.topology,
                            "t": str(t),
                            "dest": str(dest),
                            "cap": str(cap),
                            "algo": algo,
                            "seed_base": str(config.seed_base),
                            "mean_cost": mean_cost,
                            "std_cost": std_cost,
                            "mean_ms": mean_ms,
                            "samples": str(len(costs)),
                        }
                    )
    return rows


def rows_to_csv(rows: Sequence[dict[str, str]]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(row[col] for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"
