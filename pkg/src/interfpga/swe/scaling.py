"""Weak and strong scaling sweeps of the shallow-water pipeline."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path as FsPath
from typing import Callable, Sequence

from ..errors import ConfigurationError
from ..mesh import DEFAULT_BYTES_PER_ELEMENT, Mesh, Method, generate_rect_mesh, partition, partition_stats
from ..perfmodel import app_throughput_model, stall_fraction
from ..presets import Cluster
from .distributed import configure_halo_buffers, exchange_latencies, post_halo_exchange
from .solver import ElementState
from .timing import PipelineConfig, model_comm_latency, model_params, simulate_timing, summarize

WEAK_ELEMENTS_PER_PARTITION = 6500
STRONG_ELEMENTS = 108_000

SCALING_COLUMNS = [
    "k", "n_max", "sim_flops", "model_flops", "efficiency", "stall_fraction",
    "n_elements", "model_stall_fraction", "l_comm_sim_s", "l_comm_model_s",
]


class ScalingKind(Enum):
    WEAK = "weak"
    STRONG = "strong"


@dataclass(frozen=True)
class ScalingRow:
    k: int
    n_max: int
    sim_flops: float
    model_flops: float
    efficiency: float
    stall_fraction: float
    n_elements: int
    model_stall_fraction: float
    l_comm_sim: float
    l_comm_model: float


def rect_dims(n_elements: int) -> tuple[int, int]:
    """Near-square grid whose two-triangle cells give about ``n_elements`` elements."""
    cells = n_elements / 2
    ny = max(1, round(math.sqrt(cells)))
    return max(1, round(cells / ny)), ny


def weak_mesh(k: int, per_partition: int = WEAK_ELEMENTS_PER_PARTITION) -> Mesh:
    return generate_rect_mesh(*rect_dims(k * per_partition))


def strong_mesh(n_elements: int = STRONG_ELEMENTS) -> Mesh:
    return generate_rect_mesh(*rect_dims(n_elements))


@dataclass(frozen=True)
class PointResult:
    """Simulated and modelled throughput of one partitioned mesh."""

    k: int
    n_elements: int
    n_max: int
    sim_flops: float
    model_flops: float
    stall_fraction: float
    model_stall_fraction: float
    l_comm_sim: float
    l_comm_model: float


def evaluate_point(
    mesh: Mesh,
    k: int,
    cluster: Cluster,
    pipe: PipelineConfig,
    method: Method = Method.COORDINATE_BISECTION,
    steps: int = 2,
    bytes_per_element: int = DEFAULT_BYTES_PER_ELEMENT,
) -> PointResult:
    """Partition, simulate ``steps`` halo exchanges, and evaluate the pipeline timing."""
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    p = partition(mesh, k, method)
    stats, worst = partition_stats(p, mesh, bytes_per_element, pipe.d_ext)
    sim = cluster.simulator(k)
    configure_halo_buffers(sim, p)
    l_comm = []
    for _ in range(steps):
        start = sim.now
        recvs = post_halo_exchange(sim, p, cluster.mode, bytes_per_element)
        sim.run_until()
        exchange = exchange_latencies(sim, p, recvs, start)
        l_comm.append([(s.e_send + s.e_recv) / pipe.f + x if s.n_neighbors else 0.0
                       for s, x in zip(stats, exchange)])
    summary = summarize(simulate_timing(stats, pipe, l_comm), pipe, mesh.n_elements)
    params = model_params(worst, pipe, mesh.n_elements, cluster.model_link)
    lc_model = model_comm_latency(params, worst, cluster.sched, cluster.mem, cluster.mode.scheduling)
    return PointResult(
        k=k,
        n_elements=mesh.n_elements,
        n_max=worst.n_max,
        sim_flops=summary.flops,
        model_flops=app_throughput_model(params, lc_model),
        stall_fraction=summary.stall_fraction,
        model_stall_fraction=stall_fraction(params, lc_model),
        l_comm_sim=summary.l_comm,
        l_comm_model=lc_model,
    )


def run_scaling_experiment(
    kind: ScalingKind,
    ks: Sequence[int],
    cluster: Cluster,
    pipe: PipelineConfig | None = None,
    mesh_for: Callable[[int], Mesh] | None = None,
    method: Method = Method.COORDINATE_BISECTION,
    steps: int = 2,
    bytes_per_element: int = DEFAULT_BYTES_PER_ELEMENT,
) -> list[ScalingRow]:
    """Sweep ``ks``; efficiency is relative to a single partition.

    ``mesh_for(k)`` supplies the mesh for each k. The default grows the mesh
    with k for weak scaling and fixes it for strong scaling. The k=1 point
    is always evaluated as the efficiency reference.
    """
    if not ks or any(k < 1 for k in ks):
        raise ConfigurationError("k list must be non-empty with every k >= 1")
    pipe = pipe or PipelineConfig(cluster.clock_hz)
    if mesh_for is None:
        if kind is ScalingKind.WEAK:
            mesh_for = weak_mesh
        else:
            fixed = strong_mesh()
            mesh_for = lambda k: fixed  # noqa: E731
    results = {}
    for k in sorted(set(ks) | {1}):
        results[k] = evaluate_point(mesh_for(k), k, cluster, pipe, method, steps, bytes_per_element)
    base = results[1].sim_flops
    rows = []
    for k in ks:
        r = results[k]
        rows.append(ScalingRow(
            k=k,
            n_max=r.n_max,
            sim_flops=r.sim_flops,
            model_flops=r.model_flops,
            efficiency=r.sim_flops / (k * base),
            stall_fraction=r.stall_fraction,
            n_elements=r.n_elements,
            model_stall_fraction=r.model_stall_fraction,
            l_comm_sim=r.l_comm_sim,
            l_comm_model=r.l_comm_model,
        ))
    return rows


def write_scaling_csv(rows: Sequence[ScalingRow], path: str | FsPath) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCALING_COLUMNS)
        for r in rows:
            w.writerow([r.k, r.n_max, repr(r.sim_flops), repr(r.model_flops), repr(r.efficiency),
                        repr(r.stall_fraction), r.n_elements, repr(r.model_stall_fraction),
                        repr(r.l_comm_sim), repr(r.l_comm_model)])


def write_snapshot_csv(state: ElementState, path: str | FsPath, ids=None) -> None:
    """Element id, h, hu, hv per row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["element", "h", "hu", "hv"])
        ids = range(len(state)) if ids is None else ids
        for i, h, hu, hv in zip(ids, state.h.tolist(), state.hu.tolist(), state.hv.tolist()):
            w.writerow([int(i), repr(h), repr(hu), repr(hv)])
