"""
Effective-bandwidth ring benchmark.

Nodes form a virtual ring. A round has two phases: every node sends to its
right neighbour while receiving from its left, then the other way round.
Both directions of a link are busy at once (ping-ping). The latency of a
message size is the mean phase duration over all repetitions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath
from statistics import fmean

from .errors import ConfigurationError
from .netsim import CommandDescriptor, Op, TransportConfig, to_seconds
from .perfmodel import (
    Path,
    TransferMode,
    buffered_peak_throughput,
    transfer_latency,
    windowed_throughput_cap,
    windowed_wire_time,
    wire_bytes,
)
from .presets import Cluster

DEFAULT_SIZES = tuple(2**i for i in range(6, 23))  # 64 B .. 4 MiB

BEFF_COLUMNS = ["size_bytes", "latency_s", "throughput_Bps", "model_latency_s", "rel_error"]
MODEL_ERROR_COLUMNS = [
    "size_bytes", "sim_latency_s", "model_latency_s", "abs_error_s", "rel_error", "within_tolerance",
]

# agreement bands between simulation and closed-form model
REL_TOLERANCE = 0.05
ABS_TOLERANCE_S = 0.5e-6
SMALL_MESSAGE = 1024


@dataclass(frozen=True)
class BeffConfig:
    node_count: int = 2
    message_sizes: tuple[int, ...] = DEFAULT_SIZES
    repetitions: int = 10
    mode: TransferMode | None = None          # None: the cluster's default mode
    transport: TransportConfig | None = None  # None: the cluster's transport

    def __post_init__(self) -> None:
        if self.node_count < 2:
            raise ConfigurationError(f"b_eff needs at least 2 nodes, got {self.node_count}")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")
        if not self.message_sizes:
            raise ConfigurationError("message_sizes must not be empty")
        sizes = list(self.message_sizes)
        if any(s < 0 for s in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigurationError("message_sizes must be non-negative and strictly increasing")


@dataclass(frozen=True)
class BeffRow:
    size: int
    latency: float           # mean phase duration, s
    throughput: float        # one direction of one link, bytes/s
    aggregate: float         # all bytes moved by all nodes per second
    model_latency: float
    events: int

    @property
    def abs_error(self) -> float:
        return self.latency - self.model_latency

    @property
    def rel_error(self) -> float:
        return self.abs_error / self.model_latency

    @property
    def within_tolerance(self) -> bool:
        if self.size < SMALL_MESSAGE:
            return abs(self.abs_error) <= ABS_TOLERANCE_S
        return abs(self.rel_error) <= REL_TOLERANCE


@dataclass(frozen=True)
class BeffResult:
    cluster: str
    mode: TransferMode
    node_count: int
    rows: tuple[BeffRow, ...] = field(default_factory=tuple)

    @property
    def b_eff(self) -> float:
        return beff_aggregate([r.throughput for r in self.rows])

    def row(self, size: int) -> BeffRow:
        for r in self.rows:
            if r.size == size:
                return r
        raise KeyError(size)


def beff_aggregate(throughputs: list[float]) -> float:
    """Arithmetic mean of the per-size throughputs."""
    if not throughputs:
        raise ValueError("cannot aggregate an empty throughput table")
    return fmean(throughputs)


def model_latency(size: int, cluster: Cluster, mode: TransferMode) -> float:
    """Closed-form latency, including the window cap of windowed transports."""
    link = cluster.model_link
    latency = transfer_latency(size, mode, link, cluster.sched, cluster.mem)
    transport = cluster.transport
    if transport.windowed:
        windowed = windowed_wire_time(
            size, transport.effective_window, transport.round_trip(cluster.link), link)
        latency += windowed - wire_bytes(size, link) / link.raw_bandwidth
    return latency


def goodput_bound(cluster: Cluster, mode: TransferMode) -> float:
    """Large-message ceiling: link goodput, window cap, and the buffered copy."""
    link = cluster.model_link
    bound = link.goodput
    transport = cluster.transport
    if transport.windowed:
        bound = windowed_throughput_cap(
            transport.effective_window, transport.round_trip(cluster.link), bound)
    if mode.path is Path.BUFFERED:
        bound = buffered_peak_throughput(cluster.mem.mem_bandwidth, bound)
    return bound


def _run_phase(sim, nodes: int, size: int, mode: TransferMode, shift: int, tag: int) -> int:
    start = sim.now
    waits = []
    for n in range(nodes):
        dst = (n + shift) % nodes
        src = (n - shift) % nodes
        send = sim.post_command(n, CommandDescriptor(Op.SEND, dst, tag, size, mode.path, mode.scheduling))
        if mode.path is Path.BUFFERED:
            waits.append(sim.post_command(
                n, CommandDescriptor(Op.RECV, src, tag, size, Path.BUFFERED, mode.scheduling)))
        else:
            waits.append(send)
    sim.run_until()
    return max(h.completed_at for h in waits) - start


def run_size(cfg: BeffConfig, cluster: Cluster, size: int, trace: bool = False):
    """Run all repetitions for one message size; returns (row, simulator)."""
    mode = cfg.mode or cluster.mode
    if cfg.transport is not None:
        cluster = replace(cluster, transport=cfg.transport)
    n = cfg.node_count
    sim = cluster.simulator(n, trace=trace)
    if mode.path is Path.BUFFERED:
        for node in range(n):
            sim.configure_rx_buffer(node, (node - 1) % n, 0)
            sim.configure_rx_buffer(node, (node + 1) % n, 1)
    durations = []
    for _ in range(cfg.repetitions):
        durations.append(_run_phase(sim, n, size, mode, +1, 0))
        durations.append(_run_phase(sim, n, size, mode, -1, 1))
    latency = to_seconds(sum(durations)) / len(durations)
    row = BeffRow(
        size=size,
        latency=latency,
        throughput=size / latency,
        aggregate=n * size / latency,
        model_latency=model_latency(size, cluster, mode),
        events=sim.stats().events,
    )
    return row, sim


def run_beff(cfg: BeffConfig, cluster: Cluster) -> BeffResult:
    rows = tuple(run_size(cfg, cluster, size)[0] for size in cfg.message_sizes)
    return BeffResult(cluster.name, cfg.mode or cluster.mode, cfg.node_count, rows)


def write_beff_csv(result: BeffResult, path: FsPath) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BEFF_COLUMNS)
        for r in result.rows:
            w.writerow([r.size, repr(r.latency), repr(r.throughput), repr(r.model_latency),
                        repr(r.rel_error)])


def write_model_error_csv(result: BeffResult, path: FsPath) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MODEL_ERROR_COLUMNS)
        for r in result.rows:
            w.writerow([r.size, repr(r.latency), repr(r.model_latency), repr(r.abs_error),
                        repr(r.rel_error), int(r.within_tolerance)])
