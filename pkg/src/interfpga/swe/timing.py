"""
Per-step pipeline timing of one FPGA.

The compute pipeline streams one element per cycle. Core elements (plus a
fixed external delay) run while the halo is in flight; border elements
need the halo, so a late halo stalls the pipeline. Send and receive
elements are drained through the pipeline and every step pays the
pipeline fill latency once.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import fmean
from typing import Sequence

from ..errors import ConfigurationError
from ..mesh import PartitionStats, WorstCase
from ..perfmodel import (
    AppModelParams,
    LinkParams,
    MemoryParams,
    Scheduling,
    SchedulingParams,
    comm_latency_model,
    link_latency,
)

# Placeholders: the designs' pipeline depth, external delay and per-element
# arithmetic are not published. The stall and scaling results hold for any
# d_ext in [0, 1000] and l_pipe in [20, 500] cycles; flop_per_element cancels
# out of every efficiency and stall ratio.
DEFAULT_L_PIPE = 100.0
DEFAULT_D_EXT = 200.0
DEFAULT_FLOP_PER_ELEMENT = 350.0


@dataclass(frozen=True)
class PipelineConfig:
    f: float
    l_pipe: float = DEFAULT_L_PIPE
    d_ext: float = DEFAULT_D_EXT
    flop_per_element: float = DEFAULT_FLOP_PER_ELEMENT
    elements_per_cycle: int = 1

    def __post_init__(self) -> None:
        if not self.f > 0:
            raise ConfigurationError("pipeline clock f must be positive")
        if self.l_pipe < 0 or self.d_ext < 0 or self.flop_per_element < 0:
            raise ConfigurationError("l_pipe, d_ext and flop_per_element must be non-negative")
        if self.elements_per_cycle != 1:
            raise ConfigurationError("the pipeline processes exactly one element per cycle")


@dataclass(frozen=True)
class StepTiming:
    """Cycle breakdown of one partition for one time step."""

    part: int
    compute_cycles: float   # core elements plus external delay: the slack
    arrival_cycles: float   # halo arrival after step start
    stall_cycles: float
    drain_cycles: float     # send and receive elements
    fill_cycles: float
    total_cycles: float

    @property
    def stall_fraction(self) -> float:
        return self.stall_cycles / self.total_cycles


def partition_timing(stats: PartitionStats, pipe: PipelineConfig, l_comm: float) -> StepTiming:
    """Timing of one partition when its halo arrives ``l_comm`` seconds into the step."""
    slack = stats.e_core + pipe.d_ext
    arrival = l_comm * pipe.f
    drain = stats.e_send + stats.e_recv
    return StepTiming(
        part=stats.part,
        compute_cycles=slack,
        arrival_cycles=arrival,
        stall_cycles=max(0.0, arrival - slack),
        drain_cycles=drain,
        fill_cycles=pipe.l_pipe,
        total_cycles=max(slack, arrival) + drain + pipe.l_pipe,
    )


def simulate_timing(
    stats: Sequence[PartitionStats],
    pipe: PipelineConfig,
    l_comm: Sequence[Sequence[float]],
) -> list[tuple[StepTiming, ...]]:
    """Timings for a series of steps; ``l_comm[step][part]`` is in seconds."""
    series = []
    for step, row in enumerate(l_comm):
        if len(row) != len(stats):
            raise ConfigurationError(f"step {step}: {len(row)} latencies for {len(stats)} partitions")
        series.append(tuple(partition_timing(s, pipe, lc) for s, lc in zip(stats, row)))
    return series


@dataclass(frozen=True)
class TimingSummary:
    step_cycles: float      # mean over steps of the slowest partition
    flops: float
    stall_fraction: float   # of the slowest partition, mean over steps
    l_comm: float           # largest per-partition communication latency, mean over steps


def summarize(series: list[tuple[StepTiming, ...]], pipe: PipelineConfig, e_total: int) -> TimingSummary:
    """Bulk-synchronous view: every step lasts as long as its slowest partition."""
    if not series:
        raise ConfigurationError("no steps to summarize")
    critical = [max(step, key=lambda t: (t.total_cycles, -t.part)) for step in series]
    cycles = fmean(t.total_cycles for t in critical)
    return TimingSummary(
        step_cycles=cycles,
        flops=pipe.f * pipe.flop_per_element * e_total / cycles,
        stall_fraction=fmean(t.stall_fraction for t in critical),
        l_comm=fmean(max(t.arrival_cycles for t in step) / pipe.f for step in series),
    )


def model_params(
    worst: WorstCase,
    pipe: PipelineConfig,
    e_total: int,
    link: LinkParams,
) -> AppModelParams:
    """Throughput-model inputs for the worst partition of a partitioning.

    Uses the smallest core, the largest send and receive counts, the largest
    neighbor count, and the one-way latency of the largest halo message.
    """
    return AppModelParams(
        f=pipe.f,
        flop_per_element=pipe.flop_per_element,
        e_total=e_total,
        e_core=worst.e_core_min,
        d_ext=pipe.d_ext,
        e_send=worst.e_send_max,
        e_recv=worst.e_recv_max,
        l_pipe=pipe.l_pipe,
        n_max=worst.n_max,
        l_pingping=link_latency(worst.halo_bytes_max, link) if worst.n_max else 0.0,
    )


def model_comm_latency(
    params: AppModelParams,
    worst: WorstCase,
    sched: SchedulingParams,
    mem: MemoryParams,
    scheduling: Scheduling,
) -> float:
    """Communication latency of the halo exchange as the closed-form model sees it.

    Host-scheduled exchanges issue one invocation for all sends and one for
    all receives.
    """
    return comm_latency_model(params, sched, mem, worst.halo_bytes_max, scheduling,
                              batched=scheduling is Scheduling.HOST)
