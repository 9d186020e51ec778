"""
Closed-form latency and throughput models.

All times are seconds, sizes are bytes, bandwidths are bytes/second, and
pipeline quantities (element counts, D_ext, L_pipe) are clock cycles.
Every function here is pure; the simulator in :mod:`interfpga.netsim` is
validated against these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Path(Enum):
    """Where message data lives on the endpoints."""

    BUFFERED = "buffered"
    STREAMED = "streamed"


class Scheduling(Enum):
    """Who issues communication commands to the offload engine."""

    HOST = "host"
    PL = "pl"


@dataclass(frozen=True)
class TransferMode:
    path: Path
    scheduling: Scheduling

    @classmethod
    def parse(cls, text: str) -> "TransferMode":
        """Parse ``"buffered-host"``, ``"streamed/pl"`` and similar spellings."""
        parts = text.replace("/", "-").replace("_", "-").lower().split("-")
        if len(parts) != 2:
            raise ValueError(f"transfer mode must look like 'streamed-pl', got {text!r}")
        return cls(Path(parts[0]), Scheduling(parts[1]))

    def __str__(self) -> str:
        return f"{self.path.value}-{self.scheduling.value}"


ALL_MODES = tuple(TransferMode(p, s) for p in Path for s in Scheduling)


@dataclass(frozen=True)
class LinkParams:
    raw_bandwidth: float          # bytes/s on the wire
    base_latency: float           # s, fixed PHY + cable + stack latency
    switch_hops: int = 0
    per_hop_latency: float = 1e-6
    frame_overhead: int = 66      # bytes added per packet
    mtu_payload: int = 1472       # payload bytes per packet

    def __post_init__(self) -> None:
        if self.raw_bandwidth <= 0:
            raise ValueError("raw_bandwidth must be positive")
        if self.mtu_payload <= 0:
            raise ValueError("mtu_payload must be positive")
        if self.frame_overhead < 0:
            raise ValueError("frame_overhead must be non-negative")
        if self.switch_hops < 0:
            raise ValueError("switch_hops must be non-negative")
        if self.base_latency < 0 or self.per_hop_latency < 0:
            raise ValueError("latencies must be non-negative")

    @property
    def propagation(self) -> float:
        """Size-independent one-way latency."""
        return self.base_latency + self.switch_hops * self.per_hop_latency

    @property
    def goodput(self) -> float:
        """Payload rate of back-to-back full frames."""
        return self.raw_bandwidth * self.mtu_payload / (self.mtu_payload + self.frame_overhead)


@dataclass(frozen=True)
class SchedulingParams:
    host_invoke_latency: float = 30e-6
    pl_command_latency: float = 0.3e-6

    def __post_init__(self) -> None:
        if not self.host_invoke_latency >= self.pl_command_latency >= 0:
            raise ValueError("need host_invoke_latency >= pl_command_latency >= 0")

    def command_latency(self, scheduling: Scheduling) -> float:
        if scheduling is Scheduling.HOST:
            return self.host_invoke_latency
        return self.pl_command_latency


@dataclass(frozen=True)
class MemoryParams:
    mem_bandwidth: float = 14e9
    copy_setup_latency: float = 1.5e-6

    def __post_init__(self) -> None:
        if self.mem_bandwidth <= 0:
            raise ValueError("mem_bandwidth must be positive")
        if self.copy_setup_latency < 0:
            raise ValueError("copy_setup_latency must be non-negative")


@dataclass(frozen=True)
class AppModelParams:
    """Inputs of the application throughput model for one partition view.

    ``d_ext`` and ``l_pipe`` are cycle counts. ``l_pingping`` is the one-way
    ping-ping latency of the largest halo message in seconds.
    """

    f: float
    flop_per_element: float
    e_total: int
    e_core: int
    d_ext: float
    e_send: int
    e_recv: int
    l_pipe: float
    n_max: int
    l_pingping: float

    def __post_init__(self) -> None:
        if self.f <= 0:
            raise ValueError("f must be positive")
        for name in ("flop_per_element", "e_total", "e_core", "d_ext", "e_send",
                     "e_recv", "l_pipe", "n_max", "l_pingping"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def flop_total(self) -> float:
        return self.flop_per_element * self.e_total


def frame_count(message_size: int, mtu_payload: int) -> int:
    """Packets needed for a message; an empty message still takes one frame."""
    return max(1, -(-message_size // mtu_payload))


def wire_bytes(message_size: int, link: LinkParams) -> int:
    return message_size + frame_count(message_size, link.mtu_payload) * link.frame_overhead


def link_latency(message_size: int, link: LinkParams) -> float:
    """One-way latency of the communication link for a whole message."""
    if message_size < 0:
        raise ValueError("message_size must be non-negative")
    return link.propagation + wire_bytes(message_size, link) / link.raw_bandwidth


def copy_latency(message_size: int, mem: MemoryParams) -> float:
    """Global-memory copy from the receive buffer to the destination."""
    if message_size < 0:
        raise ValueError("message_size must be non-negative")
    return mem.copy_setup_latency + message_size / mem.mem_bandwidth


def transfer_latency(
    message_size: int,
    mode: TransferMode,
    link: LinkParams,
    sched: SchedulingParams,
    mem: MemoryParams,
) -> float:
    """End-to-end latency of one message.

    Buffered transfers pay two command issues (send, then receive), the link,
    and a copy out of the receive buffer. Streamed transfers pay a single
    command issue and the link.
    """
    l_k = sched.command_latency(mode.scheduling)
    l_c = link_latency(message_size, link)
    if mode.path is Path.BUFFERED:
        return 2 * l_k + copy_latency(message_size, mem) + l_c
    return l_k + l_c


def buffered_peak_throughput(mem_bw: float, link_bw: float) -> float:
    """Large-message rate when every byte crosses the link and then memory."""
    if mem_bw <= 0 or link_bw <= 0:
        raise ValueError("bandwidths must be positive")
    return 1.0 / (1.0 / mem_bw + 1.0 / link_bw)


def windowed_throughput_cap(window_bytes: float, rtt: float, link_goodput: float) -> float:
    if window_bytes <= 0 or rtt <= 0:
        raise ValueError("window_bytes and rtt must be positive")
    if math.isinf(window_bytes):
        return link_goodput
    return min(link_goodput, window_bytes / rtt)


def windowed_wire_time(message_size: int, window_bytes: float, rtt: float, link: LinkParams) -> float:
    """Serialization time of a message under a sliding window.

    When one window takes longer than ``rtt`` to serialize, acks return
    before it is exhausted and the window never stalls. Otherwise every full
    window costs one round trip and the remainder goes out at line rate.
    """
    full = wire_bytes(message_size, link) / link.raw_bandwidth
    if math.isinf(window_bytes) or wire_bytes(int(window_bytes), link) / link.raw_bandwidth >= rtt:
        return full
    rounds = max(0, -(-message_size // int(window_bytes)) - 1)
    rest = message_size - rounds * int(window_bytes)
    return rounds * rtt + wire_bytes(rest, link) / link.raw_bandwidth


def comm_latency_model(
    p: AppModelParams,
    sched: SchedulingParams,
    mem: MemoryParams,
    halo_bytes: int,
    scheduling: Scheduling = Scheduling.PL,
    batched: bool = False,
) -> float:
    """Per-step halo-exchange latency for the worst partition.

    Element streaming is counted in cycles and divided by ``f``; command
    issue (``l_k``) and receive-buffer copies (``l_m``) are times. Every
    neighbor costs one send and one receive command unless ``batched``, in
    which case one invocation carries all sends and one all receives.
    ``halo_bytes`` is the per-neighbor message size charged to each copy.
    """
    l_k = sched.command_latency(scheduling)
    issues = 2 if batched and p.n_max > 0 else 2 * p.n_max
    stream = (p.e_send + p.e_recv) / p.f
    return stream + issues * l_k + p.n_max * copy_latency(halo_bytes, mem) + p.l_pingping


def _denominator(p: AppModelParams, l_comm: float) -> float:
    return max(p.e_core + p.d_ext, l_comm * p.f) + p.e_send + p.e_recv + p.l_pipe


def step_cycles(p: AppModelParams, l_comm: float) -> float:
    """Cycles per time step (the throughput model's denominator)."""
    return _denominator(p, l_comm)


def app_throughput_model(p: AppModelParams, l_comm: float) -> float:
    """Application FLOP/s when the halo must arrive within the core-element slack."""
    return p.f * p.flop_total / _denominator(p, l_comm)


def stall_fraction(p: AppModelParams, l_comm: float) -> float:
    return max(0.0, l_comm * p.f - (p.e_core + p.d_ext)) / _denominator(p, l_comm)
