"""
Named cluster configurations.

Comments next to the constants record what each value is calibrated
against. Values without a measurement behind them (PL command latency,
copy setup, and the pipeline constants in :mod:`interfpga.swe.timing`) are
placeholders and are labelled as such.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ConfigurationError
from .netsim import Simulator, TransportConfig, TransportKind
from .perfmodel import (
    LinkParams,
    MemoryParams,
    Path,
    Scheduling,
    SchedulingParams,
    TransferMode,
)

# 100 Gbit/s QSFP28 links
LINK_BANDWIDTH = 12.5e9
# direct optical connection, one way
DIRECT_LATENCY = 2.0e-6
# added by the packet switch
SWITCH_HOP_LATENCY = 1.0e-6

STD_MSS = 1448
TCP_OVERHEAD = 78
JUMBO_MSS = 8960
# 36 full segments; window/RTT on the switched path is ~8.5 GB/s
TCP_WINDOW = 36 * STD_MSS


@dataclass(frozen=True)
class Cluster:
    name: str
    link: LinkParams
    sched: SchedulingParams
    mem: MemoryParams
    transport: TransportConfig
    mode: TransferMode
    clock_hz: float
    notes: str = ""

    @property
    def model_link(self) -> LinkParams:
        return self.transport.model_link(self.link)

    def with_mode(self, mode: TransferMode) -> "Cluster":
        return replace(self, mode=mode)

    def simulator(self, n_nodes: int, trace: bool = False) -> Simulator:
        return Simulator(n_nodes, self.link, self.sched, self.mem, self.transport, trace=trace)


_SCHED = SchedulingParams(host_invoke_latency=30e-6, pl_command_latency=0.3e-6)
# receive-buffer read: 14 GB/s global memory; the 1.5 us setup (command plus DMA
# start) is a placeholder that puts the strong-scaling stall onset of a 108k-element
# mesh near 22 partitions while 6500-element partitions stay stall-free
_MEM = MemoryParams(mem_bandwidth=14e9, copy_setup_latency=1.5e-6)
_UDP = TransportConfig(TransportKind.DATAGRAM, mtu_payload=1472, frame_overhead=66)
_DIRECT = LinkParams(LINK_BANDWIDTH, DIRECT_LATENCY, 0, SWITCH_HOP_LATENCY, 66, 1472)
_SWITCHED = replace(_DIRECT, switch_hops=1)
_STREAMED_PL = TransferMode(Path.STREAMED, Scheduling.PL)
_BUFFERED_HOST = TransferMode(Path.BUFFERED, Scheduling.HOST)


PRESETS: dict[str, Cluster] = {
    "direct-udp-pl": Cluster(
        "direct-udp-pl", _DIRECT, _SCHED, _MEM, _UDP, _STREAMED_PL, 274e6,
        "UDP on dedicated point-to-point links, commands issued from PL, 274 MHz kernel clock.",
    ),
    "switch-udp-pl": Cluster(
        "switch-udp-pl", _SWITCHED, _SCHED, _MEM, _UDP, _STREAMED_PL, 274e6,
        "UDP through one switch hop (1 us per hop).",
    ),
    "switch-tcp-pl": Cluster(
        "switch-tcp-pl",
        replace(_SWITCHED, mtu_payload=STD_MSS, frame_overhead=TCP_OVERHEAD),
        _SCHED, _MEM,
        TransportConfig(TransportKind.WINDOWED, mtu_payload=1472, frame_overhead=TCP_OVERHEAD,
                        window_bytes=TCP_WINDOW, window_scaling=1, mss=STD_MSS),
        _STREAMED_PL, 252e6,
        "TCP through one switch hop, standard MSS, no window scaling, 252 MHz kernel clock.",
    ),
    "switch-tcp-pl-optimized": Cluster(
        "switch-tcp-pl-optimized",
        replace(_SWITCHED, mtu_payload=JUMBO_MSS, frame_overhead=TCP_OVERHEAD),
        _SCHED, _MEM,
        TransportConfig(TransportKind.WINDOWED, mtu_payload=JUMBO_MSS, frame_overhead=TCP_OVERHEAD,
                        window_bytes=TCP_WINDOW, window_scaling=16, mss=JUMBO_MSS),
        _STREAMED_PL, 252e6,
        "TCP through one switch hop with jumbo frames (MSS 8960) and window scaling x16.",
    ),
    "buffered-host": Cluster(
        "buffered-host", _DIRECT, _SCHED, _MEM, _UDP, _BUFFERED_HOST, 274e6,
        "Buffered transfers through global memory, every command a 30 us host invocation.",
    ),
    "mpi-pcie-baseline": Cluster(
        "mpi-pcie-baseline",
        LinkParams(10e9, 54e-6, 0, SWITCH_HOP_LATENCY, 66, 1472),
        _SCHED, _MEM, _UDP, _BUFFERED_HOST, 256e6,
        "Host-side MPI: buffered host-issued transfers over a 10 GB/s path with 54 us "
        "of PCIe and MPI latency, 256 MHz kernel clock.",
    ),
}


def get_preset(name: str) -> Cluster:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ConfigurationError(f"unknown preset {name!r}; known presets: {known}") from None
