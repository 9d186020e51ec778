"""
Partitioned solver with the halo exchange running through the network simulator.

Each partition is one simulated node. Per step every partition sends the
elements its neighbors read, then receives and copies each neighbor's
halo out of the receive buffer in receive-list order. With PL scheduling
sends are streamed and issued one by one from the fabric; with host
scheduling one kernel invocation carries all sends and one all receives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, InvariantViolation
from ..mesh import Mesh, Method, Partitioning, partition, partition_stats
from ..netsim import CommandDescriptor, CommandHandle, Op, Simulator, to_seconds
from ..perfmodel import Path, Scheduling, TransferMode
from ..presets import Cluster
from .solver import ElementState, LocalProblem, SolverConfig, advance_local, check_cfl, check_state
from .timing import PipelineConfig, StepTiming, partition_timing

HALO_DTYPE = np.dtype([("id", "<i8"), ("h", "<f8"), ("hu", "<f8"), ("hv", "<f8")])
HALO_TAG = 0


class HaloMismatchError(InvariantViolation):
    def __init__(self, step: int, part: int, neighbor: int, detail: str):
        self.step, self.part, self.neighbor = step, part, neighbor
        super().__init__(f"halo mismatch at step {step}, partition {part}, neighbor {neighbor}: {detail}")


@dataclass(frozen=True)
class HaloFault:
    """Corrupt one halo message on its way into the receiving partition.

    ``reorder`` reverses the records, ``truncate`` drops the last one.
    """

    step: int
    part: int
    neighbor: int
    kind: str = "reorder"

    def __post_init__(self) -> None:
        if self.kind not in ("reorder", "truncate"):
            raise ConfigurationError(f"unknown fault kind {self.kind!r}")

    def apply(self, records: np.ndarray) -> np.ndarray:
        return records[::-1].copy() if self.kind == "reorder" else records[:-1].copy()


def configure_halo_buffers(sim: Simulator, p: Partitioning, tag: int = HALO_TAG) -> None:
    for q in range(p.k):
        for src in p.recv[q]:
            sim.configure_rx_buffer(q, src, tag)


def post_halo_exchange(
    sim: Simulator,
    p: Partitioning,
    mode: TransferMode,
    bytes_per_element: int,
    payloads: dict[tuple[int, int], bytes] | None = None,
    tag: int = HALO_TAG,
    receive: bool = True,
) -> dict[tuple[int, int], CommandHandle]:
    """Post one step's sends and receives; returns receive handles keyed (receiver, sender).

    ``payloads[(sender, receiver)]`` carries real bytes when given. With
    ``receive=False`` no receive commands are posted and the data lands in
    the consumer streams in arrival order.
    """
    path = mode.path
    recvs: dict[tuple[int, int], CommandHandle] = {}
    for node in range(p.k):
        sends = [
            CommandDescriptor(Op.SEND, q, tag, len(ids) * bytes_per_element, path, mode.scheduling,
                              None if payloads is None else payloads[(node, q)])
            for q, ids in p.send[node].items()
        ]
        receives = [
            CommandDescriptor(Op.RECV, src, tag, len(ids) * bytes_per_element, Path.BUFFERED,
                              mode.scheduling)
            for src, ids in p.recv[node].items()
        ] if receive else []
        if mode.scheduling is Scheduling.HOST:
            if sends:
                sim.post_batch(node, sends, Scheduling.HOST)
            if receives:
                handles = sim.post_batch(node, receives, Scheduling.HOST)
                recvs.update(((node, d.peer), h) for d, h in zip(receives, handles))
        else:
            for d in sends:
                sim.post_command(node, d)
            for d in receives:
                recvs[(node, d.peer)] = sim.post_command(node, d)
    return recvs


def exchange_latencies(sim: Simulator, p: Partitioning, recvs: dict, start: int) -> list[float]:
    """Seconds from ``start`` until each partition holds its whole halo."""
    done = [start] * p.k
    for (node, _), h in recvs.items():
        done[node] = max(done[node], h.completed_at)
    return [to_seconds(t - start) for t in done]


def stream_latencies(sim: Simulator, p: Partitioning, start: int, first_record: list[int]) -> list[float]:
    done = [start] * p.k
    for node in range(p.k):
        for r in sim.streams[node][first_record[node]:]:
            done[node] = max(done[node], r.time)
    return [to_seconds(t - start) for t in done]


def pack_halo(state: ElementState, local_index: np.ndarray, ids: np.ndarray) -> np.ndarray:
    rec = np.empty(len(ids), dtype=HALO_DTYPE)
    li = local_index[ids]
    rec["id"] = ids
    rec["h"], rec["hu"], rec["hv"] = state.h[li], state.hu[li], state.hv[li]
    return rec


class DistributedSolver:
    """Advance all partitions step by step, exchanging halos through ``sim``.

    ``streamed_recv`` skips the receive commands: each partition reads its
    consumer stream in arrival order and assigns the bytes to its receive
    lists in neighbor order. Messages from different neighbors interleave,
    so this mode exists to show the ordering hazard, not to compute.
    """

    def __init__(
        self,
        mesh: Mesh,
        p: Partitioning,
        state: ElementState,
        cfg: SolverConfig,
        cluster: Cluster,
        pipe: PipelineConfig | None = None,
        streamed_recv: bool = False,
        verify_ids: bool = True,
        fault: HaloFault | None = None,
        trace: bool = False,
    ):
        if len(state) != mesh.n_elements:
            raise ConfigurationError(f"state has {len(state)} elements, mesh has {mesh.n_elements}")
        check_cfl(mesh, state, cfg)
        self.mesh, self.p, self.cfg, self.cluster = mesh, p, cfg, cluster
        self.mode = TransferMode(Path.STREAMED, cluster.mode.scheduling) if streamed_recv else cluster.mode
        self.pipe = pipe or PipelineConfig(cluster.clock_hz)
        self.streamed_recv = streamed_recv
        self.verify_ids = verify_ids
        self.fault = fault
        self.step_count = 0
        self.problems = [LocalProblem.build(mesh, p.elements(q)) for q in range(p.k)]
        self.local_index = np.full(mesh.n_elements, -1, dtype=np.int64)
        for lp in self.problems:
            self.local_index[lp.owned] = np.arange(len(lp.owned))
        self.states = [state.take(lp.owned) for lp in self.problems]
        self.stats, _ = partition_stats(p, mesh, HALO_DTYPE.itemsize, self.pipe.d_ext)
        self.sim = cluster.simulator(p.k, trace=trace)
        if not streamed_recv:
            configure_halo_buffers(self.sim, p)

    @property
    def time(self) -> float:
        return self.step_count * self.cfg.dt

    def _exchange(self) -> tuple[list[dict[int, np.ndarray]], list[float]]:
        p, sim = self.p, self.sim
        payloads = {
            (q, dst): pack_halo(self.states[q], self.local_index, ids).tobytes()
            for q in range(p.k) for dst, ids in p.send[q].items()
        }
        start = sim.now
        first = [len(sim.streams[n]) for n in range(p.k)]
        recvs = post_halo_exchange(sim, p, self.mode, HALO_DTYPE.itemsize, payloads,
                                   receive=not self.streamed_recv)
        sim.run_until()
        received: list[dict[int, np.ndarray]] = [dict() for _ in range(p.k)]
        if self.streamed_recv:
            latencies = stream_latencies(sim, p, start, first)
            for q in range(p.k):
                data = b"".join(r.data for r in sim.streams[q][first[q]:])
                offset = 0
                for src, ids in p.recv[q].items():
                    n = len(ids) * HALO_DTYPE.itemsize
                    received[q][src] = np.frombuffer(data[offset:offset + n], dtype=HALO_DTYPE)
                    offset += n
        else:
            latencies = exchange_latencies(sim, p, recvs, start)
            for (q, src), h in recvs.items():
                received[q][src] = np.frombuffer(h.payload, dtype=HALO_DTYPE)
        return received, latencies

    def _unpack(self, q: int, received: dict[int, np.ndarray]) -> ElementState:
        lp, own = self.problems[q], self.states[q]
        n_halo = len(lp.halo)
        halo = ElementState(np.empty(n_halo), np.empty(n_halo), np.empty(n_halo))
        pos = {int(e): i for i, e in enumerate(lp.halo)} if n_halo else {}
        for src, expected in self.p.recv[q].items():
            rec = received[src]
            f = self.fault
            if f is not None and (f.step, f.part, f.neighbor) == (self.step_count, q, src):
                rec = f.apply(rec)
            if len(rec) != len(expected):
                raise HaloMismatchError(self.step_count, q, src,
                                        f"expected {len(expected)} elements, got {len(rec)}")
            if self.verify_ids and not np.array_equal(rec["id"], expected):
                bad = int(np.nonzero(rec["id"] != expected)[0][0])
                raise HaloMismatchError(self.step_count, q, src,
                                        f"record {bad} carries element {int(rec['id'][bad])}, "
                                        f"expected {int(expected[bad])}")
            idx = np.fromiter((pos[int(e)] for e in expected), dtype=np.int64, count=len(expected))
            halo.h[idx], halo.hu[idx], halo.hv[idx] = rec["h"], rec["hu"], rec["hv"]
        return ElementState(np.concatenate([own.h, halo.h]), np.concatenate([own.hu, halo.hu]),
                            np.concatenate([own.hv, halo.hv]))

    def step(self) -> tuple[StepTiming, ...]:
        """Advance one step; returns the pipeline timing of every partition."""
        received, latencies = self._exchange()
        t = self.time
        new_states = []
        for q, lp in enumerate(self.problems):
            local = self._unpack(q, received[q])
            new_states.append(advance_local(lp, local, t, self.cfg))
        self.states = new_states
        self.step_count += 1
        for q, s in enumerate(self.states):
            check_state(s, f" in partition {q} after step {self.step_count}")
        return tuple(
            partition_timing(st, self.pipe, (st.e_send + st.e_recv) / self.pipe.f + lat)
            for st, lat in zip(self.stats, latencies)
        )

    def run(self, steps: int) -> list[tuple[StepTiming, ...]]:
        return [self.step() for _ in range(steps)]

    def gather(self) -> ElementState:
        n = self.mesh.n_elements
        out = ElementState(np.empty(n), np.empty(n), np.empty(n))
        for lp, s in zip(self.problems, self.states):
            out.h[lp.owned], out.hu[lp.owned], out.hv[lp.owned] = s.h, s.hu, s.hv
        return out


def step_distributed(solver: DistributedSolver) -> tuple[list[ElementState], tuple[StepTiming, ...]]:
    """One distributed step; returns the new per-partition states and their timings."""
    timings = solver.step()
    return solver.states, timings


def run_distributed(
    mesh: Mesh,
    k: int,
    state: ElementState,
    cfg: SolverConfig,
    steps: int,
    cluster: Cluster,
    method: Method = Method.COORDINATE_BISECTION,
) -> tuple[ElementState, list[tuple[StepTiming, ...]]]:
    solver = DistributedSolver(mesh, partition(mesh, k, method), state, cfg, cluster)
    timings = solver.run(steps)
    return solver.gather(), timings
