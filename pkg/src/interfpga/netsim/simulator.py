"""
Discrete-event model of FPGA nodes, links, an optional switch and the
per-node communication offload engine (CCLO).

Each node owns two command issuers, one for host-scheduled and one for
PL-scheduled commands. An issuer hands one invocation at a time to the
CCLO; the invocation becomes visible after the origin's command latency.
Buffered sends and all receives block their issuer until they complete,
streamed sends release it as soon as they are visible.

Data moves as segments over full-duplex links. With ``switch_hops == 0``
every ordered node pair has a dedicated link; otherwise each node has one
uplink into a non-blocking switch and the switch egress port towards a node
is shared by all senders. Incoming messages land in a receive (spill)
buffer if one is configured for their (source, tag), otherwise they are
forwarded into the node's consumer stream in arrival order.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

from ..errors import ConfigurationError, DeadlockError, InvariantViolation
from ..perfmodel import LinkParams, MemoryParams, Path, Scheduling, SchedulingParams
from .events import EventKind, EventQueue, serialization_ps, to_ps


class TransportKind(Enum):
    DATAGRAM = "datagram"
    WINDOWED = "windowed"


@dataclass(frozen=True)
class TransportConfig:
    kind: TransportKind = TransportKind.DATAGRAM
    mtu_payload: int = 1472
    frame_overhead: int = 66
    window_bytes: int = 65535
    window_scaling: int = 1
    mss: int = 1448
    ack_latency: float | None = None   # None: one-way propagation of the reverse path

    def __post_init__(self) -> None:
        if self.mtu_payload <= 0 or self.frame_overhead < 0:
            raise ConfigurationError("mtu_payload must be positive, frame_overhead non-negative")
        if self.kind is TransportKind.WINDOWED:
            if not 0 < self.mss <= self.mtu_payload:
                raise ConfigurationError("windowed transport needs 0 < mss <= mtu_payload")
            if self.window_bytes <= 0 or self.window_scaling < 1:
                raise ConfigurationError("window_bytes must be positive and window_scaling >= 1")
        if self.ack_latency is not None and self.ack_latency < 0:
            raise ConfigurationError("ack_latency must be non-negative")

    @property
    def windowed(self) -> bool:
        return self.kind is TransportKind.WINDOWED

    @property
    def segment_payload(self) -> int:
        return self.mss if self.windowed else self.mtu_payload

    @property
    def effective_window(self) -> float:
        if not self.windowed:
            return math.inf
        return self.window_bytes * self.window_scaling

    def model_link(self, link: LinkParams) -> LinkParams:
        """The link as the closed-form model should see it under this transport."""
        return replace(link, mtu_payload=self.segment_payload, frame_overhead=self.frame_overhead)

    def round_trip(self, link: LinkParams) -> float:
        """Time from a full segment's first bit leaving to its ack arriving back."""
        ack = link.propagation if self.ack_latency is None else self.ack_latency
        wire = (self.segment_payload + self.frame_overhead) / link.raw_bandwidth
        return wire + link.propagation + ack


class Op(Enum):
    SEND = "send"
    RECV = "recv"


@dataclass(frozen=True)
class CommandDescriptor:
    op: Op
    peer: int
    tag: int
    size: int
    path: Path = Path.BUFFERED
    issue_origin: Scheduling = Scheduling.PL
    payload: bytes | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.size < 0:
            raise ConfigurationError("command size must be non-negative")
        if self.payload is not None and len(self.payload) != self.size:
            raise ConfigurationError(f"payload has {len(self.payload)} bytes, descriptor says {self.size}")
        if self.op is Op.RECV and self.path is Path.STREAMED:
            raise ConfigurationError("streamed data needs no recv command; use a buffered recv")

    @property
    def blocking(self) -> bool:
        return self.op is Op.RECV or self.path is Path.BUFFERED


@dataclass(eq=False)
class CommandHandle:
    id: int
    node: int
    desc: CommandDescriptor
    posted_at: int
    visible_at: int | None = None
    completed_at: int | None = None
    payload: bytes | None = field(default=None, repr=False)

    @property
    def done(self) -> bool:
        return self.completed_at is not None


@dataclass(eq=False)
class _Invocation:
    handles: list[CommandHandle]
    origin: Scheduling
    at: int
    outstanding: int = 0


@dataclass(eq=False)
class _Issuer:
    node: int
    origin: Scheduling
    pending: deque = field(default_factory=deque)
    active: _Invocation | None = None


@dataclass(eq=False)
class _Message:
    id: int
    src: int
    dst: int
    tag: int
    size: int
    path: Path
    payload: bytes | None
    send: CommandHandle
    injected: int = 0
    received: int = 0
    delivered: int = 0
    started: bool = False
    route: Path | None = None
    chunks: list = field(default_factory=list)
    arrived_at: int | None = None


@dataclass(eq=False)
class _Segment:
    msg: _Message
    offset: int
    nbytes: int
    conn: "_Connection"
    wire_ps: int

    @property
    def data(self) -> bytes | None:
        if self.msg.payload is None:
            return None
        return self.msg.payload[self.offset:self.offset + self.nbytes]


@dataclass(eq=False)
class _Connection:
    src: int
    dst: int
    port: "_Port"
    queue: deque = field(default_factory=deque)
    inflight: int = 0
    max_inflight: int = 0
    queued: bool = False
    blocked: bool = False


@dataclass(eq=False)
class _Port:
    name: str
    busy: bool = False
    busy_ps: int = 0
    ready: deque = field(default_factory=deque)


@dataclass
class StreamRecord:
    time: int
    src: int
    tag: int
    message: int
    offset: int
    nbytes: int
    data: bytes | None = field(default=None, repr=False)


@dataclass
class CommandRecord:
    node: int
    op: str
    peer: int
    tag: int
    size: int
    posted_at: int
    visible_at: int | None
    completed_at: int | None


@dataclass
class SimStats:
    end_time: int
    events: int
    bytes_sent: dict[int, int]
    bytes_received: dict[int, int]
    commands: list[CommandRecord]
    port_busy: dict[str, int]
    max_inflight: dict[tuple[int, int], int]
    max_parked_bytes: dict[int, int]


class Simulator:
    """One simulation instance; single-threaded, owns all of its state."""

    def __init__(
        self,
        n_nodes: int,
        link: LinkParams,
        sched: SchedulingParams,
        mem: MemoryParams,
        transport: TransportConfig | None = None,
        trace: bool = False,
    ) -> None:
        if n_nodes < 1:
            raise ConfigurationError("need at least one node")
        self.n_nodes = n_nodes
        self.link = link
        self.sched = sched
        self.mem = mem
        self.transport = transport or TransportConfig()
        self.switched = link.switch_hops > 0
        self.queue = EventQueue()
        self.trace_enabled = trace
        self.trace: list[str] = []

        self._bw = int(round(link.raw_bandwidth))
        self._mem_bw = int(round(mem.mem_bandwidth))
        self._prop_ps = to_ps(link.propagation)
        ack = self.transport.ack_latency
        self._ack_ps = to_ps(link.propagation if ack is None else ack)
        self._copy_setup_ps = to_ps(mem.copy_setup_latency)
        self._origin_ps = {s: to_ps(sched.command_latency(s)) for s in Scheduling}
        self._window = self.transport.effective_window
        self._seg_payload = self.transport.segment_payload

        self._issuers = {(n, o): _Issuer(n, o) for n in range(n_nodes) for o in Scheduling}
        self._handles: list[CommandHandle] = []
        self._messages: list[_Message] = []
        self._ports: dict[object, _Port] = {}
        self._egress_free: dict[int, int] = {}
        self._conns: dict[tuple[int, int], _Connection] = {}
        self._spill_config: dict[int, set] = {n: set() for n in range(n_nodes)}
        self._spill: dict[tuple[int, int, int], deque] = {}
        self._pending_recv: dict[tuple[int, int, int], deque] = {}
        self._mem_free = [0] * n_nodes
        self._stall_windows: dict[int, list[tuple[int, int]]] = {n: [] for n in range(n_nodes)}
        self._parked: dict[int, deque] = {n: deque() for n in range(n_nodes)}
        self._parked_bytes = [0] * n_nodes
        self._max_parked = [0] * n_nodes
        self._drain_pending = [False] * n_nodes
        self.streams: dict[int, list[StreamRecord]] = {n: [] for n in range(n_nodes)}
        self._bytes_sent = [0] * n_nodes
        self._bytes_received = [0] * n_nodes
        self._events = 0

    # -- configuration -----------------------------------------------------

    @property
    def now(self) -> int:
        return self.queue.now

    def _check_node(self, node: int, what: str = "node") -> None:
        if not 0 <= node < self.n_nodes:
            raise ConfigurationError(f"unknown {what} {node} (cluster has {self.n_nodes} nodes)")

    def configure_rx_buffer(self, node: int, source: int, tag: int) -> None:
        """Reserve a receive buffer at ``node`` for messages from ``source`` with ``tag``."""
        self._check_node(node)
        self._check_node(source, "peer")
        self._spill_config[node].add((source, tag))

    def stall_consumer(self, node: int, start: int, end: int) -> None:
        """Hold the consumer kernel of ``node`` in [start, end) picoseconds."""
        self._check_node(node)
        if not 0 <= start < end:
            raise ConfigurationError("stall window must satisfy 0 <= start < end")
        self._stall_windows[node].append((start, end))
        self.queue.schedule(end, node, EventKind.KERNEL_WAKE)

    def post_command(self, node: int, cmd: CommandDescriptor, at: int | None = None) -> CommandHandle:
        return self.post_batch(node, [cmd], cmd.issue_origin, at)[0]

    def post_batch(
        self,
        node: int,
        cmds: Sequence[CommandDescriptor],
        origin: Scheduling,
        at: int | None = None,
    ) -> list[CommandHandle]:
        """Issue several commands through a single invocation."""
        self._check_node(node)
        at = self.now if at is None else at
        if at < self.now:
            raise ConfigurationError(f"cannot post at t={at}ps, simulation is at {self.now}ps")
        handles = []
        for cmd in cmds:
            self._check_node(cmd.peer, "peer")
            if cmd.peer == node:
                raise ConfigurationError(f"node {node} cannot address itself")
            h = CommandHandle(len(self._handles), node, replace(cmd, issue_origin=origin), at)
            self._handles.append(h)
            handles.append(h)
        inv = _Invocation(handles, origin, at)
        issuer = self._issuers[(node, origin)]
        issuer.pending.append(inv)
        if issuer.active is None:
            self._start_next(issuer)
        return handles

    # -- issuers -----------------------------------------------------------

    def _start_next(self, issuer: _Issuer) -> None:
        if not issuer.pending:
            issuer.active = None
            return
        inv = issuer.pending.popleft()
        issuer.active = inv
        start = max(inv.at, self.now)
        self.queue.schedule(start + self._origin_ps[inv.origin], issuer.node,
                            EventKind.COMMAND_ISSUED, inv)

    def _on_command_issued(self, node: int, inv: _Invocation) -> None:
        for h in inv.handles:
            h.visible_at = self.now
            if h.desc.blocking:
                inv.outstanding += 1
        for h in inv.handles:
            d = h.desc
            self._log(node, EventKind.COMMAND_ISSUED,
                      f"{d.op.value} peer={d.peer} tag={d.tag} size={d.size} path={d.path.value}")
            if d.op is Op.SEND:
                self._start_send(node, h)
            else:
                key = (d.peer, node, d.tag)
                self._pending_recv.setdefault(key, deque()).append(h)
                self._try_match(key)
        if inv.outstanding == 0:
            self._start_next(self._issuers[(node, inv.origin)])

    def _complete(self, h: CommandHandle) -> None:
        h.completed_at = self.now
        issuer = self._issuers[(h.node, h.desc.issue_origin)]
        inv = issuer.active
        if h.desc.blocking and inv is not None and h in inv.handles:
            inv.outstanding -= 1
            if inv.outstanding == 0:
                self._start_next(issuer)

    # -- transmit ----------------------------------------------------------

    def _connection(self, src: int, dst: int) -> _Connection:
        conn = self._conns.get((src, dst))
        if conn is None:
            key = (src,) if self.switched else (src, dst)
            port = self._ports.get(key)
            if port is None:
                port = self._ports[key] = _Port("tx" + "-".join(map(str, key)))
            conn = self._conns[(src, dst)] = _Connection(src, dst, port)
        return conn

    def _start_send(self, node: int, h: CommandHandle) -> None:
        d = h.desc
        msg = _Message(len(self._messages), node, d.peer, d.tag, d.size, d.path, d.payload, h)
        self._messages.append(msg)
        conn = self._connection(node, d.peer)
        conn.queue.append(msg)
        if not conn.queued and not conn.blocked:
            conn.queued = True
            conn.port.ready.append(conn)
        self._pump(conn.port)

    def _next_segment(self, conn: _Connection) -> _Segment | None:
        msg = conn.queue[0]
        remaining = msg.size - msg.injected
        n = min(self._seg_payload, remaining)
        if self.transport.windowed:
            n = min(n, int(self._window) - conn.inflight)
            if n <= 0 and remaining > 0:
                return None
            if conn.inflight + n > self._window:
                raise InvariantViolation(
                    f"window bound violated on {conn.src}->{conn.dst}: "
                    f"{conn.inflight + n} > {self._window}")
            conn.inflight += n
            conn.max_inflight = max(conn.max_inflight, conn.inflight)
        seg = _Segment(msg, msg.injected, n, conn,
                       serialization_ps(n + self.transport.frame_overhead, self._bw))
        msg.injected += n
        msg.started = True
        if msg.injected == msg.size:
            conn.queue.popleft()
        return seg

    def _pump(self, port: _Port) -> None:
        if port.busy:
            return
        while port.ready:
            conn = port.ready.popleft()
            if not conn.queue:
                conn.queued = False
                continue
            seg = self._next_segment(conn)
            if seg is None:
                conn.queued = False
                conn.blocked = True
                continue
            port.busy = True
            port.busy_ps += seg.wire_ps
            self._bytes_sent[conn.src] += seg.nbytes
            self.queue.schedule(self.now + seg.wire_ps, conn.src, EventKind.SEGMENT_TX, seg)
            if conn.queue:
                port.ready.append(conn)
            else:
                conn.queued = False
            return

    def _on_segment_tx(self, node: int, seg: _Segment) -> None:
        msg = seg.msg
        self._log(node, EventKind.SEGMENT_TX,
                  f"msg={msg.id} dst={msg.dst} off={seg.offset} len={seg.nbytes}")
        arrival = self.now + self._prop_ps
        if self.switched:
            arrival = max(arrival, self._egress_free.get(msg.dst, 0) + seg.wire_ps)
            self._egress_free[msg.dst] = arrival
        self.queue.schedule(arrival, msg.dst, EventKind.SEGMENT_RX, seg)
        seg.conn.port.busy = False
        self._pump(seg.conn.port)

    # -- receive -----------------------------------------------------------

    def _on_segment_rx(self, node: int, seg: _Segment) -> None:
        msg = seg.msg
        self._log(node, EventKind.SEGMENT_RX,
                  f"msg={msg.id} src={msg.src} off={seg.offset} len={seg.nbytes}")
        if seg.offset != msg.received:
            raise InvariantViolation(f"message {msg.id} segment out of order at node {node}")
        msg.received += seg.nbytes
        self._bytes_received[node] += seg.nbytes
        if msg.route is None:
            if (msg.src, msg.tag) in self._spill_config[node]:
                msg.route = Path.BUFFERED
            elif msg.path is Path.BUFFERED:
                raise ConfigurationError(
                    f"node {node} has no receive buffer for source {msg.src} tag {msg.tag}")
            else:
                msg.route = Path.STREAMED
        if msg.route is Path.BUFFERED:
            self._deliver_buffered(node, seg)
        elif self._stalled(node) or self._parked[node]:
            self._park(node, seg)
        else:
            self._deliver_streamed(node, seg)

    def _stalled(self, node: int) -> bool:
        return any(s <= self.now < e for s, e in self._stall_windows[node])

    def _park(self, node: int, seg: _Segment) -> None:
        self._parked[node].append(seg)
        self._parked_bytes[node] += seg.nbytes
        self._max_parked[node] = max(self._max_parked[node], self._parked_bytes[node])
        if not self._stalled(node) and not self._drain_pending[node]:
            self._drain_pending[node] = True
            self.queue.schedule(self.now, node, EventKind.STREAM_DELIVERED)

    def _on_kernel_wake(self, node: int) -> None:
        self._log(node, EventKind.KERNEL_WAKE, f"parked={len(self._parked[node])}")
        if self._parked[node] and not self._drain_pending[node]:
            self._drain_pending[node] = True
            self.queue.schedule(self.now, node, EventKind.STREAM_DELIVERED)

    def _on_drain(self, node: int) -> None:
        self._drain_pending[node] = False
        if self._stalled(node):
            return
        parked = self._parked[node]
        while parked:
            seg = parked.popleft()
            self._parked_bytes[node] -= seg.nbytes
            self._deliver_streamed(node, seg)

    def _ack(self, seg: _Segment) -> None:
        if self.transport.windowed:
            self.queue.schedule(self.now + self._ack_ps, seg.conn.src, EventKind.ACK_RX, seg)

    def _on_ack(self, node: int, seg: _Segment) -> None:
        conn = seg.conn
        self._log(node, EventKind.ACK_RX, f"dst={conn.dst} len={seg.nbytes}")
        conn.inflight -= seg.nbytes
        if conn.blocked:
            conn.blocked = False
            if conn.queue and not conn.queued:
                conn.queued = True
                conn.port.ready.append(conn)
            self._pump(conn.port)

    def _deliver_streamed(self, node: int, seg: _Segment) -> None:
        msg = seg.msg
        self._log(node, EventKind.STREAM_DELIVERED,
                  f"msg={msg.id} src={msg.src} tag={msg.tag} off={seg.offset} len={seg.nbytes}")
        self.streams[node].append(
            StreamRecord(self.now, msg.src, msg.tag, msg.id, seg.offset, seg.nbytes, seg.data))
        msg.delivered += seg.nbytes
        self._ack(seg)
        if msg.delivered == msg.size and msg.received == msg.size and msg.arrived_at is None:
            self._message_done(msg)

    def _deliver_buffered(self, node: int, seg: _Segment) -> None:
        msg = seg.msg
        if seg.data is not None:
            msg.chunks.append(seg.data)
        msg.delivered += seg.nbytes
        self._ack(seg)
        if msg.delivered == msg.size and msg.arrived_at is None:
            self._message_done(msg)
            key = (msg.src, node, msg.tag)
            self._spill.setdefault(key, deque()).append(msg)
            self._try_match(key)

    def _message_done(self, msg: _Message) -> None:
        if not msg.injected == msg.received == msg.delivered == msg.size:
            raise InvariantViolation(
                f"byte conservation failed for message {msg.id}: injected={msg.injected} "
                f"received={msg.received} delivered={msg.delivered} size={msg.size}")
        msg.arrived_at = self.now
        self._complete(msg.send)

    def _try_match(self, key: tuple[int, int, int]) -> None:
        arrived = self._spill.get(key)
        waiting = self._pending_recv.get(key)
        while arrived and waiting:
            msg = arrived.popleft()
            h = waiting.popleft()
            if h.desc.size != msg.size:
                raise InvariantViolation(
                    f"recv at node {h.node} from {msg.src} tag {msg.tag} expects "
                    f"{h.desc.size} bytes, message has {msg.size}")
            node = key[1]
            start = max(self.now, self._mem_free[node])
            done = start + self._copy_setup_ps + serialization_ps(msg.size, self._mem_bw)
            self._mem_free[node] = done
            self.queue.schedule(done, node, EventKind.COPY_DONE, (h, msg))

    def _on_copy_done(self, node: int, data: tuple[CommandHandle, _Message]) -> None:
        h, msg = data
        self._log(node, EventKind.COPY_DONE, f"msg={msg.id} src={msg.src} tag={msg.tag} size={msg.size}")
        if msg.payload is not None:
            h.payload = b"".join(msg.chunks)
        self._complete(h)

    # -- main loop ---------------------------------------------------------

    def _log(self, node: int, kind: EventKind, details: str) -> None:
        if self.trace_enabled:
            self.trace.append(f"{self.now} {node} {kind.value} {details}")

    def run_until(self, t: int | None = None) -> None:
        """Process events up to time ``t`` (picoseconds) or to quiescence.

        At quiescence any receive without a message, message without a
        receive, or issuer still holding commands raises :class:`DeadlockError`.
        """
        handlers = {
            EventKind.COMMAND_ISSUED: self._on_command_issued,
            EventKind.SEGMENT_TX: self._on_segment_tx,
            EventKind.SEGMENT_RX: self._on_segment_rx,
            EventKind.ACK_RX: self._on_ack,
            EventKind.COPY_DONE: self._on_copy_done,
        }
        queue = self.queue
        while queue:
            if t is not None and queue.peek_time() > t:
                break
            ev = queue.pop()
            self._events += 1
            if ev.kind is EventKind.KERNEL_WAKE:
                self._on_kernel_wake(ev.node)
            elif ev.kind is EventKind.STREAM_DELIVERED:
                self._on_drain(ev.node)
            else:
                handlers[ev.kind](ev.node, ev.data)
        if t is not None:
            queue.now = max(queue.now, t)
        elif unmatched := self.unmatched():
            raise DeadlockError(unmatched)

    def unmatched(self) -> list[tuple[int, int, int, str]]:
        report = []
        for (src, dst, tag), waiting in self._pending_recv.items():
            report.extend((dst, src, tag, "recv without message") for _ in waiting)
        for (src, dst, tag), arrived in self._spill.items():
            report.extend((dst, src, tag, "message without recv") for _ in arrived)
        for issuer in self._issuers.values():
            for inv in issuer.pending:
                report.extend((h.node, h.desc.peer, h.desc.tag, "command never issued")
                              for h in inv.handles)
        return sorted(report)

    def stats(self) -> SimStats:
        return SimStats(
            end_time=self.now,
            events=self._events,
            bytes_sent=dict(enumerate(self._bytes_sent)),
            bytes_received=dict(enumerate(self._bytes_received)),
            commands=[
                CommandRecord(h.node, h.desc.op.value, h.desc.peer, h.desc.tag, h.desc.size,
                              h.posted_at, h.visible_at, h.completed_at)
                for h in self._handles
            ],
            port_busy={p.name: p.busy_ps for p in self._ports.values()},
            max_inflight={k: c.max_inflight for k, c in self._conns.items()},
            max_parked_bytes=dict(enumerate(self._max_parked)),
        )


def reassemble(records: Iterable[StreamRecord]) -> dict[tuple[int, int], bytes]:
    """Rebuild per-(source, tag) byte streams from an interleaved consumer stream."""
    out: dict[tuple[int, int], list[bytes]] = {}
    for r in records:
        out.setdefault((r.src, r.tag), []).append(r.data or b"")
    return {k: b"".join(v) for k, v in out.items()}
