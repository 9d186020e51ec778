"""Deterministic mesh partitioners, halo lists and per-partition statistics."""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from .mesh import Mesh

DEFAULT_BYTES_PER_ELEMENT = 32


class Method(Enum):
    COORDINATE_BISECTION = "rcb"
    GREEDY_BFS = "bfs"


@dataclass(frozen=True, eq=False)
class Partitioning:
    """Element-to-part map with halo lists.

    ``send[p][q]`` are the elements of part ``p`` that part ``q`` reads, and
    ``recv[q][p]`` is the same array: the order in which ``q`` consumes the
    remote elements (ascending global id).
    """

    k: int
    assignment: np.ndarray
    send: tuple[dict[int, np.ndarray], ...]
    recv: tuple[dict[int, np.ndarray], ...]

    def elements(self, part: int) -> np.ndarray:
        return np.nonzero(self.assignment == part)[0]

    def neighbors(self, part: int) -> list[int]:
        return sorted(self.send[part])

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def _rcb(centroids: np.ndarray, ids: np.ndarray, k: int, first: int, out: np.ndarray) -> None:
    if k == 1:
        out[ids] = first
        return
    k_left = k // 2
    pts = centroids[ids]
    extent = pts.max(axis=0) - pts.min(axis=0)
    axis = 0 if extent[0] >= extent[1] else 1
    order = np.lexsort((ids, pts[:, 1 - axis], pts[:, axis]))
    cut = (len(ids) * k_left + k // 2) // k
    _rcb(centroids, ids[order[:cut]], k_left, first, out)
    _rcb(centroids, ids[order[cut:]], k - k_left, first + k_left, out)


def _greedy_bfs(mesh: Mesh, k: int) -> np.ndarray:
    m = mesh.n_elements
    out = np.full(m, -1, dtype=np.int64)
    neighbors = np.sort(mesh.neighbors, axis=1).tolist()
    next_seed = 0
    for part in range(k):
        target = m // k + (1 if part < m % k else 0)
        taken = 0
        frontier: deque[int] = deque()
        while taken < target:
            if not frontier:
                while out[next_seed] != -1:
                    next_seed += 1
                out[next_seed] = part
                taken += 1
                frontier.append(next_seed)
                continue
            e = frontier.popleft()
            for nb in neighbors[e]:
                if nb >= 0 and out[nb] == -1 and taken < target:
                    out[nb] = part
                    taken += 1
                    frontier.append(nb)
    return out


def halo_lists(mesh: Mesh, assignment: np.ndarray, k: int):
    """Send/recv lists from an assignment; both orderings ascend by element id."""
    ee = mesh.edge_elements
    interior = ee[:, 1] >= 0
    a, b = ee[interior, 0], ee[interior, 1]
    pa, pb = assignment[a], assignment[b]
    cut = pa != pb
    # (owner part, reader part, element) for both sides of every cut edge
    src = np.concatenate([pa[cut], pb[cut]])
    dst = np.concatenate([pb[cut], pa[cut]])
    elem = np.concatenate([a[cut], b[cut]])
    triples = np.unique(np.stack([src, dst, elem], axis=1), axis=0)
    send: list[dict[int, np.ndarray]] = [dict() for _ in range(k)]
    if len(triples):
        pair_key = triples[:, 0] * k + triples[:, 1]
        bounds = np.nonzero(np.diff(pair_key))[0] + 1
        for chunk in np.split(triples, bounds):
            send[int(chunk[0, 0])][int(chunk[0, 1])] = chunk[:, 2].copy()
    recv: list[dict[int, np.ndarray]] = [dict() for _ in range(k)]
    for p in range(k):
        for q in sorted(send[p]):
            recv[q][p] = send[p][q]
    recv = [dict(sorted(r.items())) for r in recv]
    return tuple(send), tuple(recv)


def partition(mesh: Mesh, k: int, method: Method = Method.COORDINATE_BISECTION) -> Partitioning:
    m = mesh.n_elements
    if not 1 <= k <= m:
        raise ConfigurationError(f"k must be between 1 and the element count {m}, got {k}")
    if method is Method.COORDINATE_BISECTION:
        assignment = np.empty(m, dtype=np.int64)
        _rcb(mesh.centroids, np.arange(m), k, 0, assignment)
    else:
        assignment = _greedy_bfs(mesh, k)
    send, recv = halo_lists(mesh, assignment, k)
    return Partitioning(k, assignment, send, recv)


@dataclass(frozen=True)
class PartitionStats:
    part: int
    size: int
    e_core: int
    e_send: int
    e_recv: int
    n_neighbors: int
    largest_halo_bytes: int
    d_ext: float = 0.0


@dataclass(frozen=True)
class WorstCase:
    """The tuple the latency model is evaluated with."""

    n_max: int
    e_send_max: int
    e_recv_max: int
    e_core_min: int
    halo_bytes_max: int


def partition_stats(
    p: Partitioning,
    mesh: Mesh,
    bytes_per_element: int = DEFAULT_BYTES_PER_ELEMENT,
    d_ext: float = 0.0,
) -> tuple[list[PartitionStats], WorstCase]:
    sizes = p.sizes()
    out = []
    for part in range(p.k):
        sends = p.send[part]
        border = np.unique(np.concatenate(list(sends.values()))) if sends else np.empty(0)
        e_send = sum(len(v) for v in sends.values())
        e_recv = sum(len(v) for v in p.recv[part].values())
        largest = max((len(v) for v in list(sends.values()) + list(p.recv[part].values())), default=0)
        out.append(PartitionStats(
            part=part,
            size=int(sizes[part]),
            e_core=int(sizes[part]) - len(border),
            e_send=e_send,
            e_recv=e_recv,
            n_neighbors=len(sends),
            largest_halo_bytes=largest * bytes_per_element,
            d_ext=d_ext,
        ))
    worst = WorstCase(
        n_max=max(s.n_neighbors for s in out),
        e_send_max=max(s.e_send for s in out),
        e_recv_max=max(s.e_recv for s in out),
        e_core_min=min(s.e_core for s in out),
        halo_bytes_max=max(s.largest_halo_bytes for s in out),
    )
    return out, worst


def write_stats_csv(stats: list[PartitionStats], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(asdict(stats[0])))
        w.writeheader()
        for s in stats:
            w.writerow(asdict(s))


def neighbor_count_violations(mesh: Mesh, ks: list[int], method: Method = Method.COORDINATE_BISECTION):
    """Pairs (k_prev, k_next) where the maximum neighbor count went down."""
    n_max = [partition_stats(partition(mesh, k, method), mesh)[1].n_max for k in ks]
    return [(ks[i], ks[i + 1]) for i in range(len(ks) - 1) if n_max[i + 1] < n_max[i]], n_max
