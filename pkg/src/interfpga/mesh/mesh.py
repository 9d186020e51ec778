"""Unstructured triangular meshes: construction, validation and text I/O."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError


class BoundaryTag(IntEnum):
    INTERIOR = 0
    LAND = 1
    SEA = 2


_TAG_CHARS = {"-": BoundaryTag.INTERIOR, "L": BoundaryTag.LAND, "S": BoundaryTag.SEA}
_TAG_OUT = {v: k for k, v in _TAG_CHARS.items()}

SIDES = ("south", "east", "north", "west")


class MeshError(ConfigurationError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangles with a derived edge table.

    Edges are numbered in ascending order of their (smaller, larger) vertex
    pair. ``edge_elements[e]`` holds the incident triangles in ascending
    order, the second entry is -1 on boundary edges. ``elem_edges[t, k]`` is
    the edge from vertex k to vertex k+1 of triangle t.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_elements: np.ndarray
    edge_tags: np.ndarray
    elem_edges: np.ndarray

    @classmethod
    def build(
        cls,
        vertices,
        triangles,
        local_tags=None,
        lines: list[int] | None = None,
    ) -> "Mesh":
        """Validate triangles and derive edges.

        ``local_tags`` is an optional (M, 3) array of :class:`BoundaryTag`
        values per triangle edge; boundary edges left INTERIOR default to LAND.
        ``lines`` maps triangle index to a source line for error messages.
        """
        verts = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 2)
        tris = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        m = len(tris)

        def where(t: int) -> int | None:
            return lines[t] if lines is not None else None

        if m == 0:
            raise MeshError("mesh has no triangles")
        bad = np.nonzero(((tris < 0) | (tris >= len(verts))).any(axis=1))[0]
        if len(bad):
            t = int(bad[0])
            raise MeshError(f"triangle {t} references a missing vertex {tris[t].tolist()}", where(t))
        degenerate = np.nonzero((tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2])
                                | (tris[:, 0] == tris[:, 2]))[0]
        if len(degenerate):
            t = int(degenerate[0])
            raise MeshError(f"triangle {t} repeats a vertex", where(t))
        p0, p1, p2 = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
        cross = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
        cw = np.nonzero(cross <= 0)[0]
        if len(cw):
            t = int(cw[0])
            raise MeshError(f"triangle {t} is not counterclockwise", where(t))
        keys = np.sort(tris, axis=1)
        _, first, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
        if (counts > 1).any():
            dup_key = keys[first[np.nonzero(counts > 1)[0][0]]]
            dups = np.nonzero((keys == dup_key).all(axis=1))[0]
            raise MeshError(f"triangle {int(dups[1])} duplicates triangle {int(dups[0])}", where(int(dups[1])))

        a = tris
        b = np.roll(tris, -1, axis=1)
        lo = np.minimum(a, b).ravel()
        hi = np.maximum(a, b).ravel()
        owner = np.repeat(np.arange(m), 3)
        nv = len(verts)
        half_key = lo * nv + hi
        edge_keys, inverse, counts = np.unique(half_key, return_inverse=True, return_counts=True)
        if (counts > 2).any():
            e = int(np.nonzero(counts > 2)[0][0])
            t = int(owner[np.nonzero(inverse == e)[0][2]])
            raise MeshError(f"edge {edge_keys[e] // nv}-{edge_keys[e] % nv} has more than two "
                            f"triangles (triangle {t})", where(t))
        n_edges = len(edge_keys)
        edges = np.stack([edge_keys // nv, edge_keys % nv], axis=1)
        order = np.lexsort((owner, inverse))
        sorted_edges = inverse[order]
        sorted_owner = owner[order]
        starts = np.searchsorted(sorted_edges, np.arange(n_edges))
        edge_elements = np.full((n_edges, 2), -1, dtype=np.int64)
        edge_elements[:, 0] = sorted_owner[starts]
        two = counts == 2
        edge_elements[two, 1] = sorted_owner[starts[two] + 1]
        # interior edges must be traversed in opposite directions by their two triangles
        forward = (a.ravel() < b.ravel())
        fwd_count = np.bincount(inverse, weights=forward, minlength=n_edges)
        flipped = two & (fwd_count != 1)
        if flipped.any():
            e = int(np.nonzero(flipped)[0][0])
            t = int(edge_elements[e, 1])
            raise MeshError(f"triangles {int(edge_elements[e, 0])} and {t} disagree on orientation", where(t))

        tags = np.zeros(n_edges, dtype=np.int8)
        boundary = counts == 1
        if local_tags is not None:
            lt = np.asarray(local_tags, dtype=np.int8).reshape(m, 3).ravel()
            tagged_interior = (lt != 0) & two[inverse]
            if tagged_interior.any():
                t = int(owner[np.nonzero(tagged_interior)[0][0]])
                raise MeshError(f"triangle {t} tags an interior edge as boundary", where(t))
            tags[inverse] = np.maximum(tags[inverse], lt)
        tags[boundary & (tags == 0)] = BoundaryTag.LAND
        return cls(verts, tris, edges, edge_elements, tags, inverse.reshape(m, 3))

    # -- derived geometry --------------------------------------------------

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def areas(self) -> np.ndarray:
        p0, p1, p2 = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                      - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def neighbors(self) -> np.ndarray:
        """(M, 3) element across each local edge, -1 on the boundary."""
        ee = self.edge_elements[self.elem_edges]
        own = np.arange(self.n_elements)[:, None]
        return np.where(ee[:, :, 0] == own, ee[:, :, 1], ee[:, :, 0])

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """(E, 2) unit normals pointing out of ``edge_elements[e, 0]``."""
        first = self.edge_elements[:, 0]
        k = np.argmax(self.elem_edges[first] == np.arange(self.n_edges)[:, None], axis=1)
        tri = self.triangles[first]
        rows = np.arange(self.n_edges)
        d = self.vertices[tri[rows, (k + 1) % 3]] - self.vertices[tri[rows, k]]
        # counterclockwise traversal: the outward normal is the direction turned right
        return np.stack([d[:, 1], -d[:, 0]], axis=1) / self.edge_lengths[:, None]

    def local_tags(self) -> np.ndarray:
        """Boundary tag of each triangle edge, INTERIOR for shared edges."""
        return self.edge_tags[self.elem_edges]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles)
                and np.array_equal(self.edge_tags, other.edge_tags))

    __hash__ = None


def generate_rect_mesh(
    nx: int,
    ny: int,
    sea_side: str | None = "east",
    cell_size: float = 1.0,
) -> Mesh:
    """Grid of nx by ny cells, each split into two triangles along its diagonal.

    The boundary on ``sea_side`` (one of south, east, north, west) is open
    sea, everything else is land. ``sea_side=None`` gives a closed basin.
    """
    if nx < 1 or ny < 1:
        raise ConfigurationError("nx and ny must be >= 1")
    if sea_side is not None and sea_side not in SIDES:
        raise ConfigurationError(f"sea_side must be one of {SIDES} or None")
    xs, ys = np.meshgrid(np.arange(nx + 1) * cell_size, np.arange(ny + 1) * cell_size)
    verts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (j * (nx + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + nx + 1
    v11 = v01 + 1
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.stack([v00, v10, v11], axis=1)
    tris[1::2] = np.stack([v00, v11, v01], axis=1)

    tags = np.zeros((len(tris), 3), dtype=np.int8)
    if sea_side is not None:
        width, height = nx * cell_size, ny * cell_size
        p = verts[tris]
        q = np.roll(p, -1, axis=1)
        coord, value = {"south": (1, 0.0), "north": (1, height),
                        "west": (0, 0.0), "east": (0, width)}[sea_side]
        on_side = (p[:, :, coord] == value) & (q[:, :, coord] == value)
        tags[on_side] = BoundaryTag.SEA
    return Mesh.build(verts, tris, tags)


def save_mesh(mesh: Mesh, path: str | Path) -> None:
    tags = mesh.local_tags()
    with open(path, "w") as fh:
        fh.write(f"vertices {len(mesh.vertices)}\n")
        fh.write(f"triangles {mesh.n_elements}\n")
        for x, y in mesh.vertices.tolist():
            fh.write(f"{x!r} {y!r}\n")
        for tri, tg in zip(mesh.triangles.tolist(), tags.tolist()):
            fh.write(f"{tri[0]} {tri[1]} {tri[2]} {' '.join(_TAG_OUT[t] for t in tg)}\n")


def load_mesh(path: str | Path) -> Mesh:
    """Parse the line-oriented mesh format; see the README for the layout."""
    try:
        with open(path) as fh:
            raw = [(no, line.split("#", 1)[0].split()) for no, line in enumerate(fh, start=1)]
    except OSError as e:
        raise MeshError(f"cannot read mesh {path}: {e.strerror}") from None
    rows = [(no, toks) for no, toks in raw if toks]

    def header(idx: int, word: str) -> int:
        if idx >= len(rows):
            raise MeshError(f"missing '{word} N' header")
        no, toks = rows[idx]
        if len(toks) != 2 or toks[0] != word or not toks[1].isdigit():
            raise MeshError(f"expected '{word} N'", no)
        return int(toks[1])

    nv = header(0, "vertices")
    nt = header(1, "triangles")
    body = rows[2:]
    if len(body) != nv + nt:
        last = body[-1][0] if body else rows[1][0]
        raise MeshError(f"expected {nv} vertex and {nt} triangle lines, found {len(body)}", last)
    verts = np.empty((nv, 2))
    for i, (no, toks) in enumerate(body[:nv]):
        try:
            if len(toks) != 2:
                raise ValueError
            verts[i] = [float(toks[0]), float(toks[1])]
        except ValueError:
            raise MeshError(f"vertex {i}: expected 'x y'", no) from None
    tris = np.empty((nt, 3), dtype=np.int64)
    tags = np.zeros((nt, 3), dtype=np.int8)
    lines = []
    for t, (no, toks) in enumerate(body[nv:]):
        lines.append(no)
        if len(toks) not in (3, 6):
            raise MeshError(f"triangle {t}: expected 'v0 v1 v2 [tag tag tag]'", no)
        try:
            tris[t] = [int(v) for v in toks[:3]]
        except ValueError:
            raise MeshError(f"triangle {t}: vertex indices must be integers", no) from None
        if len(toks) == 6:
            try:
                tags[t] = [_TAG_CHARS[c] for c in toks[3:]]
            except KeyError:
                raise MeshError(f"triangle {t}: boundary tags must be L, S or -", no) from None
    return Mesh.build(verts, tris, tags, lines=lines)
