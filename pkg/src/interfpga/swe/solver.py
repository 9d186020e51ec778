"""
First-order finite-volume shallow-water solver on triangles.

Flat bottom, no friction. Interface fluxes use the local Lax-Friedrichs
(Rusanov) scheme. Land edges reflect, sea edges impose a water depth and
pass the interior velocity through.

Every element sums its three edge contributions in ascending global edge
id, and the same local-problem kernel runs both the serial reference and
each partition of a distributed run, so the two agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, InvariantViolation
from ..mesh import BoundaryTag, Mesh


class CFLError(ConfigurationError):
    pass


class SolverError(InvariantViolation):
    pass


@dataclass
class ElementState:
    h: np.ndarray
    hu: np.ndarray
    hv: np.ndarray

    @classmethod
    def at_rest(cls, n: int, depth: float) -> "ElementState":
        return cls(np.full(n, float(depth)), np.zeros(n), np.zeros(n))

    def __len__(self) -> int:
        return len(self.h)

    def copy(self) -> "ElementState":
        return ElementState(self.h.copy(), self.hu.copy(), self.hv.copy())

    def take(self, ids: np.ndarray) -> "ElementState":
        return ElementState(self.h[ids], self.hu[ids], self.hv[ids])

    def mass(self, areas: np.ndarray) -> float:
        return math.fsum((self.h * areas).tolist())

    def bitwise_equal(self, other: "ElementState") -> bool:
        return all(np.array_equal(a.view(np.int64), b.view(np.int64))
                   for a, b in ((self.h, other.h), (self.hu, other.hu), (self.hv, other.hv)))


@dataclass(frozen=True)
class SolverConfig:
    """Time step and boundary forcing.

    The sea boundary depth is ``sea_depth + tide_amplitude * sin(2 pi t / tide_period)``.
    """

    dt: float
    g: float = 9.81
    sea_depth: float = 10.0
    tide_amplitude: float = 0.0
    tide_period: float = 12.42 * 3600.0
    cfl_limit: float = 1.0

    def __post_init__(self) -> None:
        if not self.dt > 0 or not self.g > 0:
            raise ConfigurationError("dt and g must be positive")
        if self.sea_depth - abs(self.tide_amplitude) <= 0:
            raise ConfigurationError("sea depth must stay positive over the tidal cycle")
        if not self.tide_period > 0 or not 0 < self.cfl_limit <= 1:
            raise ConfigurationError("tide_period must be positive, 0 < cfl_limit <= 1")

    def sea_depth_at(self, t: float) -> float:
        return self.sea_depth + self.tide_amplitude * math.sin(2 * math.pi * t / self.tide_period)


def cfl_number(mesh: Mesh, state: ElementState, cfg: SolverConfig) -> float:
    """dt times the largest wave speed times perimeter/area."""
    h_max = max(float(state.h.max()), cfg.sea_depth + abs(cfg.tide_amplitude))
    speed = np.hypot(state.hu, state.hv) / state.h
    s_max = float(speed.max()) + math.sqrt(cfg.g * h_max)
    perimeter = mesh.edge_lengths[mesh.elem_edges].sum(axis=1)
    return cfg.dt * s_max * float((perimeter / mesh.areas).max())


def check_cfl(mesh: Mesh, state: ElementState, cfg: SolverConfig) -> None:
    check_state(state)
    c = cfl_number(mesh, state, cfg)
    if c > cfg.cfl_limit:
        raise CFLError(f"time step {cfg.dt} s violates the CFL bound (CFL number {c:.3f} > "
                       f"{cfg.cfl_limit}); use dt <= {cfg.dt * cfg.cfl_limit / c:.6g} s")


def stable_dt(mesh: Mesh, state: ElementState, cfg: SolverConfig, safety: float = 0.9) -> float:
    return safety * cfg.dt / cfl_number(mesh, state, cfg)


def check_state(state: ElementState, where: str = "") -> None:
    for name in ("h", "hu", "hv"):
        arr = getattr(state, name)
        bad = np.nonzero(~np.isfinite(arr))[0]
        if len(bad):
            raise SolverError(f"non-finite {name} at element {int(bad[0])}{where}")
    dry = np.nonzero(state.h <= 0)[0]
    if len(dry):
        raise SolverError(f"non-positive depth at element {int(dry[0])}{where}")


@dataclass(frozen=True, eq=False)
class LocalProblem:
    """Everything one partition needs to advance its elements.

    Local element numbering is ``owned`` followed by ``halo``, both in
    ascending global id. ``edges`` are the global edges touching an owned
    element, ascending; ``left``/``right`` index local elements (-1 for the
    outside of a boundary edge). ``slots[i]`` lists the three edges of owned
    element i in ascending global edge id and ``signs`` is +1 where the
    element is the edge's left side.
    """

    owned: np.ndarray
    halo: np.ndarray
    edges: np.ndarray
    left: np.ndarray
    right: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray
    land: np.ndarray
    sea: np.ndarray
    slots: np.ndarray
    signs: np.ndarray
    areas: np.ndarray

    @classmethod
    def build(cls, mesh: Mesh, owned: np.ndarray) -> "LocalProblem":
        owned = np.asarray(owned, dtype=np.int64)
        m = mesh.n_elements
        is_owned = np.zeros(m, dtype=bool)
        is_owned[owned] = True
        nb = mesh.neighbors[owned].ravel()
        halo = np.unique(nb[(nb >= 0) & ~is_owned[np.maximum(nb, 0)]])
        local = np.full(m, -1, dtype=np.int64)
        local[owned] = np.arange(len(owned))
        local[halo] = len(owned) + np.arange(len(halo))

        own_edges = mesh.elem_edges[owned]
        edges = np.unique(own_edges)
        ee = mesh.edge_elements[edges]
        left = local[ee[:, 0]]
        right = np.where(ee[:, 1] >= 0, local[np.maximum(ee[:, 1], 0)], -1)
        tags = mesh.edge_tags[edges]

        order = np.argsort(own_edges, axis=1, kind="stable")
        sorted_edges = np.take_along_axis(own_edges, order, axis=1)
        slots = np.searchsorted(edges, sorted_edges)
        signs = np.where(mesh.edge_elements[sorted_edges, 0] == owned[:, None], 1.0, -1.0)
        return cls(
            owned=owned,
            halo=halo,
            edges=edges,
            left=left,
            right=right,
            normals=mesh.edge_normals[edges],
            lengths=mesh.edge_lengths[edges],
            land=np.nonzero(tags == BoundaryTag.LAND)[0],
            sea=np.nonzero(tags == BoundaryTag.SEA)[0],
            slots=slots,
            signs=signs,
            areas=mesh.areas[owned],
        )


def _flux(hL, huL, hvL, hR, huR, hvR, nx, ny, g):
    unL = (huL * nx + hvL * ny) / hL
    unR = (huR * nx + hvR * ny) / hR
    pL = 0.5 * g * hL * hL
    pR = 0.5 * g * hR * hR
    s = np.maximum(np.abs(unL) + np.sqrt(g * hL), np.abs(unR) + np.sqrt(g * hR))
    f0 = 0.5 * (hL * unL + hR * unR) - 0.5 * s * (hR - hL)
    f1 = 0.5 * ((huL * unL + pL * nx) + (huR * unR + pR * nx)) - 0.5 * s * (huR - huL)
    f2 = 0.5 * ((hvL * unL + pL * ny) + (hvR * unR + pR * ny)) - 0.5 * s * (hvR - hvL)
    return f0, f1, f2


def advance_local(problem: LocalProblem, local: ElementState, t: float, cfg: SolverConfig) -> ElementState:
    """One forward-Euler step of the owned elements; ``local`` holds owned then halo values."""
    lp = problem
    hL, huL, hvL = local.h[lp.left], local.hu[lp.left], local.hv[lp.left]
    r = np.maximum(lp.right, 0)
    hR, huR, hvR = local.h[r], local.hu[r], local.hv[r]
    nx, ny = lp.normals[:, 0], lp.normals[:, 1]

    # reflective wall: same depth, normal momentum mirrored
    w = lp.land
    un = huL[w] * nx[w] + hvL[w] * ny[w]
    hR[w] = hL[w]
    huR[w] = huL[w] - 2.0 * un * nx[w]
    hvR[w] = hvL[w] - 2.0 * un * ny[w]
    # open sea: prescribed depth, interior velocity
    s = lp.sea
    h_sea = cfg.sea_depth_at(t)
    hR[s] = h_sea
    huR[s] = h_sea * (huL[s] / hL[s])
    hvR[s] = h_sea * (hvL[s] / hL[s])

    n_own = len(lp.owned)
    f0, f1, f2 = _flux(hL, huL, hvL, hR, huR, hvR, nx, ny, cfg.g)
    lengths = lp.lengths[lp.slots]
    # Momentum fluxes are taken relative to the element's own pressure. The
    # rounded normals of a triangle do not sum to exactly zero, and without
    # this a lake at rest would drift by rounding on irregular meshes.
    h_own = local.h[:n_own, None]
    p_own = 0.5 * cfg.g * h_own * h_own
    out = []
    for f, n, u in ((f0, None, local.h), (f1, nx, local.hu), (f2, ny, local.hv)):
        c = f[lp.slots] * lp.signs
        if n is not None:
            c = c - p_own * (n[lp.slots] * lp.signs)
        c = c * lengths
        total = c[:, 0] + c[:, 1] + c[:, 2]
        out.append(u[:n_own] - (cfg.dt / lp.areas) * total)
    return ElementState(*out)


class ReferenceSolver:
    """Serial single-partition solver."""

    def __init__(self, mesh: Mesh, state: ElementState, cfg: SolverConfig, check: bool = True):
        if len(state) != mesh.n_elements:
            raise ConfigurationError(f"state has {len(state)} elements, mesh has {mesh.n_elements}")
        if check:
            check_cfl(mesh, state, cfg)
        self.mesh = mesh
        self.cfg = cfg
        self.state = state.copy()
        self.step_count = 0
        self.problem = LocalProblem.build(mesh, np.arange(mesh.n_elements))

    @property
    def time(self) -> float:
        return self.step_count * self.cfg.dt

    def step(self) -> ElementState:
        self.state = advance_local(self.problem, self.state, self.time, self.cfg)
        self.step_count += 1
        check_state(self.state, f" after step {self.step_count}")
        return self.state

    def run(self, steps: int) -> ElementState:
        for _ in range(steps):
            self.step()
        return self.state


def step_reference(mesh: Mesh, state: ElementState, cfg: SolverConfig, t: float = 0.0) -> ElementState:
    """One serial step of the whole mesh starting at time ``t``."""
    check_cfl(mesh, state, cfg)
    new = advance_local(LocalProblem.build(mesh, np.arange(mesh.n_elements)), state, t, cfg)
    check_state(new, " after the step")
    return new


def dam_break_state(mesh: Mesh, depth: float = 2.0, jump: float = 1.0) -> ElementState:
    """Column of deeper water across the middle of the domain, at rest.

    The column is centered, so the initial state is invariant under a
    half-turn about the domain center.
    """
    c = mesh.centroids
    lo, hi = mesh.vertices[:, 0].min(), mesh.vertices[:, 0].max()
    mid, quarter = 0.5 * (lo + hi), 0.25 * (hi - lo)
    h = np.where(np.abs(c[:, 0] - mid) < quarter, depth + jump, depth)
    return ElementState(h, np.zeros(len(h)), np.zeros(len(h)))


def bump_state(mesh: Mesh, depth: float = 10.0, height: float = 1.0, width: float | None = None) -> ElementState:
    """Gaussian hump at the domain center with a small rotational velocity."""
    c = mesh.centroids
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    center = 0.5 * (lo + hi)
    width = width or 0.15 * float((hi - lo).max())
    r2 = ((c - center) ** 2).sum(axis=1)
    h = depth + height * np.exp(-r2 / (width * width))
    hu = -0.1 * (c[:, 1] - center[1]) / width * h
    hv = 0.1 * (c[:, 0] - center[0]) / width * h
    return ElementState(h, hu, hv)
