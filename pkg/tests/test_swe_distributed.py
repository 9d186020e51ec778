from __future__ import annotations

import numpy as np
import pytest

from interfpga.errors import ConfigurationError
from interfpga.mesh import Method, generate_rect_mesh, partition
from interfpga.presets import get_preset
from interfpga.swe import (
    HALO_DTYPE,
    DistributedSolver,
    HaloFault,
    HaloMismatchError,
    ReferenceSolver,
    SolverConfig,
    bump_state,
    run_distributed,
    stable_dt,
)
from oracles import solver_meshes

MESHES = solver_meshes()
CLUSTER = get_preset("direct-udp-pl")


def setup(name="rect-sea-east"):
    mesh = MESHES[name]
    state = bump_state(mesh)
    cfg = SolverConfig(dt=stable_dt(mesh, state, SolverConfig(dt=1.0)), tide_amplitude=0.5, tide_period=300.0)
    return mesh, state, cfg


def test_halo_record_layout():
    assert HALO_DTYPE.itemsize == 32
    assert HALO_DTYPE.names == ("id", "h", "hu", "hv")


@pytest.mark.parametrize("preset", ["direct-udp-pl", "switch-tcp-pl", "mpi-pcie-baseline"])
@pytest.mark.parametrize("method", list(Method), ids=lambda m: m.value)
@pytest.mark.parametrize("k", [2, 5])
def test_bitwise_equal_to_reference(preset, method, k):
    mesh, state, cfg = setup("jittered-sea-north")
    ref = ReferenceSolver(mesh, state, cfg).run(20)
    out, timings = run_distributed(mesh, k, state, cfg, 20, get_preset(preset), method)
    assert out.bitwise_equal(ref)
    assert len(timings) == 20 and all(len(t) == k for t in timings)


def test_single_partition_has_no_communication():
    mesh, state, cfg = setup()
    solver = DistributedSolver(mesh, partition(mesh, 1), state, cfg, CLUSTER)
    timings = solver.run(3)
    assert solver.sim.stats().events == 0
    assert all(t[0].arrival_cycles == 0.0 and t[0].stall_cycles == 0.0 for t in timings)


def test_halo_payloads_cross_the_simulator():
    mesh, state, cfg = setup()
    solver = DistributedSolver(mesh, partition(mesh, 4), state, cfg, CLUSTER)
    solver.step()
    stats = solver.sim.stats()
    expected = sum(len(ids) * 32 for sends in solver.p.send for ids in sends.values())
    assert sum(stats.bytes_sent.values()) == sum(stats.bytes_received.values()) == expected


@pytest.mark.parametrize("kind", ["reorder", "truncate"])
def test_corrupted_halo_is_detected(kind):
    mesh, state, cfg = setup()
    p = partition(mesh, 4)
    neighbor = p.neighbors(1)[0]
    solver = DistributedSolver(mesh, p, state, cfg, CLUSTER, fault=HaloFault(3, 1, neighbor, kind))
    solver.run(3)
    with pytest.raises(HaloMismatchError) as err:
        solver.step()
    assert (err.value.step, err.value.part, err.value.neighbor) == (3, 1, neighbor)
    assert f"step 3, partition 1, neighbor {neighbor}" in str(err.value)


def test_unverified_reorder_corrupts_the_result():
    mesh, state, cfg = setup()
    p = partition(mesh, 4)
    fault = HaloFault(2, 0, p.neighbors(0)[0])
    solver = DistributedSolver(mesh, p, state, cfg, CLUSTER, verify_ids=False, fault=fault)
    solver.run(5)
    assert not solver.gather().bitwise_equal(ReferenceSolver(mesh, state, cfg).run(5))


def test_streamed_receive_interleaves_neighbors():
    # halo messages span several frames, so segments of different
    # neighbors interleave in the consumer stream
    mesh = generate_rect_mesh(120, 90, "east", cell_size=100.0)
    state = bump_state(mesh)
    cfg = SolverConfig(dt=stable_dt(mesh, state, SolverConfig(dt=1.0)))
    p = partition(mesh, 4)
    cluster = get_preset("switch-udp-pl")
    with pytest.raises(HaloMismatchError):
        DistributedSolver(mesh, p, state, cfg, cluster, streamed_recv=True).step()
    # without id checks the state silently differs from the reference
    solver = DistributedSolver(mesh, p, state, cfg, cluster, streamed_recv=True, verify_ids=False)
    solver.step()
    assert not solver.gather().bitwise_equal(ReferenceSolver(mesh, state, cfg).run(1))


def test_timings_follow_the_exchange():
    mesh, state, cfg = setup()
    solver = DistributedSolver(mesh, partition(mesh, 4), state, cfg, get_preset("mpi-pcie-baseline"))
    (timing, *_), = solver.run(1)
    assert timing.arrival_cycles > timing.compute_cycles  # host MPI cannot hide behind a tiny core
    assert timing.stall_cycles == timing.arrival_cycles - timing.compute_cycles


def test_state_size_mismatch():
    mesh, state, cfg = setup()
    with pytest.raises(ConfigurationError):
        DistributedSolver(mesh, partition(mesh, 2), state.take(np.arange(5)), cfg, CLUSTER)
