from __future__ import annotations

from dataclasses import asdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interfpga.errors import ConfigurationError
from interfpga.mesh import (
    Method,
    generate_rect_mesh,
    neighbor_count_violations,
    partition,
    partition_stats,
    write_stats_csv,
)
from oracles import brute_halos, brute_stats, jittered_mesh

METHODS = list(Method)


def test_single_partition_has_no_halo():
    m = generate_rect_mesh(4, 4)
    p = partition(m, 1)
    assert p.send == ({},) and p.recv == ({},)
    stats, worst = partition_stats(p, m)
    assert stats[0].e_core == 32 and stats[0].e_send == stats[0].e_recv == 0
    assert worst.n_max == 0 and worst.halo_bytes_max == 0


def test_two_way_split_of_a_square():
    m = generate_rect_mesh(4, 4)
    p = partition(m, 2)
    assert p.sizes().tolist() == [16, 16]
    # a straight cut through a 4x4 grid: 4 cells on each side, one triangle per cell row
    # touches the cut, found independently by comparing vertex sets
    assert {k: len(v) for k, v in brute_halos(m, p.assignment).items()} == {(0, 1): 4, (1, 0): 4}


@pytest.mark.parametrize("method", METHODS, ids=lambda m: m.value)
@pytest.mark.parametrize("k", [1, 2, 3, 5, 8])
def test_halos_and_stats_match_brute_force(method, k):
    m = jittered_mesh(9, 7)
    p = partition(m, k, method)
    halos = brute_halos(m, p.assignment)
    got = {(a, b): ids.tolist() for a in range(k) for b, ids in p.send[a].items()}
    assert got == halos
    stats, _ = partition_stats(p, m, 32)
    assert [{k_: v for k_, v in asdict(s).items() if k_ != "d_ext"} for s in stats] == \
        brute_stats(m, p.assignment, k, 32)


@pytest.mark.parametrize("method", METHODS, ids=lambda m: m.value)
def test_halo_symmetry(method):
    m = generate_rect_mesh(15, 11, "south")
    p = partition(m, 6, method)
    for a in range(p.k):
        for b, ids in p.send[a].items():
            assert p.recv[b][a] is ids
            assert a in p.send[b]  # adjacency is mutual
            assert np.all(np.diff(ids) > 0)
            assert np.all(p.assignment[ids] == a)
        assert list(p.recv[a]) == sorted(p.recv[a])


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 14), st.integers(2, 14), st.integers(1, 12), st.sampled_from(METHODS))
def test_every_element_owned_once_and_balanced(nx, ny, k, method):
    m = generate_rect_mesh(nx, ny)
    k = min(k, m.n_elements)
    p = partition(m, k, method)
    sizes = p.sizes()
    assert sizes.sum() == m.n_elements and sizes.min() >= 1
    assert sizes.max() - sizes.min() <= 1
    assert sizes.max() / (m.n_elements / k) <= 1.2


def test_k_outside_range():
    m = generate_rect_mesh(2, 2)
    with pytest.raises(ConfigurationError):
        partition(m, 9)
    with pytest.raises(ConfigurationError):
        partition(m, 0)


@pytest.mark.parametrize("method", METHODS, ids=lambda m: m.value)
def test_deterministic(method):
    m = jittered_mesh(8, 8)
    a, b = partition(m, 7, method), partition(m, 7, method)
    assert np.array_equal(a.assignment, b.assignment)


def test_worst_case_and_bytes():
    m = generate_rect_mesh(12, 12)
    p = partition(m, 4)
    stats, worst = partition_stats(p, m, bytes_per_element=24, d_ext=7.0)
    assert worst.n_max == max(s.n_neighbors for s in stats)
    assert worst.e_core_min == min(s.e_core for s in stats)
    assert worst.halo_bytes_max % 24 == 0
    assert all(s.d_ext == 7.0 for s in stats)


def test_neighbor_count_report():
    m = generate_rect_mesh(20, 20)
    violations, n_max = neighbor_count_violations(m, [1, 2, 4, 8])
    assert n_max[0] == 0 and n_max[1] == 1
    assert violations == [(a, b) for a, b, x, y in zip([1, 2, 4], [2, 4, 8], n_max, n_max[1:]) if y < x]


def test_stats_csv(tmp_path):
    m = generate_rect_mesh(4, 4)
    stats, _ = partition_stats(partition(m, 2), m)
    write_stats_csv(stats, tmp_path / "s.csv")
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header == "part,size,e_core,e_send,e_recv,n_neighbors,largest_halo_bytes,d_ext"
