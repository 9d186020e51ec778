from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interfpga.errors import ConfigurationError
from interfpga.mesh import BoundaryTag, Mesh, MeshError, generate_rect_mesh, load_mesh, save_mesh
from oracles import brute_adjacency, jittered_mesh


def write(tmp_path, text: str):
    path = tmp_path / "m.mesh"
    path.write_text(text)
    return path


def test_single_cell():
    m = generate_rect_mesh(1, 1, "east")
    assert m.n_elements == 2
    assert m.n_edges == 5
    assert (m.edge_elements[:, 1] >= 0).sum() == 1
    assert (m.edge_tags == BoundaryTag.SEA).sum() == 1
    assert (m.edge_tags == BoundaryTag.LAND).sum() == 3
    assert m.areas.tolist() == [0.5, 0.5]


@given(st.integers(1, 12), st.integers(1, 12), st.sampled_from(["south", "east", "north", "west", None]))
@settings(max_examples=30, deadline=None)
def test_rect_counts(nx, ny, side):
    m = generate_rect_mesh(nx, ny, side)
    assert m.n_elements == 2 * nx * ny
    assert m.n_edges == nx * (ny + 1) + ny * (nx + 1) + nx * ny
    boundary = m.edge_elements[:, 1] < 0
    assert boundary.sum() == 2 * (nx + ny)
    sea = {"south": nx, "north": nx, "east": ny, "west": ny, None: 0}[side]
    assert (m.edge_tags == BoundaryTag.SEA).sum() == sea
    assert np.all(m.edge_tags[~boundary] == BoundaryTag.INTERIOR)
    assert m.areas.sum() == pytest.approx(nx * ny)


def test_neighbors_match_brute_force():
    m = jittered_mesh(6, 5)
    adj = brute_adjacency(m)
    for e in range(m.n_elements):
        nb = set(m.neighbors[e].tolist()) - {-1}
        assert nb == adj[e]


def test_edge_normals_are_unit_and_outward():
    m = jittered_mesh(5, 4)
    n = m.edge_normals
    assert np.allclose(np.hypot(n[:, 0], n[:, 1]), 1.0)
    mid = m.vertices[m.edges].mean(axis=1)
    outward = ((mid - m.centroids[m.edge_elements[:, 0]]) * n).sum(axis=1)
    assert np.all(outward > 0)


def test_generate_rejects_bad_arguments():
    with pytest.raises(ConfigurationError):
        generate_rect_mesh(0, 3)
    with pytest.raises(ConfigurationError):
        generate_rect_mesh(2, 2, "up")


@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from(["south", "east", None]))
@settings(max_examples=15, deadline=None)
def test_save_load_round_trip(tmp_path_factory, nx, ny, side):
    m = generate_rect_mesh(nx, ny, side, cell_size=0.1)
    path = tmp_path_factory.mktemp("mesh") / "m.mesh"
    save_mesh(m, path)
    assert load_mesh(path) == m


def test_jittered_round_trip(tmp_path):
    m = jittered_mesh(7, 3)
    save_mesh(m, tmp_path / "j.mesh")
    back = load_mesh(tmp_path / "j.mesh")
    assert back == m
    assert np.array_equal(back.vertices, m.vertices)


GOOD = """\
# two triangles
vertices 4
triangles 2
0 0
1 0
1 1
0 1
0 1 2 L S -
0 2 3 - L L
"""


def test_load_good_file(tmp_path):
    m = load_mesh(write(tmp_path, GOOD))
    assert m.n_elements == 2
    assert (m.edge_tags == BoundaryTag.SEA).sum() == 1


def test_untagged_boundary_defaults_to_land(tmp_path):
    text = GOOD.replace(" L S -", "").replace(" - L L", "")
    m = load_mesh(write(tmp_path, text))
    assert (m.edge_tags == BoundaryTag.LAND).sum() == 4


@pytest.mark.parametrize("text,line,needle", [
    (GOOD.replace("0 2 3 - L L", "0 2 7 - L L"), 9, "triangle 1 references a missing vertex"),
    (GOOD.replace("0 2 3 - L L", "0 1 2 - L L"), 9, "triangle 1 duplicates triangle 0"),
    (GOOD.replace("0 2 3 - L L", "0 3 2 - L L"), 9, "triangle 1 is not counterclockwise"),
    (GOOD.replace("0 2 3 - L L", "0 2 3 S L L"), 9, "tags an interior edge"),
    (GOOD.replace("0 2 3 - L L", "0 2 3 - X L"), 9, "boundary tags must be"),
    (GOOD.replace("1 1\n", "1 one\n"), 6, "vertex 2"),
    (GOOD.replace("triangles 2", "triangles 3"), 9, "expected 4 vertex and 3 triangle lines"),
    (GOOD.replace("vertices 4", "verts 4"), 2, "expected 'vertices N'"),
])
def test_malformed_files_name_the_line(tmp_path, text, line, needle):
    with pytest.raises(MeshError) as err:
        load_mesh(write(tmp_path, text))
    assert needle in str(err.value)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_edge_with_three_triangles():
    verts = [(0, 0), (1, 0), (0.5, 1), (0.5, -1), (2, 2)]
    with pytest.raises(MeshError, match="more than two"):
        Mesh.build(verts, [(0, 1, 2), (0, 3, 1), (0, 1, 4)])


def test_missing_file_is_a_configuration_error(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read mesh"):
        load_mesh(tmp_path / "nope.mesh")
