"""Mesh construction, validation, and the text round-trip."""

import numpy as np
import pytest

from sllgfem import Mesh, MeshError, build_structured_mesh
from sllgfem.mesh import read_mesh_text, write_mesh_text


def test_one_square_split():
    mesh = build_structured_mesh(2, 1)
    assert mesh.n_vertices == 4
    assert mesh.n_cells == 2
    assert np.isclose(mesh.volumes.sum(), 1.0)


def test_2d_counts():
    mesh = build_structured_mesh(2, 4)
    assert mesh.n_vertices == 25
    assert mesh.n_cells == 32
    assert np.isclose(mesh.volumes.sum(), 1.0)


def test_3d_counts():
    mesh = build_structured_mesh(3, 2)
    assert mesh.n_vertices == 27
    assert mesh.n_cells == 48
    assert np.isclose(mesh.volumes.sum(), 1.0)


def test_zero_divisions_rejected():
    with pytest.raises(ValueError):
        build_structured_mesh(2, 0)


def test_bad_dim_rejected():
    with pytest.raises(ValueError):
        build_structured_mesh(4, 2)


def test_all_measures_positive():
    for dim, n in ((2, 3), (3, 2)):
        mesh = build_structured_mesh(dim, n)
        assert (mesh.volumes > 0).all()


def test_h_is_max_diameter():
    assert np.isclose(build_structured_mesh(2, 4).h, np.sqrt(2.0) / 4)
    assert np.isclose(build_structured_mesh(3, 2).h, np.sqrt(3.0) / 2)


def test_boundary_facet_counts():
    mesh = build_structured_mesh(2, 4)
    # 4 sides x 4 edges, plus no diagonal on the boundary
    assert len(mesh.boundary_facets) == 16
    assert (mesh.facet_markers == 1).all()
    mesh3 = build_structured_mesh(3, 2)
    # 6 faces x (2 triangles per square face x 4 squares)
    assert len(mesh3.boundary_facets) == 48


def test_negative_cell_reoriented():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mesh = Mesh(vertices, np.array([[0, 2, 1]]))  # clockwise on input
    assert mesh.volumes[0] > 0


def test_degenerate_cell_named():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(MeshError, match="cell 0"):
        Mesh(vertices, np.array([[0, 1, 2]]))


def test_index_out_of_range():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError, match="out of range"):
        Mesh(vertices, np.array([[0, 1, 3]]))


def test_overshared_facet_rejected():
    # three triangles hanging off one edge
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
                         [1.0, 1.0], [-1.0, 0.5]])
    cells = np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]])
    with pytest.raises(MeshError, match="more than two"):
        Mesh(vertices, cells)


def test_arrays_read_only():
    mesh = build_structured_mesh(2, 2)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 7.0
    with pytest.raises(ValueError):
        mesh.cells[0, 0] = 0


def test_text_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    mesh = build_structured_mesh(2, 3)
    jitter = rng.uniform(-0.01, 0.01, size=mesh.vertices.shape)
    inner = (mesh.vertices[:, 0] > 0) & (mesh.vertices[:, 0] < 1) \
        & (mesh.vertices[:, 1] > 0) & (mesh.vertices[:, 1] < 1)
    verts = mesh.vertices + jitter * inner[:, None]
    mesh = Mesh(verts, mesh.cells)

    p = tmp_path / "mesh.txt"
    write_mesh_text(mesh, p)
    back = read_mesh_text(p)
    assert back.dim == mesh.dim
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.cells, mesh.cells)

    header = p.read_text().splitlines()[0].split()
    assert header == ["2", str(mesh.n_vertices), str(mesh.n_cells)]


def test_text_round_trip_3d(tmp_path):
    mesh = build_structured_mesh(3, 2)
    p = tmp_path / "mesh3.txt"
    write_mesh_text(mesh, p)
    back = read_mesh_text(p)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.cells, mesh.cells)


def test_truncated_file_rejected(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 4 2\n0 0\n1 0\n")
    with pytest.raises(MeshError, match="tokens"):
        read_mesh_text(p)
