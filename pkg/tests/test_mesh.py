import numpy as np
import pytest

from barystress.errors import ConformityError, DomainError, GeometryError
from barystress.geometry import geometry_pack
from barystress.mesh import (barycentric_refine, build_mesh, read_mesh,
                             uniform_box_mesh, write_mesh)


def test_single_triangle_faces():
    mesh = build_mesh(np.array([[0.0, 0], [1, 0], [0, 1]]), np.array([[0, 1, 2]]))
    assert mesh.n_faces == 3 and mesh.boundary.all()


def test_two_triangle_square():
    mesh = uniform_box_mesh(2, 1)
    assert mesh.n_cells == 2
    assert mesh.n_faces == 5 and int(mesh.boundary.sum()) == 4


def test_box_counts_euler():
    mesh = uniform_box_mesh(2, 2)
    assert mesh.n_cells == 8
    assert mesh.n_faces == 16
    # Euler relation for a planar disk-like complex: V - E + F = 1
    assert mesh.n_vertices - mesh.n_faces + mesh.n_cells == 1


def test_kuhn_split_counts():
    mesh = uniform_box_mesh(3, 1)
    assert mesh.n_cells == 6
    vol = sum(mesh.cell_geometry(c).measure for c in range(mesh.n_cells))
    assert abs(vol - 1.0) < 1e-13
    mesh2 = uniform_box_mesh(3, 2)
    assert mesh2.n_cells == 48


def test_box_mesh_domain_errors():
    with pytest.raises(DomainError):
        uniform_box_mesh(4, 1)
    with pytest.raises(DomainError):
        uniform_box_mesh(2, 0)


def test_degenerate_cell_rejected():
    verts = np.array([[0.0, 0], [1, 0], [2, 0]])
    with pytest.raises(GeometryError):
        build_mesh(verts, np.array([[0, 1, 2]]))


def test_mismatched_facet_pair_rejected():
    # a planar quad split one way above, the other way below
    verts = np.array([
        [0, 0, 0.0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0.4, 0.4, 1.0], [0.6, 0.4, -1.0]])
    cells = np.array([
        [0, 1, 2, 4], [0, 2, 3, 4],
        [0, 1, 3, 5], [1, 2, 3, 5]])
    with pytest.raises(ConformityError):
        build_mesh(verts, cells)


def test_too_many_incident_cells_rejected():
    verts = np.array([[0.0, 0], [1, 0], [0, 1], [1, 1], [-1, 1]])
    cells = np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]])
    with pytest.raises(ConformityError):
        build_mesh(verts, cells)


def test_refinement_counts_and_volume():
    mesh = uniform_box_mesh(2, 2)
    sm = barycentric_refine(mesh)
    assert sm.fine.n_cells == 3 * mesh.n_cells
    vol_c = sum(mesh.cell_geometry(c).measure for c in range(mesh.n_cells))
    vol_f = sum(sm.fine.cell_geometry(c).measure for c in range(sm.fine.n_cells))
    assert abs(vol_c - vol_f) <= 1e-13 * vol_c
    for c in range(mesh.n_cells):
        assert len(sm.interior_fine_faces(c)) == 3


def test_refinement_tet():
    mesh = uniform_box_mesh(3, 1)
    sm = barycentric_refine(mesh)
    assert sm.fine.n_cells == 4 * 6
    assert len(sm.interior_fine_faces(0)) == 6
    # barycenter is the vertex average
    c = 0
    vc = sm.fine.vertices[sm.barycenter_vertex[c]]
    assert np.allclose(vc, mesh.vertices[mesh.cells[c]].mean(axis=0), atol=1e-14)


def test_fine_mesh_conforming():
    sm = barycentric_refine(uniform_box_mesh(2, 2))
    counts = (sm.fine.face_cells >= 0).sum(axis=1)
    assert set(counts) <= {1, 2}


def test_face_normals_fixed_and_consistent():
    mesh = uniform_box_mesh(2, 2)
    for fid in mesh.interior_face_ids():
        c1, c2 = mesh.face_cells[fid]
        i1 = int(np.where(mesh.cell_faces[c1] == fid)[0][0])
        i2 = int(np.where(mesh.cell_faces[c2] == fid)[0][0])
        n1 = mesh.cell_geometry(c1).outward_normal(i1)
        n2 = mesh.cell_geometry(c2).outward_normal(i2)
        nf = mesh.face_normals[fid]
        assert np.allclose(n1, -n2, atol=1e-13)
        assert np.allclose(nf, mesh.face_sign[c1, i1] * n1, atol=1e-13)
        assert np.allclose(nf, mesh.face_sign[c2, i2] * n2, atol=1e-13)
    for fid in np.where(mesh.boundary)[0]:
        c = mesh.face_cells[fid, 0]
        i = int(np.where(mesh.cell_faces[c] == fid)[0][0])
        assert np.allclose(mesh.face_normals[fid],
                           mesh.cell_geometry(c).outward_normal(i), atol=1e-13)


def test_geometry_pack_identities():
    mesh = uniform_box_mesh(3, 1)
    for c in range(mesh.n_cells):
        cell = mesh.cell_geometry(c)
        gp = geometry_pack(cell)
        assert np.abs(gp.center_tangents.sum(axis=0)).max() < 1e-13
        assert np.abs(gp.grad_lambda.sum(axis=0)).max() < 1e-14
        dual = gp.grad_lambda[1:] @ gp.tangents[0, 1:].T
        assert np.allclose(dual, np.eye(3), atol=1e-13)
        for i in range(4):
            assert abs(gp.heights[i] - 1.0 / np.linalg.norm(gp.grad_lambda[i])) < 1e-14


def test_reference_triangle_gradients():
    mesh = build_mesh(np.array([[0.0, 0], [1, 0], [0, 1]]), np.array([[0, 1, 2]]))
    gp = geometry_pack(mesh.cell_geometry(0))
    assert np.allclose(gp.grad_lambda[1], [1.0, 0.0], atol=1e-14)
    assert np.allclose(gp.grad_lambda[2], [0.0, 1.0], atol=1e-14)


def test_split_face_orthogonality():
    from barystress.geometry import SplitSimplex
    mesh = uniform_box_mesh(3, 1)
    cell = mesh.cell_geometry(2)
    split = SplitSimplex(cell)
    scale = cell.diameter
    for rec in split.interior_faces:
        i, j = rec.pair
        tic = split.center - cell.vertices[i]
        tjc = split.center - cell.vertices[j]
        assert abs((tic + tjc) @ rec.normal) < 1e-13 * scale
        for m in range(4):
            if m not in (i, j):
                tmc = split.center - cell.vertices[m]
                assert abs(tmc @ rec.normal) < 1e-13 * scale


def test_mesh_io_round_trip(tmp_path):
    mesh = uniform_box_mesh(2, 2)
    path = tmp_path / "mesh.txt"
    write_mesh(mesh, path)
    back = read_mesh(path)
    assert np.allclose(back.vertices, mesh.vertices)
    assert (back.cells == mesh.cells).all()


def test_read_mesh_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 3 1\n0 0\n1 0\n")
    with pytest.raises(DomainError):
        read_mesh(path)
