import numpy as np
import pytest

from barystress.errors import DomainError
from barystress.frames import (build_frame, global_normal_frame, pair_field,
                               pair_field_span_dim, sym_decompose)
from barystress.geometry import Simplex, SplitSimplex, reference_simplex
from barystress.poly import entity_quadrature, n_sym, sym_vec_matrix
from barystress.simplex import IndexSet, subsimplices


@pytest.fixture(scope="module")
def random_tet():
    rng = np.random.default_rng(3)
    return Simplex(rng.normal(size=(4, 3)))


def test_vertex_frame_spans(random_tet):
    f = IndexSet((0,), 3)
    fr = build_frame(f, random_tet)
    assert fr.tangents.shape == (0, 3)
    normals = np.array([fr.face_normals[i] for i in fr.star])
    assert np.linalg.matrix_rank(normals) == 3


def test_vertex_duality_gradients():
    cell = reference_simplex(3)
    g = cell.grad_lambda
    t = cell.vertices - cell.vertices[0]
    dual = g[1:] @ t[1:].T
    assert np.allclose(dual, np.eye(3), atol=1e-14)


def test_edge_frame_dual_pairing(random_tet):
    for f in subsimplices(3, 1):
        fr = build_frame(f, random_tet)
        pair = np.array([[fr.scaled_dual[i] @ fr.face_normals[j]
                          for j in fr.star] for i in fr.star])
        assert np.allclose(pair, np.eye(len(fr.star)), atol=1e-12)
        for i in fr.star:
            # tn normal is orthogonal to the tangent plane of f
            assert np.abs(fr.tangents @ fr.tn_normals[i]).max() < 1e-12


def test_frame_domain_errors(random_tet):
    with pytest.raises(DomainError):
        build_frame(IndexSet((0, 1, 2, 3), 3), random_tet)  # full cell
    with pytest.raises(DomainError):
        build_frame(IndexSet((0, 4), 3), random_tet)  # contains the center


def test_sym_decompose_dims_3d(random_tet):
    ss = sym_decompose(IndexSet((0, 1), 3), random_tet)
    assert (len(ss.tt), len(ss.nn), len(ss.tn)) == (1, 3, 2)
    assert np.linalg.matrix_rank(ss.stacked()) == 6


def test_sym_decompose_vertex_2d():
    cell = reference_simplex(2)
    ss = sym_decompose(IndexSet((0,), 2), cell)
    assert (len(ss.tt), len(ss.nn), len(ss.tn)) == (0, 3, 0)
    assert np.linalg.matrix_rank(ss.stacked()) == 3


@pytest.mark.parametrize("d", [2, 3, 4])
def test_sym_decompose_rank_all_entities(d):
    cell = reference_simplex(d)
    for ell in range(0, d + 1):
        for f in subsimplices(d, ell):
            ss = sym_decompose(f, cell)
            assert len(ss.tt) == ell * (ell + 1) // 2
            assert len(ss.nn) == (d - ell) * (d - ell + 1) // 2
            assert len(ss.tn) == ell * (d - ell)
            assert np.linalg.matrix_rank(ss.stacked()) == n_sym(d)


def test_pair_field_antisymmetry_and_support(random_tet):
    split = SplitSimplex(random_tet)
    f = IndexSet((0,), 3)
    p12 = pair_field(f, 1, 2, split)
    p21 = pair_field(f, 2, 1, split)
    assert np.abs(p12.coeffs + p21.coeffs).max() < 1e-15
    assert np.abs(p12.coeffs[[0, 3]]).max() == 0.0  # support is two split cells
    with pytest.raises(DomainError):
        pair_field(f, 0, 1, split)
    with pytest.raises(DomainError):
        pair_field(f, 1, 1, split)


def test_pair_field_conformity(random_tet):
    split = SplitSimplex(random_tet)
    f = IndexSet((0,), 3)
    p12 = pair_field(f, 1, 2, split)
    scale = max(np.abs(p12.coeffs).max(), 1.0)
    for rec in split.interior_faces:
        if 0 in rec.pair:
            continue  # jumps are allowed on the faces of the anchor's split cell
        i, j = rec.pair
        pts, _, _ = entity_quadrature(rec.facet, 2)
        vi = p12.eval_subcell(i, split.subcells[i].barycentric(pts))
        vj = p12.eval_subcell(j, split.subcells[j].barycentric(pts))
        nmat = sym_vec_matrix(rec.normal, 3)
        assert np.abs((vi - vj) @ nmat.T).max() < 1e-13 * scale


@pytest.mark.parametrize("d", [2, 3, 4])
def test_pair_field_span_dims(d):
    split = SplitSimplex(reference_simplex(d))
    for ell in range(0, d - 1):
        for f in subsimplices(d, ell):
            star = list(f.complement_star().labels)
            fields = [pair_field(f, star[a], star[b], split).coeffs.ravel()
                      for a in range(len(star)) for b in range(a + 1, len(star))]
            mat = np.array(fields)
            expected = pair_field_span_dim(d, ell)
            assert np.linalg.matrix_rank(mat) == expected == len(fields)


@pytest.mark.parametrize("d", [2, 3])
def test_pair_constant_concat_rank(d):
    # matched-pair fields are independent of the piecewise constants
    split = SplitSimplex(reference_simplex(d))
    for f in subsimplices(d, 0):
        star = list(f.complement_star().labels)
        fields = [pair_field(f, star[a], star[b], split).coeffs.ravel()
                  for a in range(len(star)) for b in range(a + 1, len(star))]
        consts = []
        for s in range(n_sym(d)):
            arr = np.zeros((d + 1, 1, n_sym(d)))
            arr[:, 0, s] = 1.0
            consts.append(arr.ravel())
        mat = np.array(consts + fields)
        assert np.linalg.matrix_rank(mat) == n_sym(d) + pair_field_span_dim(d, 0)


def test_global_normal_frame_deterministic_and_orthonormal():
    split = SplitSimplex(reference_simplex(3))
    ent = split.entity((0, 2, 4))
    n1 = global_normal_frame(ent)
    n2 = global_normal_frame(split.entity((0, 2, 4)))
    assert np.allclose(n1, n2, atol=1e-15)
    assert np.allclose(n1 @ n1.T, np.eye(len(n1)), atol=1e-13)
    assert np.abs(n1 @ ent.edges).max() < 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
def test_trace_injectivity_on_pair_enriched_constants(d):
    """The face traces pin the normal-block constants plus the pair fields."""
    cell = reference_simplex(d)
    split = SplitSimplex(cell)
    for ell in range(0, d - 1):
        for f in subsimplices(d, ell):
            ss = sym_decompose(f, cell)
            nf_basis = np.vstack([b for b in (ss.nn, ss.tn) if len(b)])
            star = list(f.complement_star().labels)
            fields = []
            for t in nf_basis:
                arr = np.zeros((d + 1, 1, n_sym(d)))
                arr[:] = t
                fields.append(arr)
            for a in range(len(star)):
                for b in range(a + 1, len(star)):
                    fields.append(pair_field(f, star[a], star[b], split).coeffs[:, None][:, 0:1])
            fields = [fl.reshape(d + 1, n_sym(d)) for fl in fields]
            rows = []
            for fl in fields:
                col = []
                for i in star:
                    nmat = sym_vec_matrix(cell.outward_normal(i), d)
                    col.append(nmat @ fl[i])
                rows.append(np.concatenate(col))
            mat = np.array(rows).T  # (d(d-ell), nfields)
            assert mat.shape[1] == d * (d - ell)
            assert np.linalg.matrix_rank(mat) == d * (d - ell)
