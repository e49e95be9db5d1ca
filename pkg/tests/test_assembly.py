import numpy as np
import pytest

from barystress.assembly import (DGSpace, ElasticityProblem, GlobalSpace,
                                 RMSpace, error_norms, global_jump_max,
                                 hybrid_jump_max, manufactured_problem,
                                 polynomial_problem, postprocess_displacement,
                                 solve_hybrid, solve_linear_pair,
                                 solve_mixed_conforming, solve_stabilized)
from barystress.errors import DomainError
from barystress.mesh import barycentric_refine, build_mesh, uniform_box_mesh
from barystress.poly import (compliance_matrix, compliance_matrix_devtr,
                             entity_quadrature, n_sym, sym_weights)


@pytest.fixture(scope="module")
def sm2():
    return barycentric_refine(uniform_box_mesh(2, 1))


@pytest.fixture(scope="module")
def sm3():
    return barycentric_refine(uniform_box_mesh(3, 1))


def test_compliance_two_forms_agree():
    rng = np.random.default_rng(0)
    for d in (2, 3):
        for lam in (0.0, 1.0, 1e4):
            a1 = compliance_matrix(d, 1.3, lam)
            a2 = compliance_matrix_devtr(d, 1.3, lam)
            assert np.abs(a1 - a2).max() < 1e-14
            s = rng.normal(size=n_sym(d))
            assert np.abs(a1 @ s - a2 @ s).max() < 1e-14


def test_global_space_dofs_closed_form(sm2):
    gs = GlobalSpace(sm2, "high-reduced", 2)
    # 5 faces x 2 dim P2(F) components + 2 cells x dim P0(T;S)
    assert gs.face_block == 6
    assert gs.ndof == 5 * 6 + 2 * 3 == 36
    gs_rm = GlobalSpace(sm2, "linear-rm", 1)
    assert gs_rm.face_block == 3  # P1(F) n_F (2) + face rigid motions (1)
    assert gs_rm.ndof == 5 * 3
    mask = gs_rm.boundary_dof_mask()
    assert int(mask.sum()) == int(sm2.coarse.boundary.sum()) * 3


def test_global_space_face_dof_shared(sm2):
    gs = GlobalSpace(sm2, "high-reduced", 2)
    fid = sm2.coarse.interior_face_ids()[0]
    c1, c2 = sm2.coarse.face_cells[fid]
    g1, g2 = gs.cell_dofs(c1), gs.cell_dofs(c2)
    shared = set(g1) & set(g2)
    assert len(shared) == gs.face_block


@pytest.mark.parametrize("family,k", [("linear-phi-split", 1), ("linear-reduced", 1),
                                      ("linear-rm", 1), ("high-phi-split", 2),
                                      ("high-phi-nn", 2), ("high-reduced", 2),
                                      ("high-psi", 2), ("rt-plus", 2)])
def test_global_conformity_every_family_2d(sm2, family, k):
    gs = GlobalSpace(sm2, family, k)
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(3):
        coeffs = rng.normal(size=gs.ndof)
        worst = max(worst, global_jump_max(gs.field(coeffs)))
    assert worst < 1e-11


def test_interpolation_reproduces_members(sm2):
    gs = GlobalSpace(sm2, "high-reduced", 2)
    rng = np.random.default_rng(2)

    def field(pts):
        x, y = pts[:, 0], pts[:, 1]
        out = np.zeros((len(pts), 3))
        out[:, 0] = 1.0 + x * y
        out[:, 1] = x - y ** 2
        out[:, 2] = y + x ** 2
        return out

    coeffs = gs.interpolate(field)
    fld = gs.field(coeffs)
    for c in range(2):
        split = sm2.split(c)
        lams = rng.dirichlet(np.ones(3), size=4)
        for i in range(3):
            pts = split.subcells[i].point(lams)
            vals = fld.cell_field(c).eval_subcell(i, lams)
            assert np.abs(vals - field(pts)).max() < 1e-10


def test_zero_force_zero_solution(sm2):
    gs = GlobalSpace(sm2, "high-reduced", 2)
    zero = ElasticityProblem(d=2)
    sol = solve_stabilized(zero, gs)
    assert np.abs(sol.stress.coeffs).max() < 1e-12
    assert np.abs(sol.u_coeffs).max() < 1e-12


def test_patch_test_stabilized(sm2):
    gs = GlobalSpace(sm2, "high-reduced", 2)
    pp = polynomial_problem(2, 1.0, 2.0, degree=1)
    errs = error_norms(solve_stabilized(pp, gs), postprocess=False)
    assert errs["sigma_l2"] < 1e-9
    assert errs["u_l2"] < 1e-9


def test_patch_test_hybrid(sm2):
    pp = polynomial_problem(2, 1.0, 2.0, degree=1)
    sol = solve_hybrid(pp, sm2, 2)
    errs = error_norms(sol)
    assert errs["sigma_l2"] < 1e-9
    assert errs["u_l2"] < 1e-9
    assert errs["post_eps"] < 1e-8


def test_stabilized_needs_k2(sm2):
    gs = GlobalSpace(sm2, "linear-phi-split", 1)
    with pytest.raises(DomainError):
        solve_stabilized(ElasticityProblem(d=2), gs)


def test_hybrid_single_cell_no_multipliers():
    mesh = build_mesh(np.array([[0.0, 0], [1, 0], [0, 1]]), np.array([[0, 1, 2]]))
    sol = solve_hybrid(polynomial_problem(2, 1.0, 1.0, 1), barycentric_refine(mesh), 2)
    assert sol.info["condensed_ndof"] == 0
    assert error_norms(sol, postprocess=False)["sigma_l2"] < 1e-9


def test_hybrid_equals_conforming_2cell(sm2):
    prob = manufactured_problem(2)
    hyb = solve_hybrid(prob, sm2, 2)
    gs = GlobalSpace(sm2, "high-psi", 2)
    con = solve_mixed_conforming(prob, gs)
    dof_h = np.zeros(gs.ndof)
    for c in range(2):
        dof_h[gs.cell_dofs(c)] = gs.elements[c].dof_values(hyb.sigma_cell(c))
    scale = max(np.abs(con.stress.coeffs).max(), 1.0)
    assert np.abs(dof_h - con.stress.coeffs).max() < 1e-9 * scale
    uscale = max(np.abs(con.u_coeffs).max(), 1.0)
    assert np.abs(hyb.u_coeffs - con.u_coeffs).max() < 1e-9 * uscale


def test_hybrid_recovered_stress_conforming(sm2):
    sol = solve_hybrid(manufactured_problem(2), sm2, 2)
    assert hybrid_jump_max(sol) < 1e-9
    assert sol.info["condensed_min_pivot"] > 0


def test_hybrid_condensed_spd(sm2):
    sol = solve_hybrid(manufactured_problem(2), sm2, 2)
    assert sol.info["condensed_min_pivot"] > 0


def test_linear_pairs_solve(sm2):
    prob = manufactured_problem(2)
    for pair in ("split", "reduced-rm", "rm-rm"):
        sol = solve_linear_pair(prob, sm2, pair)
        errs = error_norms(sol, postprocess=False)
        assert np.isfinite(errs["sigma_l2"]) and errs["sigma_l2"] > 0


def test_linear_pair_rm_kernel_force():
    # a force with zero rigid-motion moments keeps the single-cell solve usable
    mesh = build_mesh(np.array([[0.0, 0], [1, 0], [0, 1]]), np.array([[0, 1, 2]]))
    sm = barycentric_refine(mesh)

    def f(pts):
        out = np.zeros((len(pts), 2))
        out[:, 0] = pts[:, 0] - 1.0 / 3.0  # zero mean, zero rotation moment
        return out

    prob = ElasticityProblem(d=2, body_force=f)
    sol = solve_linear_pair(prob, sm, "rm-rm")
    assert np.all(np.isfinite(sol.stress.coeffs))


def test_postprocess_exact_data(sm2):
    # with exact polynomial data the reconstruction returns the displacement
    pp = polynomial_problem(2, 1.0, 1.0, degree=3)
    sol = solve_hybrid(pp, sm2, 2)
    tspace, tcoeffs = postprocess_displacement(sol)
    rng = np.random.default_rng(4)
    for c in range(2):
        geom = sm2.coarse.cell_geometry(c)
        pts = geom.point(rng.dirichlet(np.ones(3), size=5))
        vals = tspace.field(c, tcoeffs[tspace.cell_dofs(c)]).eval_points(pts)
        exact = pp.exact_u(pts)
        assert np.abs(vals - exact).max() < 1e-8


def test_postprocess_zero(sm2):
    sol = solve_hybrid(ElasticityProblem(d=2), sm2, 2)
    tspace, tcoeffs = postprocess_displacement(sol)
    assert np.abs(tcoeffs).max() < 1e-11


def test_error_norms_exact_solution_zero(sm2):
    # a discrete field measured against itself has zero error
    prob = manufactured_problem(2)
    sol = solve_hybrid(prob, sm2, 2)
    total = 0.0
    for c in range(2):
        split = sm2.split(c)
        sig = sol.sigma_cell(c)
        for i, sub in enumerate(split.subcells):
            pts, w, lams = entity_quadrature(sub, 8)
            v1 = sig.eval_subcell(i, lams)
            v2 = sig.eval_points(pts)
            total += np.einsum("p,pc,c->", w, (v1 - v2) ** 2, sym_weights(2))
    assert np.sqrt(max(total, 0.0)) < 1e-11


def test_super_norm_continuous_field_no_face_terms(sm2):
    # with matching face data the 1,h-norm face terms vanish
    pp = polynomial_problem(2, 1.0, 1.0, degree=3)
    sol = solve_hybrid(pp, sm2, 2)
    errs = error_norms(sol)
    assert errs["super_1h"] < 1e-8


def test_lambda_robust_relative_errors():
    prob_fams = [manufactured_problem(2, 1.0, lam) for lam in (1.0, 1e4)]
    sm = barycentric_refine(uniform_box_mesh(2, 2))
    rels = []
    for prob in prob_fams:
        sol = solve_hybrid(prob, sm, 2)
        rels.append(error_norms(sol, postprocess=False)["sigma_l2_rel"])
    assert max(rels) / min(rels) < 5.0


def test_3d_hybrid_smoke(sm3):
    prob = manufactured_problem(3)
    sol = solve_hybrid(prob, sm3, 2)
    errs = error_norms(sol, postprocess=False)
    assert np.isfinite(errs["sigma_l2"])
    assert hybrid_jump_max(sol) < 1e-9
