import numpy as np
import pytest

from barystress import verify
from barystress.geometry import SplitSimplex, reference_simplex


def test_check_dimensions_2d_values():
    entries = {(e.name, e.k): e for e in verify.check_dimensions(2, ks=(1, 2))}
    assert entries[("linear-phi-split", 1)].constructed == 15
    assert entries[("linear-reduced", 1)].constructed == 12
    assert entries[("linear-rm", 1)].constructed == 9
    assert entries[("high-phi-split", 2)].constructed == 36
    assert entries[("high-reduced", 2)].constructed == 21
    assert entries[("high-psi", 2)].constructed == 21
    assert entries[("composite-formula-k1", 1)].ok


def test_check_dimensions_3d_values():
    entries = {(e.name, e.k): e for e in verify.check_dimensions(3, ks=(1, 2))}
    assert entries[("linear-phi-split", 1)].constructed == 42
    assert entries[("linear-reduced", 1)].constructed == 36
    assert entries[("linear-rm", 1)].constructed == 24
    assert entries[("high-phi-split", 2)].constructed == 132
    assert entries[("high-phi-nn", 2)].constructed == 150
    assert entries[("high-phi-nn", 2)].ok


def test_formula_value_d3_k1():
    assert verify.dim_composite_split(3, 1) == 42  # half of 4 C(3,1) 7


def test_rigidity_dimensions():
    for d in (2, 3):
        rep = verify.check_rigidity(d)
        assert rep["ok"]
        assert rep["k0"][0] == d * (d + 1) // 2
        assert rep["k1"][0] == d * (d + 1) * (2 * d + 1) // 2


def test_vertex_rigidity():
    assert verify.vertex_rigidity(2)
    assert verify.vertex_rigidity(3)


def test_brute_force_counts():
    split = SplitSimplex(reference_simplex(2))
    dim0, _ = verify.brute_force_intersection(split, 0)
    assert dim0 == 3
    dim2, basis = verify.brute_force_intersection(split, 2)
    assert dim2 >= 36  # conjecture compares to 36; containment is guaranteed
    assert basis.shape[1] == dim2


def test_div_range_examples():
    rep = verify.check_div_range(2, 2)
    assert rep["cell_rank"] == (3, 3)
    assert rep["ok"]
    rep3 = verify.check_div_range(2, 3)
    assert rep3["cell_rank"] == (9, 9)
    assert rep3["ok"]


def test_div_range_3d():
    rep = verify.check_div_range(3, 2)
    assert rep["cell_rank"] == (6, 6)
    assert rep["split_rank"][0] == rep["split_rank"][1]
    assert rep["ok"]


def test_infsup_beta_positive_small():
    rep = verify.infsup_constant(2, 2, "psi", ns=(1, 2))
    assert rep.min_beta > 1e-8
    assert rep.ratio < 1.5


def test_infsup_rm_pair():
    rep = verify.infsup_constant(2, 1, "rm-rm", ns=(1, 2))
    assert rep.min_beta > 1e-8


def test_infsup_unknown_pair():
    from barystress.errors import DomainError
    with pytest.raises(DomainError):
        verify.infsup_constant(2, 2, "bogus")


def test_infsup_projected_variant_matches():
    exact = verify.infsup_constant(2, 2, "psi", ns=(1,), div_variant="exact")
    proj = verify.infsup_constant(2, 2, "psi", ns=(1,), div_variant="projected")
    assert abs(exact.betas[0] - proj.betas[0]) < 1e-12


def test_negative_control_containment():
    # the enriched space contains the plain one, so its constant cannot be smaller
    rep = verify.infsup_negative_control(2, 2, 2)
    assert rep["beta_enriched"] >= rep["beta_plain"] - 1e-10
    assert rep["beta_plain"] > 0


def test_rate_table_mechanics(tmp_path):
    table = verify.RateTable(
        method="hybrid", d=2, k=2, levels=[2, 4], hs=[0.5, 0.25],
        ndofs=[10, 40],
        errors=[{"sigma_l2": 1.0, "sigma_hdiv": 2.0, "u_l2": 0.5,
                 "super_1h": 1.0, "post_eps": 1.0},
                {"sigma_l2": 0.125, "sigma_hdiv": 0.5, "u_l2": 0.125,
                 "super_1h": 0.125, "post_eps": 0.125}])
    rates = table.rates()
    assert abs(rates["sigma_l2"][1] - 3.0) < 1e-12
    assert abs(rates["sigma_hdiv"][1] - 2.0) < 1e-12
    path = tmp_path / "rates.csv"
    table.write_csv(path)
    text = path.read_text().splitlines()
    assert text[0].startswith("level,h,dofs,err_sigma_L2")
    assert len(text) == 3


def test_convergence_study_runs_small():
    table = verify.convergence_study(
        {"d": 2, "k": 2, "method": "hybrid", "ns": [1, 2], "postprocess": False})
    assert len(table.levels) == 2
    assert table.errors[1]["sigma_l2"] < table.errors[0]["sigma_l2"]


def test_validate_family_report():
    rep = verify.validate_family(2, 2, "high-psi", n_random_cells=1)
    assert rep["ok"] and rep["dim_matches_formula"]
