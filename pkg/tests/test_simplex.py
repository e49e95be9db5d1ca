import pytest

from barystress.errors import DomainError
from barystress.simplex import (IndexSet, center_label, interior_face,
                                interior_subsimplices, split_cell, split_cells,
                                split_incidence, subsimplices)


def labels(sets):
    return {tuple(s.labels) for s in sets}


def test_edge_enumeration_triangle():
    assert labels(subsimplices(2, 1)) == {(0, 1), (0, 2), (1, 2)}


def test_vertex_enumeration_tet():
    assert labels(subsimplices(3, 0)) == {(0,), (1,), (2,), (3,)}
    assert len(subsimplices(3, 0)) == 4


def test_binomial_count_4d():
    assert len(subsimplices(4, 2)) == 10


def test_lexicographic_order():
    got = [tuple(s.labels) for s in subsimplices(3, 1)]
    assert got == sorted(got)


def test_subsimplices_range_error():
    with pytest.raises(DomainError):
        subsimplices(2, 3)
    with pytest.raises(DomainError):
        subsimplices(2, -1)


def test_complement_star_examples():
    assert IndexSet((0,), 3).complement_star().labels == (1, 2, 3)
    assert IndexSet((0, 2), 2).complement_star().labels == (1,)
    assert IndexSet((1, 3), 4).complement_star().labels == (0, 2, 4)


def test_complement_star_rejects_center():
    with pytest.raises(DomainError):
        IndexSet((0, center_label(2)), 2).complement_star()


def test_complement_center_examples():
    assert IndexSet((0, 1), 3).complement_center().labels == (2, 3, center_label(3))
    assert IndexSet((0,), 2).complement_center().labels == (1, 2, center_label(2))
    assert IndexSet((center_label(2),), 2).complement_center().labels == (0, 1, 2)


@pytest.mark.parametrize("d", range(1, 7))
def test_involutions_exhaustive(d):
    for ell in range(0, d):
        for f in subsimplices(d, ell):
            assert f.complement_star().complement_star() == f
    for ell in range(0, d + 1):
        for f in subsimplices(d, ell):
            assert f.complement_center().complement_center() == f
    for ell in range(0, d):
        for f in interior_subsimplices(d, ell + 1):
            assert f.complement_center().complement_center() == f


@pytest.mark.parametrize("d", range(1, 7))
def test_interior_faces_exclude_pair(d):
    c = center_label(d)
    for i in range(d + 1):
        for j in range(i + 1, d + 1):
            f = interior_face(d, i, j)
            assert c in f and i not in f and j not in f


def test_split_cells_structure():
    for d in (1, 2, 3, 4):
        cells = split_cells(d)
        assert len(cells) == d + 1
        for i, t in enumerate(cells):
            assert len(t) == d + 1
            assert t.has_center
            assert i not in t


def test_split_incidence_membership():
    inc = split_incidence(2)
    f = IndexSet((0,), 2)
    assert inc.cells_containing(f) == [1, 2]
    assert len(inc.interior_faces) == 3  # d(d+1)/2 interior faces


def test_split_incidence_3d_shared_face():
    inc = split_incidence(3)
    assert inc.interior_faces[(0, 1)].labels == (2, 3, center_label(3))


def test_interior_subsimplices_contain_center():
    for d in (2, 3, 4):
        for ell in range(0, d + 1):
            ints = interior_subsimplices(d, ell)
            assert all(f.has_center for f in ints)
            # interior subsimplices are exactly the label sets with the center
            allsets = labels(subsimplices(d, ell)) if ell <= d else set()
            assert labels(ints).isdisjoint(allsets)


def test_indexset_validation():
    with pytest.raises(DomainError):
        IndexSet((1, 0), 2)       # not increasing
    with pytest.raises(DomainError):
        IndexSet((0, 5), 2)       # label out of range
    with pytest.raises(DomainError):
        IndexSet((), 2)           # empty
