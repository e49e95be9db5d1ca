"""Abstract simplex combinatorics for barycentric (Alfeld) splits.

Vertices of the abstract d-simplex carry the labels 0..d.  The split adds
one extra vertex, the barycenter, which is labelled d+1 so that label sets
sort naturally with the barycenter last.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb

from .errors import DomainError


def center_label(d):
    """Label of the barycenter vertex added by the split."""
    return d + 1


@dataclass(frozen=True)
class IndexSet:
    """A (sub)simplex given as a strictly increasing tuple of vertex labels.

    Labels live in {0, .., d} plus the barycenter label d+1, which may occur
    at most once and always sorts last.
    """

    labels: tuple
    ambient_dim: int

    def __post_init__(self):
        d = self.ambient_dim
        if d < 1:
            raise DomainError(f"ambient dimension must be >= 1, got {d}")
        labs = tuple(int(m) for m in self.labels)
        object.__setattr__(self, "labels", labs)
        if not 1 <= len(labs) <= d + 2:
            raise DomainError(f"cardinality {len(labs)} out of range for d={d}")
        if any(m < 0 or m > d + 1 for m in labs):
            raise DomainError(f"labels {labs} outside 0..{d + 1}")
        if any(a >= b for a, b in zip(labs, labs[1:])):
            raise DomainError(f"labels {labs} must be strictly increasing")

    @property
    def dim(self):
        return len(self.labels) - 1

    @property
    def has_center(self):
        return self.labels[-1] == center_label(self.ambient_dim)

    @property
    def anchor(self):
        """Smallest label; the anchor vertex used by the paired fields."""
        return self.labels[0]

    def __iter__(self):
        return iter(self.labels)

    def __len__(self):
        return len(self.labels)

    def __contains__(self, m):
        return m in self.labels

    def issubset(self, other):
        return set(self.labels) <= set(other.labels)

    def complement_star(self):
        """Complementary subsimplex within {0,..,d}.

        Only defined for label sets without the barycenter; the union of a
        set and its star-complement is the full vertex set {0,..,d}.
        """
        d = self.ambient_dim
        if self.has_center:
            raise DomainError("star complement is undefined for sets containing the barycenter")
        rest = tuple(m for m in range(d + 1) if m not in self.labels)
        if not rest:
            raise DomainError("star complement of the full simplex is empty")
        return IndexSet(rest, d)

    def complement_center(self):
        """Complement within {0,..,d} plus the barycenter label."""
        d = self.ambient_dim
        full = list(range(d + 1)) + [center_label(d)]
        rest = tuple(m for m in full if m not in self.labels)
        return IndexSet(rest, d)


def subsimplices(d, ell):
    """All subsimplices of dimension ell of the d-simplex, in lexicographic order."""
    if not 0 <= ell <= d:
        raise DomainError(f"subsimplex dimension {ell} out of range 0..{d}")
    return [IndexSet(c, d) for c in combinations(range(d + 1), ell + 1)]


def n_subsimplices(d, ell):
    return comb(d + 1, ell + 1)


def split_cell(d, i):
    """The i-th cell of the barycentric split: all vertices but i, plus the center."""
    if not 0 <= i <= d:
        raise DomainError(f"split cell index {i} out of range 0..{d}")
    labs = tuple(m for m in range(d + 1) if m != i) + (center_label(d),)
    return IndexSet(labs, d)


def split_cells(d):
    return [split_cell(d, i) for i in range(d + 1)]


def interior_subsimplices(d, ell):
    """Subsimplices of the split that contain the barycenter, dimension ell."""
    if not 0 <= ell <= d:
        raise DomainError(f"subsimplex dimension {ell} out of range 0..{d}")
    c = center_label(d)
    return [IndexSet(s + (c,), d) for s in combinations(range(d + 1), ell)]


def interior_face(d, i, j):
    """The interior split face shared by split cells i and j."""
    if i == j:
        raise DomainError("interior face needs two distinct split cells")
    i, j = min(i, j), max(i, j)
    return IndexSet(tuple(m for m in range(d + 1) if m not in (i, j)) + (center_label(d),), d)


@dataclass
class SplitIncidence:
    """Incidence of subsimplices with the cells of the barycentric split."""

    d: int
    membership: dict = field(default_factory=dict)  # (labels, i) -> True for i in f*
    interior_faces: dict = field(default_factory=dict)  # (i, j) -> IndexSet

    def cells_containing(self, f):
        return [i for i in range(self.d + 1) if self.membership.get((tuple(f.labels), i), False)]


def split_incidence(d):
    """Verify and tabulate how subsimplices sit inside the split cells.

    Every f of dimension <= d-1 lies in the split cell T_i and the coarse
    face F_i exactly for the labels i in its star complement.
    """
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    inc = SplitIncidence(d=d)
    for ell in range(d):
        for f in subsimplices(d, ell):
            star = f.complement_star()
            for i in star:
                ti = split_cell(d, i)
                fi = IndexSet((i,), d).complement_star()
                if not (f.issubset(ti) and f.issubset(fi)):
                    raise AssertionError(f"incidence violated for f={f.labels}, i={i}")
                inc.membership[(tuple(f.labels), i)] = True
    for i in range(d + 1):
        for j in range(i + 1, d + 1):
            inc.interior_faces[(i, j)] = interior_face(d, i, j)
    return inc


@lru_cache(maxsize=None)
def subsimplex_table(d):
    """Per dimension, the tuple of all coarse subsimplices; plus the split cells."""
    table = {ell: tuple(subsimplices(d, ell)) for ell in range(d + 1)}
    return table, tuple(split_cells(d))
