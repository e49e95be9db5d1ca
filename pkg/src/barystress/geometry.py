"""Geometric simplices embedded in R^d and the barycentric split of a cell."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import GeometryError
from .simplex import center_label

VOLUME_RTOL = 1e-12  # degenerate if measure <= VOLUME_RTOL * diameter^dim


class Simplex:
    """A geometric m-simplex with vertices in R^d (m <= d).

    Full-dimensional simplices (m == d) carry barycentric gradients, heights
    and outward face normals; lower-dimensional ones carry an affine chart
    used for traces and facet quadrature.
    """

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2:
            raise GeometryError("vertices must be a 2d array")
        self.vertices = v
        self.dim = v.shape[0] - 1
        self.ambient_dim = v.shape[1]
        if self.dim > self.ambient_dim:
            raise GeometryError("more vertices than an embedded simplex allows")
        self.edges = (v[1:] - v[0]).T  # (d, m) chart matrix
        self.diameter = self._diameter()
        self.measure = self._measure()
        self._grad_lambda = None

    def _diameter(self):
        v = self.vertices
        if len(v) == 1:
            return 0.0
        diff = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())

    def _measure(self):
        m = self.dim
        if m == 0:
            return 1.0
        gram = self.edges.T @ self.edges
        det = np.linalg.det(gram)
        meas = np.sqrt(max(det, 0.0)) / factorial(m)
        if meas <= VOLUME_RTOL * self.diameter**m:
            raise GeometryError(f"degenerate simplex, measure {meas:.3e}")
        return float(meas)

    @property
    def grad_lambda(self):
        """Gradients of the barycentric coordinates; rows sum to zero."""
        if self.dim != self.ambient_dim:
            raise GeometryError("barycentric gradients need a full-dimensional simplex")
        if self._grad_lambda is None:
            d = self.dim
            mat = np.ones((d + 1, d + 1))
            mat[:, 1:] = self.vertices
            self._grad_lambda = np.linalg.inv(mat)[1:, :].T.copy()
        return self._grad_lambda

    def height(self, i):
        return 1.0 / np.linalg.norm(self.grad_lambda[i])

    def outward_normal(self, i):
        """Unit outward normal of the face opposite vertex i."""
        g = self.grad_lambda[i]
        return -g / np.linalg.norm(g)

    def normal(self):
        """A unit normal for a codimension-one simplex (orientation unset)."""
        if self.dim != self.ambient_dim - 1:
            raise GeometryError("normal() requires codimension one")
        if self.dim == 0:
            # ambient dimension 1
            return np.array([1.0])
        q, _ = np.linalg.qr(self.edges, mode="complete")
        n = q[:, -1]
        # deterministic sign: first nonzero component positive
        for comp in n:
            if abs(comp) > 1e-13:
                return n if comp > 0 else -n
        raise GeometryError("zero normal")

    def tangent(self, i, j):
        return self.vertices[j] - self.vertices[i]

    def barycenter(self):
        return self.vertices.mean(axis=0)

    def point(self, lams):
        """Map barycentric coordinates (.., m+1) to physical points."""
        return np.asarray(lams) @ self.vertices

    def barycentric(self, points):
        """Barycentric coordinates of physical points (assumed on the affine hull)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dim == self.ambient_dim:
            d = self.dim
            mat = np.ones((d + 1, d + 1))
            mat[:, 1:] = self.vertices
            rhs = np.hstack([np.ones((len(pts), 1)), pts])
            return np.linalg.solve(mat.T, rhs.T).T
        if self.dim == 0:
            return np.ones((len(pts), 1))
        xi, *_ = np.linalg.lstsq(self.edges, (pts - self.vertices[0]).T, rcond=None)
        lam = np.empty((len(pts), self.dim + 1))
        lam[:, 1:] = xi.T
        lam[:, 0] = 1.0 - xi.sum(axis=0)
        return lam

    def subsimplex(self, positions):
        """The subsimplex spanned by the given local vertex positions."""
        return Simplex(self.vertices[list(positions)])

    def contains(self, point, tol=1e-12):
        lam = self.barycentric([point])[0]
        if self.dim < self.ambient_dim:
            # also require the point to sit on the affine hull
            recon = self.point(lam)
            if np.linalg.norm(recon - point) > tol * max(self.diameter, 1.0):
                return False
        return bool(lam.min() >= -tol)


@dataclass
class InteriorFace:
    """One interior facet of a split cell, shared by split cells i and j."""

    pair: tuple
    labels: tuple
    facet: Simplex
    normal: np.ndarray  # fixed; outward from split cell min(i, j)


class SplitSimplex:
    """The barycentric split of a full-dimensional cell.

    Split cell i keeps every base vertex but i and gains the barycenter.
    Its local vertex order is the ascending base labels followed by the
    center label d+1, matching the abstract index algebra.
    """

    def __init__(self, cell):
        self.base = cell
        d = cell.dim
        if d != cell.ambient_dim:
            raise GeometryError("can only split a full-dimensional cell")
        self.dim = d
        self.center = cell.barycenter()
        self.sub_labels = [tuple(m for m in range(d + 1) if m != i) + (center_label(d),)
                           for i in range(d + 1)]
        self.subcells = [Simplex(np.array([self.vertex(m) for m in labs]))
                         for i, labs in enumerate(self.sub_labels)]
        self._local_pos = [{m: p for p, m in enumerate(labs)} for labs in self.sub_labels]
        self.interior_faces = self._build_interior_faces()

    def vertex(self, label):
        if label == center_label(self.dim):
            return self.center
        return self.base.vertices[label]

    def local_position(self, i, label):
        """Position of a global label within split cell i, or None."""
        return self._local_pos[i].get(label)

    def _build_interior_faces(self):
        d = self.dim
        faces = []
        for i in range(d + 1):
            for j in range(i + 1, d + 1):
                labels = tuple(m for m in range(d + 1) if m not in (i, j)) + (center_label(d),)
                facet = Simplex(np.array([self.vertex(m) for m in labels]))
                n = facet.normal()
                # orient away from split cell i (the smaller index)
                if n @ (facet.barycenter() - self.subcells[i].barycenter()) < 0:
                    n = -n
                faces.append(InteriorFace(pair=(i, j), labels=labels, facet=facet, normal=n))
        return faces

    def interior_face(self, i, j):
        i, j = min(i, j), max(i, j)
        for rec in self.interior_faces:
            if rec.pair == (i, j):
                return rec
        raise KeyError((i, j))

    def coarse_face(self, i, order=None):
        """Coarse face opposite base vertex i, with an explicit vertex order."""
        labs = order if order is not None else tuple(m for m in range(self.dim + 1) if m != i)
        return Simplex(self.base.vertices[list(labs)])

    def entity(self, labels):
        """Geometric realization of a label set (may include the center)."""
        return Simplex(np.array([self.vertex(m) for m in labels]))

    def subcells_containing(self, labels):
        labset = set(labels)
        return [i for i, labs in enumerate(self.sub_labels) if labset <= set(labs)]


@dataclass
class GeometryPack:
    """Per-cell geometric quantities used throughout the element constructions."""

    grad_lambda: np.ndarray   # (d+1, d)
    heights: np.ndarray       # (d+1,)
    tangents: np.ndarray      # (d+1, d+1, d), tangents[i, j] = v_j - v_i
    center_tangents: np.ndarray  # (d+1, d), v_c - v_i


def geometry_pack(cell):
    """Barycentric gradients, tangent vectors, center tangents and heights."""
    d = cell.dim
    g = cell.grad_lambda
    v = cell.vertices
    tangents = v[None, :, :] - v[:, None, :]
    vc = cell.barycenter()
    return GeometryPack(
        grad_lambda=g,
        heights=np.array([cell.height(i) for i in range(d + 1)]),
        tangents=tangents,
        center_tangents=vc[None, :] - v,
    )


def reference_simplex(d):
    """The unit reference d-simplex."""
    verts = np.zeros((d + 1, d))
    for i in range(d):
        verts[i + 1, i] = 1.0
    return Simplex(verts)
