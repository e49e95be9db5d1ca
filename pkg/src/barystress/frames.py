"""Tangential-normal frames on subsimplices and the matched-pair stress fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError
from .poly import SplitPoly, n_sym, sym_outer, sym_pairs
from .simplex import IndexSet, center_label


@dataclass
class TNFrame:
    """Frames attached to a subsimplex f of a cell.

    tangents       edge vectors spanning the tangent plane of f
    face_normals   unit outward normals of the faces opposite i, i in f*
    tn_normals     unit vectors normal to f but tangent to f + {i}
    scaled_dual    tn normals rescaled to be dual to the face-normal basis
    """

    f: IndexSet
    tangents: np.ndarray
    star: tuple
    face_normals: dict
    tn_normals: dict
    scaled_dual: dict


def build_frame(f, cell):
    """Tangential-normal frame of a boundary subsimplex (no barycenter label)."""
    if f.has_center:
        raise DomainError("tn frames are built on subsimplices of the base cell")
    d = cell.dim
    if not 0 <= f.dim <= d - 1:
        raise DomainError(f"frame needs 0 <= dim f <= d-1, got {f.dim}")
    verts = cell.vertices
    anchor = f.anchor
    tangents = np.array([verts[m] - verts[anchor] for m in f.labels[1:]]).reshape(f.dim, d)
    star = tuple(f.complement_star().labels)
    face_normals, tn_normals, scaled = {}, {}, {}
    for i in star:
        n_face = cell.outward_normal(i)
        face_normals[i] = n_face
        # project grad(lambda_i) onto the tangent plane of f + {i}
        ext = sorted(f.labels + (i,))
        span = np.array([verts[m] - verts[ext[0]] for m in ext[1:]]).T  # (d, l+1)
        q, _ = np.linalg.qr(span)
        g = cell.grad_lambda[i]
        t = q @ (q.T @ g)
        nt = np.linalg.norm(t)
        if nt < 1e-13 * max(np.linalg.norm(g), 1.0):
            raise GeometryError("degenerate tangential-normal vector")
        tn = t / nt
        tn_normals[i] = tn
        scaled[i] = tn / (tn @ n_face)
    return TNFrame(f=f, tangents=tangents, star=star, face_normals=face_normals,
                   tn_normals=tn_normals, scaled_dual=scaled)


def global_normal_frame(entity):
    """Orthonormal basis of the normal plane of an entity, via QR with fixed signs.

    Depends only on the entity geometry, so it is single-valued wherever the
    entity is shared.  Signs are fixed by making the first sizable component
    of each normal positive.
    """
    d = entity.ambient_dim
    ell = entity.dim
    if ell == 0:
        return np.eye(d)
    tan = entity.edges  # (d, ell)
    q, _ = np.linalg.qr(tan, mode="complete")
    normals = q[:, ell:].T.copy()
    for r in range(len(normals)):
        for comp in normals[r]:
            if abs(comp) > 1e-8:
                if comp < 0:
                    normals[r] = -normals[r]
                break
    return normals


@dataclass
class SymSplit:
    """Bases of the tangential, normal-normal, and mixed symmetric blocks at f."""

    f: IndexSet
    tt: np.ndarray  # (ntt, nsym)
    nn: np.ndarray  # (nnn, nsym)
    tn: np.ndarray  # (ntn, nsym)

    def stacked(self):
        return np.vstack([b for b in (self.tt, self.nn, self.tn) if len(b)])


def sym_decompose(f, cell):
    """Split the symmetric tensors by the tangent/normal planes of f.

    Block dimensions are l(l+1)/2, (d-l)(d-l+1)/2 and l(d-l) with l = dim f,
    summing to d(d+1)/2.
    """
    d = cell.dim
    ell = f.dim
    verts = cell.vertices
    anchor = f.anchor
    tangents = [verts[m] - verts[anchor] for m in f.labels[1:]]
    if ell == d:
        normals = []
    else:
        frame = build_frame(f, cell)
        normals = [frame.face_normals[i] for i in frame.star]
    tt = np.array([sym_outer(tangents[a], tangents[b])
                   for a in range(ell) for b in range(a, ell)]).reshape(-1, n_sym(d))
    nn = np.array([sym_outer(normals[a], normals[b])
                   for a in range(len(normals)) for b in range(a, len(normals))]
                  ).reshape(-1, n_sym(d))
    tn = np.array([sym_outer(t, n) for t in tangents for n in normals]).reshape(-1, n_sym(d))
    return SymSplit(f=f, tt=tt, nn=nn, tn=tn)


def pair_field(f, i, j, split):
    """Piecewise-constant symmetric field with matched normal traces.

    Supported on split cells i and j; built from the anchor vertex of f and
    the barycenter direction so that all normal jumps vanish except across
    the interior faces of the split cell opposite the anchor.
    """
    d = split.dim
    if f.has_center:
        raise DomainError("the anchor subsimplex may not contain the barycenter")
    star = set(f.complement_star().labels)
    if i == j or i not in star or j not in star:
        raise DomainError(f"need distinct i, j outside f, got {i}, {j}")
    a = f.anchor
    va = split.base.vertices[a]
    t_ac = split.center - va
    out = SplitPoly.zero(split, 0, "sym")
    out.coeffs[i, 0] = sym_outer(t_ac, split.base.vertices[j] - va)
    out.coeffs[j, 0] = -sym_outer(t_ac, split.base.vertices[i] - va)
    return out


def pair_field_span_dim(d, ell):
    """Number of independent matched-pair fields at a subsimplex of dimension ell."""
    return (d - ell) * (d - ell - 1) // 2


def face_rigid_motions(facet, normal):
    """Basis of the in-plane rigid motions of a facet (tangential translations
    plus in-plane rotations), returned as callables' sample matrix factory."""
    d = facet.ambient_dim
    tangents = facet.edges.T  # (ell, d)
    centroid = facet.barycenter()

    def eval_at(pts):
        pts = np.atleast_2d(pts)
        npts = len(pts)
        ell = len(tangents)
        pairs = [(a, b) for a in range(ell) for b in range(a + 1, ell)]
        out = np.zeros((npts, d, ell + len(pairs)))
        for a in range(ell):
            out[:, :, a] = tangents[a]
        x = pts - centroid
        for c, (a, b) in enumerate(pairs):
            ta, tb = tangents[a], tangents[b]
            # skew(ta (x) tb) applied to the in-plane position vector
            skew = np.outer(ta, tb) - np.outer(tb, ta)
            out[:, :, ell + c] = x @ skew.T / 2.0
        return out

    ell = facet.dim
    dim = ell + ell * (ell - 1) // 2
    return eval_at, dim
