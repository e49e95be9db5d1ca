"""Conforming simplicial meshes, box generators, and barycentric refinement."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .errors import ConformityError, DomainError, GeometryError
from .geometry import Simplex, SplitSimplex


@dataclass
class Mesh:
    """A conforming triangulation with an oriented face table.

    Each face stores one fixed unit normal.  For interior faces it points
    from the incident cell with the smaller id to the larger one; boundary
    normals point outward.  face_sign[c, i] is +1 when cell c sees the fixed
    normal of its i-th face (the face opposite local vertex i) as outward.
    """

    dim: int
    vertices: np.ndarray                 # (nv, d)
    cells: np.ndarray                    # (nc, d+1), each row sorted ascending
    faces: np.ndarray = field(default=None)        # (nf, d) sorted vertex ids
    face_cells: np.ndarray = field(default=None)   # (nf, 2), -1 for missing
    face_normals: np.ndarray = field(default=None)  # (nf, d) unit
    boundary: np.ndarray = field(default=None)     # (nf,) bool
    cell_faces: np.ndarray = field(default=None)   # (nc, d+1) face ids
    face_sign: np.ndarray = field(default=None)    # (nc, d+1) +-1

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_faces(self):
        return len(self.faces)

    def cell_geometry(self, c):
        return Simplex(self.vertices[self.cells[c]])

    def face_geometry(self, f):
        return Simplex(self.vertices[self.faces[f]])

    def interior_face_ids(self):
        return np.where(~self.boundary)[0]

    def mesh_size(self):
        return max(self.cell_geometry(c).diameter for c in range(self.n_cells))


def build_mesh(vertices, cells, check=True):
    """Validate a vertex/cell description and build the face tables."""
    vertices = np.asarray(vertices, dtype=float)
    cells = np.asarray(cells, dtype=int)
    if vertices.ndim != 2 or cells.ndim != 2:
        raise DomainError("vertices and cells must be 2d arrays")
    d = vertices.shape[1]
    if cells.shape[1] != d + 1:
        raise DomainError(f"cells must have {d + 1} vertices in dimension {d}")
    if cells.min() < 0 or cells.max() >= len(vertices):
        raise DomainError("cell vertex index out of range")
    if any(len(set(row)) != d + 1 for row in cells):
        raise DomainError("cells must reference distinct vertices")
    cells = np.sort(cells, axis=1)

    geoms = []
    for c, row in enumerate(cells):
        try:
            geoms.append(Simplex(vertices[row]))
        except GeometryError as exc:
            raise GeometryError(f"cell {c}: {exc}") from exc

    # face table: face i of a cell is opposite local vertex i
    face_lut = {}
    nc = len(cells)
    cell_faces = np.full((nc, d + 1), -1, dtype=int)
    face_list = []
    incidence = []
    for c, row in enumerate(cells):
        for i in range(d + 1):
            fverts = tuple(v for p, v in enumerate(row) if p != i)
            fid = face_lut.get(fverts)
            if fid is None:
                fid = len(face_list)
                face_lut[fverts] = fid
                face_list.append(fverts)
                incidence.append([])
            incidence[fid].append((c, i))
            cell_faces[c, i] = fid

    nf = len(face_list)
    faces = np.array(face_list, dtype=int)
    face_cells = np.full((nf, 2), -1, dtype=int)
    boundary = np.zeros(nf, dtype=bool)
    for fid, inc in enumerate(incidence):
        if len(inc) > 2:
            raise ConformityError(f"face {face_list[fid]} shared by {len(inc)} cells")
        inc.sort()
        face_cells[fid, : len(inc)] = [c for c, _ in inc]
        boundary[fid] = len(inc) == 1

    face_normals = np.zeros((nf, d))
    face_sign = np.zeros((nc, d + 1))
    for fid, inc in enumerate(incidence):
        owner, iloc = inc[0]
        face_normals[fid] = geoms[owner].outward_normal(iloc)
        for c, i in inc:
            face_sign[c, i] = 1.0 if c == owner else -1.0

    mesh = Mesh(dim=d, vertices=vertices, cells=cells, faces=faces,
                face_cells=face_cells, face_normals=face_normals,
                boundary=boundary, cell_faces=cell_faces, face_sign=face_sign)
    if check:
        _check_conformity(mesh, geoms)
    return mesh


def _check_conformity(mesh, geoms):
    """Geometric conformity: no apparent-boundary face may touch another cell.

    A face with a single incident cell whose barycenter lies inside some
    other cell signals a hanging node or mismatched facet pair.
    """
    tol = 1e-10
    for fid in np.where(mesh.boundary)[0]:
        center = mesh.vertices[mesh.faces[fid]].mean(axis=0)
        own = mesh.face_cells[fid, 0]
        for c, geom in enumerate(geoms):
            if c == own:
                continue
            if geom.contains(center, tol=tol):
                raise ConformityError(
                    f"face {tuple(mesh.faces[fid])} overlaps cell {tuple(mesh.cells[c])}")


def uniform_box_mesh(d, n):
    """Freudenthal/Kuhn triangulation of the unit box with n^d subcubes."""
    if d not in (2, 3):
        raise DomainError(f"box meshes support d in {{2, 3}}, got d={d}")
    if n < 1:
        raise DomainError("n must be >= 1")
    if d == 2:
        xs = np.linspace(0.0, 1.0, n + 1)
        verts = np.array([[x, y] for y in xs for x in xs])
        vid = lambda i, j: j * (n + 1) + i
        cells = []
        for j in range(n):
            for i in range(n):
                a, b = vid(i, j), vid(i + 1, j)
                c, e = vid(i + 1, j + 1), vid(i, j + 1)
                cells.append((a, b, c))
                cells.append((a, c, e))
        return build_mesh(verts, np.array(cells), check=False)
    xs = np.linspace(0.0, 1.0, n + 1)
    verts = np.array([[x, y, z] for z in xs for y in xs for x in xs])
    vid = lambda i, j, k: (k * (n + 1) + j) * (n + 1) + i
    cells = []
    steps = {0: (1, 0, 0), 1: (0, 1, 0), 2: (0, 0, 1)}
    for k in range(n):
        for j in range(n):
            for i in range(n):
                base = np.array([i, j, k])
                for perm in permutations(range(3)):
                    path = [base.copy()]
                    for axis in perm:
                        path.append(path[-1] + steps[axis])
                    cells.append(tuple(vid(*p) for p in path))
    return build_mesh(verts, np.array(cells), check=False)


def write_mesh(mesh, path):
    """ASCII format: `dim nv nc`, nv coordinate lines, nc index lines."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.dim} {mesh.n_vertices} {mesh.n_cells}\n")
        for v in mesh.vertices:
            fh.write(" ".join(f"{x:.17g}" for x in v) + "\n")
        for c in mesh.cells:
            fh.write(" ".join(str(i) for i in c) + "\n")


def read_mesh(path):
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 3:
        raise DomainError("mesh file too short")
    d, nv, nc = (int(t) for t in tokens[:3])
    need = 3 + nv * d + nc * (d + 1)
    if len(tokens) != need:
        raise DomainError(f"mesh file has {len(tokens)} tokens, expected {need}")
    coords = np.array([float(t) for t in tokens[3:3 + nv * d]]).reshape(nv, d)
    cells = np.array([int(t) for t in tokens[3 + nv * d:]]).reshape(nc, d + 1)
    return build_mesh(coords, cells)


@dataclass
class SplitMesh:
    """A mesh together with its barycentric refinement and parent maps."""

    coarse: Mesh
    fine: Mesh
    parent_cell: np.ndarray        # (n_fine, 2): coarse cell, local index i
    barycenter_vertex: np.ndarray  # (n_coarse,) fine vertex id of the center
    splits: list                   # per coarse cell, a SplitSimplex
    fine_cell_of: np.ndarray       # (n_coarse, d+1) fine cell ids

    @property
    def dim(self):
        return self.coarse.dim

    def split(self, c):
        return self.splits[c]

    def interior_fine_faces(self, c):
        """Fine face ids interior to coarse cell c, keyed by the split pair."""
        d = self.dim
        out = {}
        for i in range(d + 1):
            fc_i = self.fine_cell_of[c, i]
            for j in range(i + 1, d + 1):
                fc_j = self.fine_cell_of[c, j]
                shared = set(self.fine.cell_faces[fc_i]) & set(self.fine.cell_faces[fc_j])
                (fid,) = shared
                out[(i, j)] = fid
        return out


def barycentric_refine(mesh):
    """Split every cell by its barycenter; yields (d+1) x n_cells fine cells."""
    d = mesh.dim
    nv = mesh.n_vertices
    centers = mesh.vertices[mesh.cells].mean(axis=1)
    fine_vertices = np.vstack([mesh.vertices, centers])
    barycenter_vertex = nv + np.arange(mesh.n_cells)

    fine_cells = []
    parent = []
    for c, row in enumerate(mesh.cells):
        for i in range(d + 1):
            sub = [row[p] for p in range(d + 1) if p != i] + [barycenter_vertex[c]]
            fine_cells.append(sub)
            parent.append((c, i))
    fine = build_mesh(fine_vertices, np.array(fine_cells, dtype=int), check=False)

    # build_mesh sorts each cell row; the appended center id is the largest,
    # so the stored row order matches the split-cell label order exactly
    splits = [SplitSimplex(mesh.cell_geometry(c)) for c in range(mesh.n_cells)]
    fine_cell_of = np.arange(mesh.n_cells * (d + 1)).reshape(mesh.n_cells, d + 1)
    return SplitMesh(coarse=mesh, fine=fine,
                     parent_cell=np.array(parent, dtype=int),
                     barycenter_vertex=barycenter_vertex,
                     splits=splits, fine_cell_of=fine_cell_of)
