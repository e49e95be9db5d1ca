"""Global stress spaces on meshes and mixed discretizations of linear elasticity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .elements import FaceData, build_element_cached
from .errors import DomainError, NumericalError
from .geometry import Simplex
from .mesh import SplitMesh, barycentric_refine
from .poly import (Poly, RigidMotions, SplitPoly, bernstein_gram,
                   bernstein_matrix, compliance_matrix, entity_quadrature,
                   n_coeffs, n_sym, sym_pairs, sym_vec_matrix, sym_weights)

# ---------------------------------------------------------------------------
# problems


@dataclass
class ElasticityProblem:
    """Stress-displacement elasticity data with an optional exact solution."""

    d: int
    mu: float = 1.0
    lam: float = 1.0
    body_force: callable = None
    exact_u: callable = None          # pts -> (n, d)
    exact_grad_u: callable = None     # pts -> (n, d, d)
    dirichlet: callable = None        # boundary displacement, default zero

    def __post_init__(self):
        if self.mu <= 0 or self.lam < 0:
            raise DomainError("need mu > 0 and lambda >= 0")
        if self.dirichlet is None:
            self.dirichlet = lambda pts: np.zeros((len(np.atleast_2d(pts)), self.d))
        if self.body_force is None:
            self.body_force = lambda pts: np.zeros((len(np.atleast_2d(pts)), self.d))

    def exact_strain(self, pts):
        g = self.exact_grad_u(pts)
        return np.stack([(g[:, i, j] + g[:, j, i]) / 2.0
                         for i, j in sym_pairs(self.d)], axis=-1)

    def exact_sigma(self, pts):
        eps = self.exact_strain(pts)
        tr = sum(eps[:, c] for c, (i, j) in enumerate(sym_pairs(self.d)) if i == j)
        out = 2.0 * self.mu * eps
        for c, (i, j) in enumerate(sym_pairs(self.d)):
            if i == j:
                out[:, c] += self.lam * tr
        return out

    def exact_div_sigma(self, pts):
        return -self.body_force(pts)


def _sine_partials(pts, i):
    """First partial of g = prod_j sin(pi x_j)."""
    pi = np.pi
    vals = pi * np.cos(pi * pts[:, i])
    for j in range(pts.shape[1]):
        if j != i:
            vals = vals * np.sin(pi * pts[:, j])
    return vals


def _sine_second(pts, i, j):
    pi = np.pi
    if i == j:
        vals = -pi**2 * np.prod(np.sin(pi * pts), axis=1)
        return vals
    vals = pi**2 * np.cos(pi * pts[:, i]) * np.cos(pi * pts[:, j])
    for m in range(pts.shape[1]):
        if m not in (i, j):
            vals = vals * np.sin(pi * pts[:, m])
    return vals


def manufactured_problem(d, mu=1.0, lam=1.0):
    """Every displacement component is prod_j sin(pi x_j); zero on the unit box."""

    def exact_u(pts):
        pts = np.atleast_2d(pts)
        g = np.prod(np.sin(np.pi * pts), axis=1)
        return np.tile(g[:, None], (1, d))

    def exact_grad_u(pts):
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), d, d))
        for j in range(d):
            pj = _sine_partials(pts, j)
            for i in range(d):
                out[:, i, j] = pj
        return out

    def body_force(pts):
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), d))
        lap = sum(_sine_second(pts, m, m) for m in range(d))
        for i in range(d):
            acc = (mu + lam) * sum(_sine_second(pts, i, m) for m in range(d))
            out[:, i] = -(acc + mu * lap)
        return out

    return ElasticityProblem(d=d, mu=mu, lam=lam, body_force=body_force,
                             exact_u=exact_u, exact_grad_u=exact_grad_u)


def polynomial_problem(d, mu, lam, degree, seed=1234):
    """Compatible polynomial data (u of the given degree) for patch tests."""
    rng = np.random.default_rng(seed)
    exps = [tuple(a) for a in _total_degree_exponents(d, degree)]
    coeffs = rng.integers(-2, 3, size=(d, len(exps))).astype(float)

    def eval_mono(pts, e):
        vals = np.ones(len(pts))
        for m, p in enumerate(e):
            vals = vals * pts[:, m] ** p
        return vals

    def exact_u(pts):
        pts = np.atleast_2d(pts)
        return np.stack([sum(c * eval_mono(pts, e) for c, e in zip(row, exps))
                         for row in coeffs], axis=-1)

    def dmono(e, j):
        if e[j] == 0:
            return 0.0, e
        ee = list(e)
        ee[j] -= 1
        return float(e[j]), tuple(ee)

    def exact_grad_u(pts):
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), d, d))
        for i, row in enumerate(coeffs):
            for c, e in zip(row, exps):
                for j in range(d):
                    fac, ee = dmono(e, j)
                    if fac:
                        out[:, i, j] += c * fac * eval_mono(pts, ee)
        return out

    def body_force(pts):
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), d))
        for i, row in enumerate(coeffs):
            for c, e in zip(row, exps):
                # -div sigma with sigma = mu (grad u + grad u^T) + lam div(u) I
                for j in range(d):
                    fac1, e1 = dmono(e, j)
                    if fac1:
                        fac2, e2 = dmono(e1, j)
                        if fac2:
                            out[:, i] -= mu * c * fac1 * fac2 * eval_mono(pts, e2)
                fac1, e1 = dmono(e, i)
                if fac1:
                    for j in range(d):
                        fac2, e2 = dmono(e1, j)
                        if fac2:
                            out[:, j] -= (mu + lam) * c * fac1 * fac2 * eval_mono(pts, e2)
        return out

    return ElasticityProblem(d=d, mu=mu, lam=lam, body_force=body_force,
                             exact_u=exact_u, exact_grad_u=exact_grad_u,
                             dirichlet=lambda pts: exact_u(pts))


def _total_degree_exponents(d, degree):
    from .poly import multi_index_table
    return [tuple(int(x) for x in a[1:]) for a in multi_index_table(d, degree)]


# ---------------------------------------------------------------------------
# global stress spaces


class GlobalSpace:
    """Conforming global stress space: shared face dofs plus cell interiors."""

    def __init__(self, splitmesh, family, k=1):
        if not isinstance(splitmesh, SplitMesh):
            splitmesh = barycentric_refine(splitmesh)
        self.splitmesh = splitmesh
        self.mesh = splitmesh.coarse
        self.family = family
        self.k = k
        mesh = self.mesh
        d = mesh.dim
        self.elements = []
        for c in range(mesh.n_cells):
            fdata = []
            for i in range(d + 1):
                fid = mesh.cell_faces[c, i]
                order = tuple(p for p in range(d + 1) if p != i)
                fdata.append(FaceData(opposite=i, order=order,
                                      normal=mesh.face_normals[fid],
                                      sign=mesh.face_sign[c, i]))
            self.elements.append(build_element_cached(family, splitmesh.split(c), k, fdata))
        el0 = self.elements[0]
        slices = [s for s in el0.face_dof_slices if s is not None]
        self.n_face_dofs = slices[0].stop - slices[0].start if slices else 0
        self.cell_interior_sizes = np.array(
            [el.interior_dof_slice.stop - el.interior_dof_slice.start
             for el in self.elements])
        self.face_block = self.n_face_dofs
        nf = mesh.n_faces
        self.interior_offsets = nf * self.face_block + np.concatenate(
            [[0], np.cumsum(self.cell_interior_sizes)])
        self.ndof = int(self.interior_offsets[-1])

    def cell_dofs(self, c):
        mesh = self.mesh
        el = self.elements[c]
        out = np.empty(el.dim, dtype=int)
        for i, sl in enumerate(el.face_dof_slices):
            fid = mesh.cell_faces[c, i]
            out[sl] = fid * self.face_block + np.arange(sl.stop - sl.start)
        isl = el.interior_dof_slice
        out[isl] = self.interior_offsets[c] + np.arange(isl.stop - isl.start)
        return out

    def boundary_dof_mask(self):
        mask = np.zeros(self.ndof, dtype=bool)
        for fid in np.where(self.mesh.boundary)[0]:
            mask[fid * self.face_block:(fid + 1) * self.face_block] = True
        return mask

    def field(self, coeffs):
        return StressField(self, np.asarray(coeffs, dtype=float))

    def interpolate(self, func):
        """Nodal interpolation: apply every dof functional to a callable field.

        The callable takes physical points and returns symmetric components;
        shared face dofs are single-valued so per-cell values agree.
        """
        coeffs = np.zeros(self.ndof)
        for c in range(self.mesh.n_cells):
            el = self.elements[c]
            gd = self.cell_dofs(c)
            vals = np.array([_apply_dof_to_callable(dof, el, func) for dof in el.dofs])
            coeffs[gd] = vals
        return coeffs


def _apply_dof_to_callable(dof, el, func):
    total = 0.0
    split = el.split
    for t in dof.terms:
        pts = split.subcells[t.subcell].point(t.lams)
        vals = np.atleast_2d(func(pts))
        total += float((t.weights * vals).sum())
    return total


@dataclass
class StressField:
    space: GlobalSpace
    coeffs: np.ndarray

    def cell_field(self, c):
        el = self.space.elements[c]
        return el.nodal_field(self.coeffs[self.space.cell_dofs(c)])


# displacement spaces ---------------------------------------------------------


class DGSpace:
    """Discontinuous piecewise vector polynomials on the coarse mesh."""

    def __init__(self, mesh, degree):
        self.mesh = mesh
        self.degree = degree
        d = mesh.dim
        self.block = n_coeffs(d, degree) * d
        self.ndof = self.block * mesh.n_cells

    def cell_dofs(self, c):
        return c * self.block + np.arange(self.block)

    def basis_at(self, c, pts):
        """Basis values at physical points: (npts, block, d)."""
        mesh = self.mesh
        d = mesh.dim
        geom = mesh.cell_geometry(c)
        lams = geom.barycentric(pts)
        b = bernstein_matrix(d, self.degree, lams)
        npts, nb = b.shape
        out = np.zeros((npts, nb * d, d))
        for qi in range(nb):
            for comp in range(d):
                out[:, qi * d + comp, comp] = b[:, qi]
        return out

    def strain_at(self, c, pts):
        """Symmetric-gradient values of the basis: (npts, block, nsym)."""
        from .poly import gradient_coeffs, multi_index_table
        mesh = self.mesh
        d = mesh.dim
        geom = mesh.cell_geometry(c)
        lams = geom.barycentric(pts)
        if self.degree == 0:
            return np.zeros((len(pts), self.block, n_sym(d)))
        bl = bernstein_matrix(d, self.degree - 1, lams)
        eye = np.eye(n_coeffs(d, self.degree))
        grads = gradient_coeffs(eye, d, self.degree, geom.grad_lambda)  # (ncl, nb, d)
        gvals = np.einsum("pn,nbs->pbs", bl, grads)  # (npts, nb, d) d/dx_s of each scalar
        npts, nb = bl.shape[0], eye.shape[0]
        out = np.zeros((npts, nb * d, n_sym(d)))
        for qi in range(nb):
            for comp in range(d):
                for cidx, (i, j) in enumerate(sym_pairs(d)):
                    val = 0.0
                    if i == comp:
                        val = val + 0.5 * gvals[:, qi, j]
                    if j == comp:
                        val = val + 0.5 * gvals[:, qi, i]
                    out[:, qi * d + comp, cidx] = val
        return out

    def field(self, c, coeffs):
        d = self.mesh.dim
        geom = self.mesh.cell_geometry(c)
        arr = coeffs.reshape(-1, d)
        return Poly(geom, self.degree, "vector", arr)


class RMSpace:
    """Piecewise rigid motions on the coarse mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        d = mesh.dim
        self.block = d + d * (d - 1) // 2
        self.ndof = self.block * mesh.n_cells
        self._rms = [RigidMotions(mesh.cell_geometry(c)) for c in range(mesh.n_cells)]

    def cell_dofs(self, c):
        return c * self.block + np.arange(self.block)

    def basis_at(self, c, pts):
        return self._rms[c].eval(pts).transpose(0, 2, 1)  # (npts, block, d)

    def strain_at(self, c, pts):
        return np.zeros((len(pts), self.block, n_sym(self.mesh.dim)))

    def field(self, c, coeffs):
        rm = self._rms[c]

        def ev(pts):
            return rm.eval(np.atleast_2d(pts)) @ coeffs
        return ev


class FaceSpace:
    """Vector polynomials on the interior faces (hybridization multipliers)."""

    def __init__(self, mesh, degree):
        self.mesh = mesh
        self.degree = degree
        d = mesh.dim
        self.block = n_coeffs(d - 1, degree) * d
        self.face_ids = mesh.interior_face_ids()
        self.index_of = {int(f): i for i, f in enumerate(self.face_ids)}
        self.ndof = self.block * len(self.face_ids)

    def face_dofs(self, fid):
        return self.index_of[int(fid)] * self.block + np.arange(self.block)

    def basis_at(self, fid, pts):
        mesh = self.mesh
        d = mesh.dim
        facet = mesh.face_geometry(fid)
        lams = facet.barycentric(pts)
        b = bernstein_matrix(d - 1, self.degree, lams)
        npts, nb = b.shape
        out = np.zeros((npts, nb * d, d))
        for qi in range(nb):
            for comp in range(d):
                out[:, qi * d + comp, comp] = b[:, qi]
        return out


# ---------------------------------------------------------------------------
# assembly helpers


def _cell_quadrature(splitmesh, c, degree):
    """Per-subcell quadrature of a coarse cell: (pts, w, lams_sub) triples."""
    split = splitmesh.split(c)
    out = []
    for i, sub in enumerate(split.subcells):
        pts, w, lams = entity_quadrature(sub, degree)
        out.append((i, pts, w, lams))
    return out


def _stress_values(el, gdofs_unused, lams, i):
    b = bernstein_matrix(el.d, el.degree, lams)
    vals = np.einsum("pn,snc->psc", b, el.nodal[:, i])
    return vals


def _stress_divs(el, lams, i):
    from .poly import gradient_coeffs
    d = el.d
    sub = el.split.subcells[i]
    bl = bernstein_matrix(d, el.degree - 1, lams)
    divs = []
    from .poly import sym_pair_index
    lut = sym_pair_index(d)
    grads = gradient_coeffs(el.nodal[:, i].transpose(1, 0, 2), d, el.degree,
                            sub.grad_lambda)  # (nc_k-1, nshape, nsym, d)
    dv = np.zeros((grads.shape[0], el.dim, d))
    for a in range(d):
        for b_ in range(d):
            dv[:, :, a] += grads[:, :, lut[(a, b_)], b_]
    return np.einsum("pn,nsd->psd", bl, dv)


class CellBasisCache:
    """Per-cell stress basis values and divergences at subcell quadrature nodes."""

    def __init__(self, gs, quad_degree):
        self.gs = gs
        self.quad_degree = quad_degree
        self._cache = {}

    def get(self, c):
        got = self._cache.get(c)
        if got is None:
            el = self.gs.elements[c]
            packs = []
            for i, pts, w, lams in _cell_quadrature(self.gs.splitmesh, c, self.quad_degree):
                vals = _stress_values(el, None, lams, i)
                divs = _stress_divs(el, lams, i)
                packs.append((i, pts, w, vals, divs))
            got = packs
            self._cache[c] = got
        return got


def assemble_mixed(problem, gs, uspace, stabilized, quad_degree=None):
    """Sparse blocks of the mixed system: compliance/stabilization and coupling."""
    d = gs.mesh.dim
    qd = quad_degree or max(2 * gs.k + 4, 2 * gs.elements[0].degree)
    amat = compliance_matrix(d, problem.mu, problem.lam)
    sw = sym_weights(d)
    cache = CellBasisCache(gs, qd)
    rows_a, cols_a, vals_a = [], [], []
    rows_b, cols_b, vals_b = [], [], []
    rhs_sigma = np.zeros(gs.ndof)
    rhs_u = np.zeros(uspace.ndof)
    mass_u = sp.lil_matrix((uspace.ndof, uspace.ndof))
    for c in range(gs.mesh.n_cells):
        el = gs.elements[c]
        gd = gs.cell_dofs(c)
        ud = uspace.cell_dofs(c)
        aloc = np.zeros((el.dim, el.dim))
        bloc = np.zeros((uspace.block, el.dim))
        mloc = np.zeros((uspace.block, uspace.block))
        fs = np.zeros(el.dim)
        fu = np.zeros(uspace.block)
        for i, pts, w, vals, divs in cache.get(c):
            compl = vals @ amat.T
            aloc += np.einsum("p,psc,c,ptc->st", w, compl, sw, vals)
            if stabilized:
                aloc += np.einsum("p,psd,ptd->st", w, divs, divs)
            ubas = uspace.basis_at(c, pts)
            bloc += np.einsum("p,pud,psd->us", w, ubas, divs)
            mloc += np.einsum("p,pud,pvd->uv", w, ubas, ubas)
            fv = problem.body_force(pts)
            if stabilized:
                # consistency term pairing with the divergence stabilization
                fs -= np.einsum("p,pd,psd->s", w, fv, divs)
            fu -= np.einsum("p,pd,pud->u", w, fv, ubas)
        src, tcol = np.meshgrid(gd, gd, indexing="ij")
        rows_a += [src.ravel()]
        cols_a += [tcol.ravel()]
        vals_a += [aloc.ravel()]
        r2, c2 = np.meshgrid(ud, gd, indexing="ij")
        rows_b += [r2.ravel()]
        cols_b += [c2.ravel()]
        vals_b += [bloc.ravel()]
        mass_u[np.ix_(ud, ud)] += mloc
        rhs_sigma[gd] += fs
        rhs_u[ud] += fu
    # natural boundary data on sigma rows
    rhs_sigma += boundary_term(problem, gs, qd)
    a = sp.coo_matrix((np.concatenate(vals_a),
                       (np.concatenate(rows_a), np.concatenate(cols_a))),
                      shape=(gs.ndof, gs.ndof)).tocsr()
    b = sp.coo_matrix((np.concatenate(vals_b),
                       (np.concatenate(rows_b), np.concatenate(cols_b))),
                      shape=(uspace.ndof, gs.ndof)).tocsr()
    return a, b, mass_u.tocsr(), rhs_sigma, rhs_u


def boundary_term(problem, gs, quad_degree):
    """<u_D, tau n> over the domain boundary, on the stress dofs."""
    mesh = gs.mesh
    d = mesh.dim
    out = np.zeros(gs.ndof)
    for fid in np.where(mesh.boundary)[0]:
        c = mesh.face_cells[fid, 0]
        iloc = int(np.where(mesh.cell_faces[c] == fid)[0][0])
        el = gs.elements[c]
        gd = gs.cell_dofs(c)
        split = gs.splitmesh.split(c)
        facet = mesh.face_geometry(fid)
        pts, w, _ = entity_quadrature(facet, quad_degree)
        lams = split.subcells[iloc].barycentric(pts)
        vals = _stress_values(el, None, lams, iloc)  # (npts, nloc, nsym)
        n_out = split.base.outward_normal(iloc)
        nmat = sym_vec_matrix(n_out, d)
        traces = np.einsum("psc,ic->psi", vals, nmat)
        ud = problem.dirichlet(pts)
        out[gd] += np.einsum("p,pi,psi->s", w, ud, traces)
    return out


@dataclass
class MixedSolution:
    """Solution of a conforming mixed solve: global stress plus DG displacement."""

    problem: ElasticityProblem
    stress: StressField
    uspace: object
    u_coeffs: np.ndarray
    k: int
    info: dict = field(default_factory=dict)

    @property
    def space(self):
        return self.stress.space

    def sigma_cell(self, c):
        return self.stress.cell_field(c)

    def u_cell(self, c):
        return self.uspace.field(c, self.u_coeffs[self.uspace.cell_dofs(c)])

    def face_value(self, fid, pts):
        return None


def solve_stabilized(problem, gs, quad_degree=None):
    """Stabilized mixed method: divergence-augmented form, conforming stress."""
    if gs.k < 2:
        raise DomainError("the stabilized method needs k >= 2")
    uspace = DGSpace(gs.mesh, gs.k - 1)
    a, b, _, rhs_s, rhs_u = assemble_mixed(problem, gs, uspace, stabilized=True,
                                           quad_degree=quad_degree)
    kmat = sp.bmat([[a, b.T], [b, None]], format="csc")
    rhs = np.concatenate([rhs_s, rhs_u])
    sol = spla.spsolve(kmat, rhs)
    if not np.all(np.isfinite(sol)):
        raise NumericalError("stabilized solve failed")
    return MixedSolution(problem=problem, stress=gs.field(sol[: gs.ndof]),
                         uspace=uspace, u_coeffs=sol[gs.ndof:], k=gs.k)


def solve_mixed_conforming(problem, gs, uspace=None, quad_degree=None):
    """Plain mixed solve (no stabilization); oracle for hybrid equivalence."""
    uspace = uspace or DGSpace(gs.mesh, gs.k - 1)
    a, b, _, rhs_s, rhs_u = assemble_mixed(problem, gs, uspace, stabilized=False,
                                           quad_degree=quad_degree)
    kmat = sp.bmat([[a, b.T], [b, None]], format="csc")
    rhs = np.concatenate([rhs_s, rhs_u])
    sol = spla.spsolve(kmat, rhs)
    if not np.all(np.isfinite(sol)):
        raise NumericalError("mixed solve failed")
    return MixedSolution(problem=problem, stress=gs.field(sol[: gs.ndof]),
                         uspace=uspace, u_coeffs=sol[gs.ndof:], k=gs.k)


def solve_linear_pair(problem, splitmesh, pair, quad_degree=None):
    """Lowest-order mixed pairs: split stress with P1 displacement, or the
    reduced/rigid-motion stress families with piecewise rigid motions."""
    if pair == "split":
        gs = GlobalSpace(splitmesh, "linear-phi-split", 1)
        uspace = DGSpace(gs.mesh, 1)
    elif pair == "reduced-rm":
        gs = GlobalSpace(splitmesh, "linear-reduced", 1)
        uspace = RMSpace(gs.mesh)
    elif pair == "rm-rm":
        gs = GlobalSpace(splitmesh, "linear-rm", 1)
        uspace = RMSpace(gs.mesh)
    else:
        raise DomainError(f"unknown pair {pair!r}")
    a, b, _, rhs_s, rhs_u = assemble_mixed(problem, gs, uspace, stabilized=False,
                                           quad_degree=quad_degree or 8)
    kmat = sp.bmat([[a, b.T], [b, None]], format="csc")
    sol = spla.spsolve(kmat, np.concatenate([rhs_s, rhs_u]))
    if not np.all(np.isfinite(sol)):
        raise NumericalError("linear pair solve failed")
    return MixedSolution(problem=problem, stress=gs.field(sol[: gs.ndof]),
                         uspace=uspace, u_coeffs=sol[gs.ndof:], k=1)


# ---------------------------------------------------------------------------
# hybridized method


@dataclass
class HybridSolution:
    problem: ElasticityProblem
    splitmesh: SplitMesh
    k: int
    elements: list
    sigma_coeffs: list       # per cell, coefficients in the raw shape basis
    uspace: DGSpace
    u_coeffs: np.ndarray
    mult: FaceSpace
    mult_coeffs: np.ndarray
    info: dict = field(default_factory=dict)

    def sigma_cell(self, c):
        el = self.elements[c]
        coeffs = np.tensordot(self.sigma_coeffs[c], el.shapes, axes=(0, 0))
        return SplitPoly(el.split, el.degree, "sym", coeffs)

    def u_cell(self, c):
        return self.uspace.field(c, self.u_coeffs[self.uspace.cell_dofs(c)])

    def face_value(self, fid, pts):
        """Multiplier (face displacement trace); zero on boundary faces."""
        if int(fid) not in self.mult.index_of:
            return np.zeros((len(pts), self.splitmesh.dim))
        basis = self.mult.basis_at(fid, pts)
        return np.einsum("pud,u->pd", basis,
                         self.mult_coeffs[self.mult.face_dofs(fid)])


def solve_hybrid(problem, splitmesh, k, quad_degree=None):
    """Hybridized mixed method with element-wise static condensation.

    The discontinuous stress space uses the range-corrected local family;
    interior-face multipliers impose the normal continuity and the condensed
    system in the multipliers is symmetric positive definite.
    """
    if k < 2:
        raise DomainError("the hybridized method needs k >= 2")
    if not isinstance(splitmesh, SplitMesh):
        splitmesh = barycentric_refine(splitmesh)
    mesh = splitmesh.coarse
    d = mesh.dim
    elements = [build_element_cached("high-psi", splitmesh.split(c), k)
                for c in range(mesh.n_cells)]
    uspace = DGSpace(mesh, k - 1)
    mult = FaceSpace(mesh, k)
    qd = quad_degree or max(2 * k + 4, 2 * elements[0].degree)
    amat = compliance_matrix(d, problem.mu, problem.lam)
    sw = sym_weights(d)

    smat = sp.lil_matrix((mult.ndof, mult.ndof))
    srhs = np.zeros(mult.ndof)
    local = []
    min_pivot = np.inf
    for c in range(mesh.n_cells):
        el = elements[c]
        ns, nu = el.dim, uspace.block
        aloc = np.zeros((ns, ns))
        bloc = np.zeros((nu, ns))
        fs = np.zeros(ns)
        fu = np.zeros(nu)
        split = splitmesh.split(c)
        for i, sub in enumerate(split.subcells):
            pts, w, lams = entity_quadrature(sub, qd)
            b = bernstein_matrix(d, el.degree, lams)
            vals = np.einsum("pn,snc->psc", b, el.shapes[:, i])
            divs = _shape_divs(el, lams, i)
            compl = vals @ amat.T
            aloc += np.einsum("p,psc,c,ptc->st", w, compl, sw, vals)
            ubas = uspace.basis_at(c, pts)
            bloc += np.einsum("p,pud,psd->us", w, ubas, divs)
            fv = problem.body_force(pts)
            fu -= np.einsum("p,pd,pud->u", w, fv, ubas)
        # multiplier coupling and boundary data on the faces of the cell
        cloc = np.zeros((mult.block * (d + 1), ns))
        face_slots = []
        for iloc in range(d + 1):
            fid = mesh.cell_faces[c, iloc]
            facet = mesh.face_geometry(fid)
            pts, w, _ = entity_quadrature(facet, qd)
            lams = split.subcells[iloc].barycentric(pts)
            b = bernstein_matrix(d, el.degree, lams)
            vals = np.einsum("pn,snc->psc", b, el.shapes[:, iloc])
            nmat = sym_vec_matrix(mesh.face_normals[fid], d)
            traces = np.einsum("psc,ic->psi", vals, nmat)
            if mesh.boundary[fid]:
                n_out = split.base.outward_normal(iloc)
                outmat = sym_vec_matrix(n_out, d)
                tr_out = np.einsum("psc,ic->psi", vals, outmat)
                ud = problem.dirichlet(pts)
                fs += np.einsum("p,pi,psi->s", w, ud, tr_out)
                face_slots.append(None)
                continue
            mbas = mult.basis_at(fid, pts)
            sign = mesh.face_sign[c, iloc]
            block = -sign * np.einsum("p,pud,psd->us", w, mbas, traces)
            cloc[iloc * mult.block:(iloc + 1) * mult.block] = block
            face_slots.append(mult.face_dofs(fid))
        kloc = np.block([[aloc, bloc.T], [bloc, np.zeros((nu, nu))]])
        rloc = np.concatenate([fs, fu])
        cfull = np.hstack([cloc, np.zeros((cloc.shape[0], nu))])
        try:
            kinv_ct = np.linalg.solve(kloc, cfull.T)
            kinv_r = np.linalg.solve(kloc, rloc)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular local block on cell {c}") from exc
        sloc = cfull @ kinv_ct
        gloc = cfull @ kinv_r
        gdofs = np.concatenate([fs_ if fs_ is not None else np.full(mult.block, -1)
                                for fs_ in face_slots]).astype(int)
        keep = gdofs >= 0
        smat[np.ix_(gdofs[keep], gdofs[keep])] += sloc[np.ix_(keep, keep)]
        srhs[gdofs[keep]] += gloc[keep]
        local.append((kloc, cfull, rloc, gdofs, keep))

    if mult.ndof:
        smat = smat.tocsc()
        lam_sol = spla.spsolve(smat, srhs)
        if not np.all(np.isfinite(lam_sol)):
            raise NumericalError("condensed solve failed")
        if mult.ndof <= 2000:
            try:
                chol = np.linalg.cholesky(smat.toarray())
                min_pivot = float(np.min(np.diag(chol)) ** 2)
            except np.linalg.LinAlgError:
                raise NumericalError("condensed system is not positive definite")
    else:
        lam_sol = np.zeros(0)

    sigma_coeffs = []
    u_coeffs = np.zeros(uspace.ndof)
    for c, (kloc, cfull, rloc, gdofs, keep) in enumerate(local):
        lam_loc = np.zeros(cfull.shape[0])
        lam_loc[keep] = lam_sol[gdofs[keep]]
        y = np.linalg.solve(kloc, rloc - cfull.T @ lam_loc)
        ns = elements[c].dim
        sigma_coeffs.append(y[:ns])
        u_coeffs[uspace.cell_dofs(c)] = y[ns:]
    return HybridSolution(problem=problem, splitmesh=splitmesh, k=k,
                          elements=elements, sigma_coeffs=sigma_coeffs,
                          uspace=uspace, u_coeffs=u_coeffs, mult=mult,
                          mult_coeffs=lam_sol,
                          info={"condensed_min_pivot": min_pivot,
                                "condensed_ndof": mult.ndof})


def _shape_divs(el, lams, i):
    from .poly import gradient_coeffs, sym_pair_index
    d = el.d
    sub = el.split.subcells[i]
    bl = bernstein_matrix(d, el.degree - 1, lams)
    lut = sym_pair_index(d)
    grads = gradient_coeffs(el.shapes[:, i].transpose(1, 0, 2), d, el.degree,
                            sub.grad_lambda)
    dv = np.zeros((grads.shape[0], el.shapes.shape[0], d))
    for a in range(d):
        for b_ in range(d):
            dv[:, :, a] += grads[:, :, lut[(a, b_)], b_]
    return np.einsum("pn,nsd->psd", bl, dv)


# ---------------------------------------------------------------------------
# postprocessing and error norms


def postprocess_displacement(sol, quad_degree=None):
    """Per-cell strain-matching displacement reconstruction of degree k+1."""
    if isinstance(sol, HybridSolution):
        mesh = sol.splitmesh.coarse
        splitmesh = sol.splitmesh
    else:
        mesh = sol.space.mesh
        splitmesh = sol.space.splitmesh
    k = sol.k
    d = mesh.dim
    problem = sol.problem
    amat = compliance_matrix(d, problem.mu, problem.lam)
    sw = sym_weights(d)
    target = DGSpace(mesh, k + 1)
    qd = quad_degree or 2 * (k + 3)
    out = np.zeros(target.ndof)
    for c in range(mesh.n_cells):
        split = splitmesh.split(c)
        geom = mesh.cell_geometry(c)
        rm = RigidMotions(geom)
        nb = target.block
        gmat = np.zeros((nb, nb))
        rhs1 = np.zeros(nb)
        rmat = np.zeros((rm.dim, nb))
        rhs2 = np.zeros(rm.dim)
        sig = sol.sigma_cell(c)
        u0 = sol.u_cell(c)
        for i, sub in enumerate(split.subcells):
            pts, w, lams_sub = entity_quadrature(sub, qd)
            eps = target.strain_at(c, pts)
            gmat += np.einsum("p,puc,c,pvc->uv", w, eps, sw, eps)
            sv = sig.eval_subcell(i, lams_sub) @ amat.T
            rhs1 += np.einsum("p,pc,c,puc->u", w, sv, sw, eps)
            ub = target.basis_at(c, pts)
            rb = rm.eval(pts)
            rmat += np.einsum("p,pir,pui->ru", w, rb, ub)
            u0v = u0.eval_points(pts)
            rhs2 += np.einsum("p,pir,pi->r", w, rb, u0v)
        kloc = np.block([[gmat, rmat.T], [rmat, np.zeros((rm.dim, rm.dim))]])
        rloc = np.concatenate([rhs1, rhs2])
        y = np.linalg.solve(kloc, rloc)
        out[target.cell_dofs(c)] = y[:nb]
    return target, out


def error_norms(sol, quad_degree=None, postprocess=True):
    """L2/Hdiv stress errors, displacement error, face-coupled superconvergence
    norm, and the strain error of the reconstructed displacement."""
    problem = sol.problem
    hybrid = isinstance(sol, HybridSolution)
    if hybrid:
        mesh = sol.splitmesh.coarse
        splitmesh = sol.splitmesh
    else:
        mesh = sol.space.mesh
        splitmesh = sol.space.splitmesh
    d = mesh.dim
    k = sol.k
    qd = quad_degree or max(2 * k + 4, 2 * (k + 2))
    sw = sym_weights(d)
    err_sig = err_div = err_u = norm_sig = 0.0
    sup_vol = sup_face = post_eps = 0.0
    if postprocess and k >= 2:
        tspace, tcoeffs = postprocess_displacement(sol)
    else:
        tspace = tcoeffs = None
    for c in range(mesh.n_cells):
        split = splitmesh.split(c)
        geom = mesh.cell_geometry(c)
        sig = sol.sigma_cell(c)
        u0 = sol.u_cell(c)
        dv = sig.div()
        poly_u = not callable(u0)
        qproj = _l2_project_cell(geom, k - 1, problem.exact_u, qd) if poly_u else None
        ustar = (tspace.field(c, tcoeffs[tspace.cell_dofs(c)]).strain()
                 if tspace is not None else None)
        for i, sub in enumerate(split.subcells):
            pts, w, lams_sub = entity_quadrature(sub, qd)
            sv = sig.eval_subcell(i, lams_sub)
            se = problem.exact_sigma(pts)
            err_sig += np.einsum("p,pc,c->", w, (sv - se) ** 2, sw)
            norm_sig += np.einsum("p,pc,c->", w, se ** 2, sw)
            dvv = dv.eval_subcell(i, lams_sub)
            err_div += np.einsum("p,pd->", w, (dvv - problem.exact_div_sigma(pts)) ** 2)
            uv = u0(pts) if callable(u0) else u0.eval_points(pts)
            err_u += np.einsum("p,pd->", w, (uv - problem.exact_u(pts)) ** 2)
            if hybrid and k >= 2:
                diff = Poly(geom, k - 1, "vector", qproj - u0.coeffs)
                epsd = diff.strain().eval_points(pts)
                sup_vol += np.einsum("p,pc,c->", w, epsd ** 2, sw)
            if ustar is not None:
                ev = ustar.eval_points(pts)
                post_eps += np.einsum("p,pc,c->", w,
                                      (ev - problem.exact_strain(pts)) ** 2, sw)
        if hybrid:
            ht = geom.diameter
            for iloc in range(d + 1):
                fid = mesh.cell_faces[c, iloc]
                facet = mesh.face_geometry(fid)
                pts, w, _ = entity_quadrature(facet, qd)
                lamg = geom.barycentric(pts)
                v0 = bernstein_matrix(d, k - 1, lamg) @ qproj - u0.eval_points(pts)
                if mesh.boundary[fid]:
                    vb = np.zeros_like(v0)
                else:
                    vb = (_l2_face_project(facet, k, problem.exact_u, qd)(pts)
                          - sol.face_value(fid, pts))
                diff = v0 - vb
                sup_face += np.einsum("p,pd->", w, diff ** 2) / ht
    return {
        "sigma_l2": np.sqrt(err_sig),
        "sigma_hdiv": np.sqrt(err_sig + err_div),
        "sigma_l2_rel": np.sqrt(err_sig / max(norm_sig, 1e-300)),
        "u_l2": np.sqrt(err_u),
        "super_1h": np.sqrt(sup_vol + sup_face) if hybrid else float("nan"),
        "post_eps": np.sqrt(post_eps) if tspace is not None else float("nan"),
    }


def _l2_project_cell(geom, degree, func, qd):
    d = geom.dim
    pts, w, lams = entity_quadrature(geom, qd)
    b = bernstein_matrix(d, degree, lams)
    gram = bernstein_gram(d, degree, geom.measure)
    vals = func(pts)
    return np.linalg.solve(gram, b.T @ (w[:, None] * vals))


def _l2_face_project(facet, degree, func, qd):
    dm = facet.dim
    pts, w, lams = entity_quadrature(facet, qd)
    b = bernstein_matrix(dm, degree, lams)
    gram = b.T @ (w[:, None] * b)
    coeffs = np.linalg.solve(gram, b.T @ (w[:, None] * func(pts)))

    def ev(p):
        lam = facet.barycentric(p)
        return bernstein_matrix(dm, degree, lam) @ coeffs
    return ev


def hybrid_jump_max(sol, quad_degree=None):
    """Largest relative normal jump of the recovered hybrid stress."""
    splitmesh = sol.splitmesh
    mesh = splitmesh.coarse
    d = mesh.dim
    qd = quad_degree or 2 * sol.k + 4
    worst, scale = 0.0, 1e-300
    for fid in mesh.interior_face_ids():
        c1, c2 = mesh.face_cells[fid]
        facet = mesh.face_geometry(fid)
        pts, _, _ = entity_quadrature(facet, qd)
        nv = mesh.face_normals[fid]
        nmat = sym_vec_matrix(nv, d)
        tr = []
        for c in (c1, c2):
            iloc = int(np.where(mesh.cell_faces[c] == fid)[0][0])
            split = splitmesh.split(c)
            lams = split.subcells[iloc].barycentric(pts)
            tr.append(sol.sigma_cell(c).eval_subcell(iloc, lams) @ nmat.T)
        worst = max(worst, np.abs(tr[0] - tr[1]).max())
        scale = max(scale, np.abs(tr[0]).max())
    # also check the fine interior faces within each cell
    for c in range(mesh.n_cells):
        split = splitmesh.split(c)
        sig = sol.sigma_cell(c)
        for rec in split.interior_faces:
            i, j = rec.pair
            pts, _, _ = entity_quadrature(rec.facet, qd)
            nmat = sym_vec_matrix(rec.normal, d)
            vi = sig.eval_subcell(i, split.subcells[i].barycentric(pts)) @ nmat.T
            vj = sig.eval_subcell(j, split.subcells[j].barycentric(pts)) @ nmat.T
            worst = max(worst, np.abs(vi - vj).max())
            scale = max(scale, np.abs(vi).max())
    return worst / scale


def global_jump_max(field, quad_degree=8):
    """Largest relative normal jump of a conforming global stress field."""
    gs = field.space
    mesh = gs.mesh
    splitmesh = gs.splitmesh
    d = mesh.dim
    worst, scale = 0.0, 1e-300
    for fid in mesh.interior_face_ids():
        c1, c2 = mesh.face_cells[fid]
        facet = mesh.face_geometry(fid)
        pts, _, _ = entity_quadrature(facet, quad_degree)
        nmat = sym_vec_matrix(mesh.face_normals[fid], d)
        tr = []
        for c in (c1, c2):
            iloc = int(np.where(mesh.cell_faces[c] == fid)[0][0])
            split = splitmesh.split(c)
            lams = split.subcells[iloc].barycentric(pts)
            tr.append(field.cell_field(c).eval_subcell(iloc, lams) @ nmat.T)
        worst = max(worst, np.abs(tr[0] - tr[1]).max())
        scale = max(scale, np.abs(tr[0]).max())
    for c in range(mesh.n_cells):
        split = splitmesh.split(c)
        sig = field.cell_field(c)
        for rec in split.interior_faces:
            i, j = rec.pair
            pts, _, _ = entity_quadrature(rec.facet, quad_degree)
            nmat = sym_vec_matrix(rec.normal, d)
            vi = sig.eval_subcell(i, split.subcells[i].barycentric(pts)) @ nmat.T
            vj = sig.eval_subcell(j, split.subcells[j].barycentric(pts)) @ nmat.T
            worst = max(worst, np.abs(vi - vj).max())
            scale = max(scale, np.abs(vi).max())
    return worst / scale
