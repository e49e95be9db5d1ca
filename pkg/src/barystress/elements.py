"""Local H(div)-conforming symmetric stress elements on barycentric splits.

Every family is built as an explicit list of piecewise shape functions on the
split cell together with a list of degree-of-freedom functionals, and is
certified numerically: coefficient rank (direct sums), Vandermonde condition
number (unisolvence), and interior normal-jump residuals (conformity).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import CertificationError, DomainError
from .frames import (build_frame, face_rigid_motions, global_normal_frame,
                     pair_field)
from .geometry import SplitSimplex
from .poly import (Poly, SplitPoly, bernstein_matrix, bubble, elevate_coeffs,
                   entity_quadrature, extend_coeffs, extend_face_to_split,
                   multi_index_table, multiply_coeffs, n_coeffs, n_sym,
                   project_poly, project_rigid_motion, split_bubble,
                   sym_bilinear_row, sym_outer, sym_vec_matrix, sym_weights)
from .simplex import IndexSet, interior_subsimplices, subsimplices

FAMILIES = ("linear-phi-split", "linear-reduced", "linear-rm",
            "high-phi-split", "high-phi-nn", "high-reduced", "high-psi",
            "rt-plus")

COND_LIMIT = 1e8
RANK_RTOL = 1e-10


def nullspace(a, rtol=RANK_RTOL):
    """Orthonormal basis (columns) of the nullspace of a."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] == 0:
        return np.eye(a.shape[1])
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    tol = (s[0] if len(s) else 0.0) * rtol
    rank = int((s > tol).sum())
    return vt[rank:].T.copy()


def numeric_rank(a, rtol=RANK_RTOL):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if min(a.shape) == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int((s > s[0] * rtol).sum()) if s[0] > 0 else 0


# ---------------------------------------------------------------------------
# face bookkeeping shared with global assembly


@dataclass
class FaceData:
    """Orientation data of one coarse face of a cell.

    order is the tuple of local vertex labels of the face in the ordering the
    degrees of freedom use (sorted by global vertex id on a mesh); the fixed
    normal may differ from the outward one by the recorded sign.
    """

    opposite: int
    order: tuple
    normal: np.ndarray
    sign: float = 1.0


def default_face_data(split):
    d = split.dim
    out = []
    for i in range(d + 1):
        order = tuple(m for m in range(d + 1) if m != i)
        out.append(FaceData(opposite=i, order=order,
                            normal=split.base.outward_normal(i), sign=1.0))
    return out


# ---------------------------------------------------------------------------
# degree of freedom functionals


@dataclass
class DoFTerm:
    subcell: int
    lams: np.ndarray      # (npts, d+1) barycentric coordinates in the subcell
    weights: np.ndarray   # (npts, nsym); includes quadrature weights and averaging
    key: tuple            # evaluation cache key


@dataclass
class DoFFunctional:
    kind: str
    entity: tuple
    terms: list

    def apply(self, field):
        """Evaluate on a SplitPoly (or an equal-layout coefficient array)."""
        coeffs = field.coeffs if isinstance(field, SplitPoly) else field
        degree = field.degree if isinstance(field, SplitPoly) else None
        total = 0.0
        for t in self.terms:
            d = t.lams.shape[1] - 1
            k = degree if degree is not None else _degree_from(coeffs.shape[1], d)
            vals = bernstein_matrix(d, k, t.lams) @ coeffs[t.subcell]
            total += float((t.weights * vals).sum())
        return total


def _degree_from(ncoef, d):
    k = 0
    while n_coeffs(d, k) != ncoef:
        k += 1
        if k > 40:
            raise DomainError("cannot infer degree")
    return k


def apply_dofs(dofs, shapes, d, degree):
    """Vandermonde of a DoF list against shape coefficient arrays.

    shapes has shape (nshape, d+1, ncoef, nsym); evaluation matrices are
    cached per (subcell, quadrature) pair so each entity is visited once.
    """
    cache = {}
    v = np.zeros((len(dofs), shapes.shape[0]))
    for r, dof in enumerate(dofs):
        for t in dof.terms:
            got = cache.get(t.key)
            if got is None:
                b = bernstein_matrix(d, degree, t.lams)
                got = np.einsum("pn,snc->spc", b, shapes[:, t.subcell])
                cache[t.key] = got
            v[r] += np.einsum("pc,spc->s", t.weights, got)
    return v


# ---------------------------------------------------------------------------
# shape-function helpers


def _scalar_times_tensor(scal, tensor):
    """SplitPoly scalar field times a constant symmetric tensor."""
    return SplitPoly(scal.split, scal.degree, "sym",
                     scal.coeffs * np.asarray(tensor)[None, None, :])


def _unit_face_poly(ell, m, qi):
    c = np.zeros((n_coeffs(ell, m), 1))
    c[qi, 0] = 1.0
    return c


def _coarse_ext_scalar(split, f_labels, m, qi):
    """Degree-m coarse extension of the qi-th Bernstein function on entity f."""
    d = split.dim
    c = extend_coeffs(_unit_face_poly(len(f_labels) - 1, m, qi), d, m, tuple(f_labels))
    return Poly(split.base, m, "scalar", c)


def _split_ext_scalar(split, f_labels, m, qi):
    """Same extension but performed subcell-wise for entities with the center."""
    ent = split.entity(f_labels)
    q = Poly(ent, m, "scalar", _unit_face_poly(ent.dim, m, qi))
    return extend_face_to_split(q, split, f_labels)


def _sym_unit_tensors(d):
    return [row for row in np.eye(n_sym(d))]


# ---------------------------------------------------------------------------
# div bubbles and Nedelec-type face spaces


def div_bubble_space(cell, k):
    """Basis of the divergence bubbles: zero normal trace within degree k.

    Spanned by lambda_a lambda_b p t_ab (x) t_ab over vertex pairs a < b and
    p of degree k-2; empty for k < 2.  Returned as (ncoef, nsym) blocks.
    """
    if k < 2:
        return []
    d = cell.dim
    out = []
    for a in range(d + 1):
        for b in range(a + 1, d + 1):
            t = cell.vertices[b] - cell.vertices[a]
            tens = sym_outer(t, t)
            lab = bubble((a, b), cell)
            for qi in range(n_coeffs(d, k - 2)):
                q = Poly(cell, k - 2, "scalar", _unit_face_poly(d, k - 2, qi))
                scal = lab.multiply(q)
                out.append(scal.coeffs[:, 0:1] * tens[None, :])
    return out


def div_bubble_dim(d, k):
    from math import comb
    return d * (d + 1) // 2 * comb(k + d - 2, d) if k >= 2 else 0


@dataclass
class NDSpace:
    """First-kind Nedelec space on a facet, in the facet's affine chart."""

    facet: object
    order: int
    basis: np.ndarray      # (nbasis, ncoef(m+1), e) chart components, Bernstein

    @property
    def dim(self):
        return len(self.basis)

    def eval_chart(self, lams):
        e = self.facet.dim
        b = bernstein_matrix(e, self.order + 1, lams)
        return np.einsum("pn,qnc->qpc", b, self.basis)

    def eval_ambient(self, lams):
        vals = self.eval_chart(lams)
        return np.einsum("qpc,dc->qpd", vals, self.facet.edges)

    def contraction_residuals(self):
        """Residual of q . x from lying in P_{order+1}, per basis member."""
        e = self.facet.dim
        m1 = self.order + 1
        tab1 = multi_index_table(e, 1)
        out = []
        from .poly import elevation_matrix
        elev = elevation_matrix(e, m1, 1)
        for q in self.basis:
            r = np.zeros(n_coeffs(e, m1 + 1))
            for s in range(e):
                xi = np.zeros(e + 1)
                for row, a in enumerate(tab1):
                    if a[s + 1] == 1:
                        xi[row] = 1.0
                r += multiply_coeffs(q[:, s], xi, e, m1, 1)
            sol, *_ = np.linalg.lstsq(elev, r, rcond=None)
            out.append(float(np.linalg.norm(elev @ sol - r)))
        return out


def nd_space(facet, m):
    """Nedelec (first kind) tangential space of order m on a facet.

    Realized as full chart polynomials of degree m plus the homogeneous
    degree-(m+1) fields annihilated by contraction with the position vector.
    """
    e = facet.dim
    if m < 0 or e == 0:
        return NDSpace(facet=facet, order=max(m, 0),
                       basis=np.zeros((0, n_coeffs(e, max(m, 0) + 1), e)))
    basis = []
    from .poly import elevation_matrix
    elev = elevation_matrix(e, m, 1) if m >= 0 else None
    for qi in range(n_coeffs(e, m)):
        for c in range(e):
            b = np.zeros((n_coeffs(e, m + 1), e))
            b[:, c] = elev @ _unit_face_poly(e, m, qi)[:, 0]
            basis.append(b)
    # homogeneous chart monomials xi^g, |g| = m+1, with q . xi = 0
    mono = [g for g in multi_index_table(e, m + 1)[:, : e + 1]
            if True]  # placeholder; rebuilt below
    mono = _hom_exponents(e, m + 1)
    mono2 = _hom_exponents(e, m + 2)
    idx2 = {g: i for i, g in enumerate(mono2)}
    ncols = len(mono) * e
    a = np.zeros((len(mono2), ncols))
    for col_m, g in enumerate(mono):
        for s in range(e):
            gg = list(g)
            gg[s] += 1
            a[idx2[tuple(gg)], col_m * e + s] = 1.0
    for vec in nullspace(a).T:
        b = np.zeros((n_coeffs(e, m + 1), e))
        for col_m, g in enumerate(mono):
            for s in range(e):
                coef = vec[col_m * e + s]
                if abs(coef) > 1e-14:
                    b[:, s] += coef * _chart_monomial(e, m + 1, g)
        basis.append(b)
    return NDSpace(facet=facet, order=m, basis=np.array(basis))


def _hom_exponents(e, deg):
    if e == 1:
        return [(deg,)]
    out = []
    for g in multi_index_table(e - 1, deg):
        out.append(tuple(int(x) for x in g))
    return out


def _chart_monomial(e, deg, g):
    """Bernstein coefficients of the chart monomial xi^g (degree deg)."""
    coeffs = np.ones(1)
    cur = 0
    tab1 = multi_index_table(e, 1)
    for s, power in enumerate(g):
        xi = np.zeros(e + 1)
        for row, a in enumerate(tab1):
            if a[s + 1] == 1:
                xi[row] = 1.0
        for _ in range(power):
            coeffs = multiply_coeffs(coeffs, xi, e, cur, 1)
            cur += 1
    if cur < deg:
        coeffs = elevate_coeffs(coeffs, e, cur, deg)
    return coeffs


# ---------------------------------------------------------------------------
# trace-changing extensions


def _rm_as_poly(cell, vec_poly):
    """Rigid-motion projection of a vector polynomial, same-degree Poly."""
    rm, coeffs = project_rigid_motion(cell, vec_poly.eval_points,
                                      quad_degree=vec_poly.degree + 2)
    lin = project_poly(cell, 1, "vector", lambda pts: rm.eval(pts) @ coeffs,
                       quad_degree=4)
    return lin.elevate(vec_poly.degree)


def ext_nn(split, pair, p_coeffs):
    """Normal-normal face bubble across an interior split face, range-corrected.

    p_coeffs are the Bernstein coefficients of a linear weight on the face.
    The returned field keeps the boundary normal trace of the raw bubble on
    each adjacent subcell while its divergence is pushed into the subcell's
    rigid motions; the divergence residual of the correction is reported.
    """
    d = split.dim
    rec = split.interior_face(*pair)
    tens = sym_outer(rec.normal, rec.normal)
    member = SplitPoly.zero(split, d + 1, "sym")
    max_resid = 0.0
    for m in rec.pair:
        sub = split.subcells[m]
        positions = tuple(split.local_position(m, lab) for lab in rec.labels)
        b_face = bubble(positions, sub)
        p_ext = Poly(sub, 1, "scalar",
                     extend_coeffs(np.asarray(p_coeffs, dtype=float)[:, None], d, 1,
                                   positions))
        scal = b_face.multiply(p_ext)
        bnn = scal.coeffs[:, 0:1] * tens[None, :]
        target = Poly(sub, d + 1, "sym", bnn).div()
        p_perp = target.coeffs - _rm_as_poly(sub, target).coeffs
        bubbles = div_bubble_space(sub, d + 1)
        divs = np.array([Poly(sub, d + 1, "sym", c).div().coeffs.ravel()
                         for c in bubbles]).T
        x, *_ = np.linalg.lstsq(divs, p_perp.ravel(), rcond=None)
        resid = np.linalg.norm(divs @ x - p_perp.ravel())
        scale = max(np.linalg.norm(p_perp), 1e-30)
        max_resid = max(max_resid, resid / max(scale, 1.0))
        b0 = np.tensordot(x, np.array(bubbles), axes=(0, 0))
        member.coeffs[m] = bnn - b0
    if max_resid > 1e-9:
        raise CertificationError(f"nn extension residual {max_resid:.2e}")
    return member, {"div_residual": max_resid}


class PsiExtender:
    """Trace-preserving range correction of the matched-pair enrichments.

    Caches, per split cell, the interior (zero boundary normal trace) part of
    the nn-enriched composite space and its divergence matrix; extensions
    solve a least-squares problem in that bubble space.
    """

    def __init__(self, split, k, face_data=None):
        if k < 2:
            raise DomainError("range-corrected enrichments need k >= 2")
        self.split = split
        self.k = k
        self.degree = max(k, split.dim + 1)
        face_data = face_data or default_face_data(split)
        shapes, _ = _shapes_high_phi_nn(split, k, self.degree)
        d = split.dim
        bdry_dofs = []
        for fd in face_data:
            bdry_dofs.extend(_face_moment_dofs(split, fd, k, self.degree))
        mat = apply_dofs(bdry_dofs, shapes, d, self.degree)
        combos = nullspace(mat)
        self.bubble_coeffs = np.tensordot(combos.T, shapes, axes=(1, 0))
        self.div_matrix = np.array([
            SplitPoly(split, self.degree, "sym", c).div().coeffs.ravel()
            for c in self.bubble_coeffs]).T
        self.n_bubbles = len(self.bubble_coeffs)

    def coarse_rm_projection(self, field):
        """Project a piecewise vector field onto the rigid motions of the base cell."""
        split = self.split
        base = split.base
        from .poly import RigidMotions
        rm = RigidMotions(base)
        gram = np.zeros((rm.dim, rm.dim))
        rhs = np.zeros(rm.dim)
        for i, sub in enumerate(split.subcells):
            pts, w, lams = entity_quadrature(sub, field.degree + 2)
            basis = rm.eval(pts)
            gram += np.einsum("p,pia,pib->ab", w, basis, basis)
            vals = field.eval_subcell(i, lams)
            rhs += np.einsum("p,pia,pi->a", w, basis, vals)
        coeffs = np.linalg.solve(gram, rhs)
        lin = project_poly(base, 1, "vector", lambda pts: rm.eval(pts) @ coeffs,
                           quad_degree=4)
        return SplitPoly.from_coarse(lin, split).elevate(field.degree)

    def extend(self, phi):
        """Return psi with the boundary trace of phi and divergence in RM."""
        phi = phi.elevate(self.degree)
        div_phi = phi.div()
        p_perp = div_phi - self.coarse_rm_projection(div_phi)
        x, *_ = np.linalg.lstsq(self.div_matrix, p_perp.coeffs.ravel(), rcond=None)
        resid = np.linalg.norm(self.div_matrix @ x - p_perp.coeffs.ravel())
        scale = max(np.linalg.norm(p_perp.coeffs), 1.0)
        if resid / scale > 1e-9:
            raise CertificationError(f"pair extension residual {resid / scale:.2e}")
        b0 = SplitPoly(self.split, self.degree, "sym",
                       np.tensordot(x, self.bubble_coeffs, axes=(0, 0)))
        return phi - b0, {"div_residual": resid / scale}


def ext_psi(split, phi, k, extender=None):
    ext = extender or PsiExtender(split, k)
    return ext.extend(phi)


# ---------------------------------------------------------------------------
# shape blocks


def _phi_members(split, k):
    """Matched-pair enrichment shapes over the subsimplices of dimension <= d-2.

    Yields (f, shape SplitPoly of degree k) in a fixed deterministic order.
    """
    d = split.dim
    out = []
    for ell in range(0, d - 1):
        if ell > k - 1:
            continue
        for f in subsimplices(d, ell):
            bfr = split_bubble(f.labels, split)
            star = f.complement_star().labels
            for qi in range(n_coeffs(ell, k - ell - 1)):
                qc = _coarse_ext_scalar(split, f.labels, k - ell - 1, qi)
                scal = bfr.multiply(SplitPoly.from_coarse(qc, split))
                for a in range(len(star)):
                    for b in range(a + 1, len(star)):
                        ph = pair_field(f, star[a], star[b], split)
                        out.append((f, ph.multiply(scal)))
    return out


def _shapes_boundary_normal(split, k):
    """Polynomial shapes b_f q (x) N^f(S) with the face-normal tensor basis."""
    d = split.dim
    base = split.base
    out = []
    for ell in range(0, d):
        if ell > k - 1:
            continue
        for f in subsimplices(d, ell):
            frame = build_frame(f, base)
            tensors = []
            star = frame.star
            for ai in range(len(star)):
                for bi in range(ai, len(star)):
                    tensors.append(sym_outer(frame.face_normals[star[ai]],
                                             frame.face_normals[star[bi]]))
            for t in frame.tangents:
                for i in star:
                    tensors.append(sym_outer(t, frame.face_normals[i]))
            bf = bubble(f.labels, base)
            for qi in range(n_coeffs(ell, k - ell - 1)):
                qc = _coarse_ext_scalar(split, f.labels, k - ell - 1, qi)
                scal = SplitPoly.from_coarse(bf.multiply(qc), split)
                for tens in tensors:
                    out.append(_scalar_times_tensor(scal, tens))
    return out


def _shapes_interior_nn(split, k):
    d = split.dim
    out = []
    for ell in range(0, d):
        if ell > k - 1:
            continue
        for f in interior_subsimplices(d, ell):
            ent = split.entity(f.labels)
            normals = global_normal_frame(ent)
            bfr = split_bubble(f.labels, split)
            for qi in range(n_coeffs(ell, k - ell - 1)):
                qs = _split_ext_scalar(split, f.labels, k - ell - 1, qi)
                scal = bfr.multiply(qs)
                for a in range(len(normals)):
                    for b in range(a, len(normals)):
                        out.append(_scalar_times_tensor(
                            scal, sym_outer(normals[a], normals[b])))
    return out


def _shapes_fine_tn(split, k):
    """Tangential-normal blocks with split bubbles, at every entity of the split."""
    d = split.dim
    out = []
    ents = []
    for ell in range(1, d):
        if ell > k - 1:
            continue
        ents += [tuple(f.labels) for f in subsimplices(d, ell)]
        ents += [tuple(f.labels) for f in interior_subsimplices(d, ell)]
    for labels in ents:
        ent = split.entity(labels)
        normals = global_normal_frame(ent)
        pts = [split.vertex(m) for m in labels]
        bfr = split_bubble(labels, split)
        ell = ent.dim
        for qi in range(n_coeffs(ell, k - ell - 1)):
            qs = _split_ext_scalar(split, labels, k - ell - 1, qi)
            scal = bfr.multiply(qs)
            for m in range(1, len(labels)):
                t = pts[m] - pts[0]
                for nv in normals:
                    out.append(_scalar_times_tensor(scal, sym_outer(t, nv)))
    return out


def _shapes_interior_pairs(split, k):
    """Matched-pair fields anchored at entities that contain the barycenter."""
    d = split.dim
    out = []
    for ell in range(1, d):
        if ell > k - 1:
            continue
        for f in interior_subsimplices(d, ell):
            verts = [m for m in f.labels if m <= d]
            anchor = min(verts)
            others = [m for m in range(d + 1) if m not in f.labels]
            if len(others) < 2:
                continue
            bfr = split_bubble(f.labels, split)
            va = split.base.vertices[anchor]
            t_ac = split.center - va
            for qi in range(n_coeffs(ell, k - ell - 1)):
                qs = _split_ext_scalar(split, f.labels, k - ell - 1, qi)
                scal = bfr.multiply(qs)
                for a in range(len(others)):
                    for b in range(a + 1, len(others)):
                        i, j = others[a], others[b]
                        ph = SplitPoly.zero(split, 0, "sym")
                        ph.coeffs[i, 0] = sym_outer(t_ac, split.base.vertices[j] - va)
                        ph.coeffs[j, 0] = -sym_outer(t_ac, split.base.vertices[i] - va)
                        out.append(ph.multiply(scal))
    return out


def _shapes_subcell_tangential(split, k):
    """Single-subcell entity bubbles times tensors tangent to every interior
    face of the subcell containing the entity (zero normal jumps built in)."""
    from .simplex import center_label
    d = split.dim
    c = center_label(d)
    out = []
    for i in range(d + 1):
        sub = split.subcells[i]
        labs = split.sub_labels[i]
        for ell in range(1, d):
            if ell > k - 1:
                continue
            for ent_locals in combinations(range(d + 1), ell + 1):
                normals = []
                for p in range(d + 1):
                    if p in ent_locals or labs[p] == c:
                        continue
                    j = labs[p]
                    rec = split.interior_face(min(i, j), max(i, j))
                    normals.append(rec.normal)
                tang = nullspace(np.array(normals)) if normals else np.eye(d)
                if tang.shape[1] == 0:
                    continue
                blab = bubble(ent_locals, sub)
                for qi in range(n_coeffs(ell, k - ell - 1)):
                    qc = _unit_face_poly(ell, k - ell - 1, qi)
                    q = Poly(sub, k - ell - 1, "scalar",
                             extend_coeffs(qc, d, k - ell - 1, ent_locals))
                    scal = blab.multiply(q)
                    for a in range(tang.shape[1]):
                        for b in range(a, tang.shape[1]):
                            sp = SplitPoly.zero(split, k, "sym")
                            sp.coeffs[i] = (scal.coeffs[:, 0:1]
                                            * sym_outer(tang[:, a], tang[:, b])[None, :])
                            out.append(sp)
    return out


def _shapes_subcell_bubbles(split, k):
    d = split.dim
    out = []
    for i, sub in enumerate(split.subcells):
        for c in div_bubble_space(sub, k):
            sp = SplitPoly.zero(split, k, "sym")
            sp.coeffs[i] = c
            out.append(sp)
    return out


def _stack(shapes, split, degree):
    """Elevate SplitPoly shapes to a common degree and stack coefficient arrays."""
    arrs = []
    for s in shapes:
        s = s.elevate(degree) if s.degree != degree else s
        c = s.coeffs
        scale = np.abs(c).max()
        arrs.append(c / (scale if scale > 0 else 1.0))
    d = split.dim
    if not arrs:
        return np.zeros((0, d + 1, n_coeffs(d, degree), n_sym(d)))
    return np.array(arrs)


def _reduce_span(stacked, target=None, context=""):
    """Deterministic rank reduction of a redundant family via pivoted QR."""
    from scipy.linalg import qr
    flat = stacked.reshape(len(stacked), -1)
    r = numeric_rank(flat)
    if target is not None and r != target:
        raise CertificationError(f"{context}: span rank {r}, expected {target}")
    if r == len(stacked):
        return stacked, np.arange(len(stacked))
    _, _, piv = qr(flat.T, mode="economic", pivoting=True)
    sel = np.sort(piv[:r])
    return stacked[sel], sel


def _shapes_high_phi_split(split, k, degree):
    """Spanning family of the composite split space, reduced to a basis.

    The enumerated family is redundant by design (the same entity content can
    be realized with coarse or split bubbles); a pivoted QR keeps a
    deterministic independent subset whose size must match the closed-form
    dimension of the space.
    """
    shapes = (_shapes_boundary_normal(split, k)
              + [s for _, s in _phi_members(split, k)]
              + _shapes_interior_nn(split, k)
              + _shapes_fine_tn(split, k)
              + _shapes_interior_pairs(split, k)
              + _shapes_subcell_tangential(split, k)
              + _shapes_subcell_bubbles(split, k))
    stacked = _stack(shapes, split, degree)
    target = element_dimension("high-phi-split", split.dim, k)
    reduced, _ = _reduce_span(stacked, target, f"composite split space d={split.dim} k={k}")
    return reduced


def _shapes_high_phi_nn(split, k, degree):
    """Composite basis plus the range-corrected nn face bubbles.

    The enrichment overlaps the composite space for some (d, k); the returned
    basis keeps every composite member and an independent subset of the
    enrichment, so its size is the actual dimension of the sum.
    """
    base = _shapes_high_phi_split(split, k, degree)
    d = split.dim
    extra = []
    reports = []
    for rec in split.interior_faces:
        for qi in range(n_coeffs(d - 1, 1)):
            member, rep = ext_nn(split, rec.pair, _unit_face_poly(d - 1, 1, qi)[:, 0])
            extra.append(member)
            reports.append(rep)
    stacked = np.concatenate([base, _stack(extra, split, degree)], axis=0)
    flat = stacked.reshape(len(stacked), -1)
    r = numeric_rank(flat)
    if r > len(base):
        from scipy.linalg import qr
        q_base = np.linalg.qr(flat[: len(base)].T)[0]
        resid = flat[len(base):] - (flat[len(base):] @ q_base) @ q_base.T
        _, _, piv = qr(resid.T, mode="economic", pivoting=True)
        sel = np.sort(piv[: r - len(base)])
        stacked = np.concatenate([base, stacked[len(base) + sel]], axis=0)
    else:
        stacked = base
    return stacked, reports


def _shapes_coarse_polynomials(split, k):
    from .poly import split_conversion
    d = split.dim
    out = []
    conv = [np.asarray(split_conversion(d, k, i)) for i in range(d + 1)]
    eye = np.eye(n_coeffs(d, k))
    for qi in range(n_coeffs(d, k)):
        col = eye[:, qi]
        blocks = np.stack([conv[i] @ col for i in range(d + 1)])
        for tens in _sym_unit_tensors(d):
            sp = SplitPoly(split, k, "sym",
                           blocks[:, :, None] * np.asarray(tens)[None, None, :])
            out.append(sp)
    return out


# ---------------------------------------------------------------------------
# degree-of-freedom builders


def _face_moment_dofs(split, fd, k, degree):
    """Moments of the normal trace against vector polynomials on a coarse face."""
    d = split.dim
    facet = split.coarse_face(fd.opposite, fd.order)
    pts, w, lams_f = entity_quadrature(facet, degree + k + 2)
    sub = fd.opposite
    lams_sub = split.subcells[sub].barycentric(pts)
    bq = bernstein_matrix(d - 1, k, lams_f)
    nmat = sym_vec_matrix(fd.normal, d)
    key = ("face", fd.opposite, k)
    out = []
    for qi in range(bq.shape[1]):
        for comp in range(d):
            wmat = (w * bq[:, qi])[:, None] * nmat[comp][None, :] / facet.measure
            out.append(DoFFunctional("face_moment", tuple(fd.order),
                                     [DoFTerm(sub, lams_sub, wmat, key)]))
    return out


def _interior_moment_dofs(split, m, degree, sym_basis=None):
    """Cell moments against P_m(T; S); sym_basis defaults to the unit tensors."""
    d = split.dim
    base = split.base
    sym_basis = sym_basis if sym_basis is not None else _sym_unit_tensors(d)
    sw = sym_weights(d)
    percell = []
    for i, sub in enumerate(split.subcells):
        pts, w, lams = entity_quadrature(sub, degree + m + 2)
        lams_c = base.barycentric(pts)
        qvals = bernstein_matrix(d, m, lams_c)
        percell.append((i, lams, w, qvals))
    out = []
    for qi in range(n_coeffs(d, m)):
        for si, tens in enumerate(sym_basis):
            terms = []
            for i, lams, w, qvals in percell:
                wmat = (w * qvals[:, qi])[:, None] * (sw * np.asarray(tens))[None, :]
                terms.append(DoFTerm(i, lams, wmat / base.measure,
                                     ("cellmom", i, m)))
            out.append(DoFFunctional("interior_moment", ("cell",), terms))
    return out


def _nn_entity_dofs(split, f_labels, k, degree):
    """Normal-normal moments on an interior subsimplex, global normal frame."""
    d = split.dim
    ent = split.entity(f_labels)
    ell = ent.dim
    normals = global_normal_frame(ent)
    subs = split.subcells_containing(f_labels)
    pts, w, lams_e = entity_quadrature(ent, degree + k + 2)
    bq = bernstein_matrix(ell, k - ell - 1, lams_e)
    sub_lams = {i: split.subcells[i].barycentric(pts) for i in subs}
    out = []
    for a in range(len(normals)):
        for b in range(a, len(normals)):
            row = sym_bilinear_row(normals[a], normals[b], d)
            for qi in range(bq.shape[1]):
                terms = []
                for i in subs:
                    wmat = ((w * bq[:, qi])[:, None] * row[None, :]
                            / (ent.measure * len(subs)))
                    terms.append(DoFTerm(i, sub_lams[i], wmat,
                                         ("ent", tuple(f_labels), k)))
                out.append(DoFFunctional("nn_subsimplex_moment", tuple(f_labels),
                                         terms))
    return out


def _tn_face_dofs(split, rec, k, degree):
    """Tangential moments of the normal trace on interior faces (Nedelec tests)."""
    if k < 2:
        return []
    nds = nd_space(rec.facet, k - 2)
    if nds.dim == 0:
        return []
    d = split.dim
    pts, w, lams_f = entity_quadrature(rec.facet, degree + k + 2)
    qvecs = nds.eval_ambient(lams_f)  # (nb, npts, d)
    sub_lams = {i: split.subcells[i].barycentric(pts) for i in rec.pair}
    out = []
    for qb in range(nds.dim):
        rows = np.array([sym_bilinear_row(qvecs[qb, p], rec.normal, d)
                         for p in range(len(pts))])
        terms = []
        for i in rec.pair:
            wmat = w[:, None] * rows / (rec.facet.measure * 2.0)
            terms.append(DoFTerm(i, sub_lams[i], wmat, ("iface", rec.pair, k)))
        out.append(DoFFunctional("tn_face_moment", rec.labels, terms))
    return out


def _field_moment_dofs(split, fields, degree, kind="enrichment_moment"):
    """Cell moments against explicitly given piecewise symmetric test fields."""
    d = split.dim
    sw = sym_weights(d)
    vol = split.base.measure
    percell = []
    for i, sub in enumerate(split.subcells):
        pts, w, lams = entity_quadrature(sub, 2 * degree + 2)
        bmat = bernstein_matrix(d, degree, lams)
        percell.append((i, lams, w, bmat, sub.measure))
    out = []
    for field in fields:
        terms = []
        for i, lams, w, bmat, _meas in percell:
            qvals = bmat @ field[i]
            wmat = w[:, None] * qvals * sw[None, :] / vol
            terms.append(DoFTerm(i, lams, wmat, ("fieldmom", i, degree)))
        out.append(DoFFunctional(kind, ("cell",), terms))
    return out


def _bubble_moment_dofs(split, k, degree):
    d = split.dim
    sw = sym_weights(d)
    out = []
    for i, sub in enumerate(split.subcells):
        bubbles = div_bubble_space(sub, k)
        if not bubbles:
            continue
        pts, w, lams = entity_quadrature(sub, degree + k + 2)
        bmat = bernstein_matrix(d, k, lams)
        for c in bubbles:
            qvals = bmat @ c  # (npts, nsym)
            wmat = w[:, None] * qvals * sw[None, :] / sub.measure
            out.append(DoFFunctional("interior_moment", ("subcell", i),
                                     [DoFTerm(i, lams, wmat, ("bub", i, k))]))
    return out


def _rm_face_dofs(split, fd, degree):
    """Face moments against P_1(F) n_F plus the in-plane rigid motions of F."""
    d = split.dim
    facet = split.coarse_face(fd.opposite, fd.order)
    pts, w, lams_f = entity_quadrature(facet, degree + 3)
    sub = fd.opposite
    lams_sub = split.subcells[sub].barycentric(pts)
    key = ("facerm", fd.opposite)
    out = []
    b1 = bernstein_matrix(d - 1, 1, lams_f)
    row_nn = sym_bilinear_row(fd.normal, fd.normal, d)
    for qi in range(b1.shape[1]):
        wmat = (w * b1[:, qi])[:, None] * row_nn[None, :] / facet.measure
        out.append(DoFFunctional("face_moment", tuple(fd.order),
                                 [DoFTerm(sub, lams_sub, wmat, key)]))
    rm_eval, rm_dim = face_rigid_motions(facet, fd.normal)
    rvals = rm_eval(pts)  # (npts, d, nrm)
    for r in range(rm_dim):
        rows = np.array([sym_bilinear_row(rvals[p, :, r], fd.normal, d)
                         for p in range(len(pts))])
        wmat = w[:, None] * rows / facet.measure
        out.append(DoFFunctional("face_moment", tuple(fd.order),
                                 [DoFTerm(sub, lams_sub, wmat, key)]))
    return out


# ---------------------------------------------------------------------------
# element spaces


@dataclass
class ElementSpace:
    family: str
    d: int
    k: int
    split: SplitSimplex
    degree: int
    shapes: np.ndarray          # (nshape, d+1, ncoef, nsym)
    dofs: list
    face_data: list
    vandermonde: np.ndarray
    nodal: np.ndarray           # nodal basis coefficients, same layout as shapes
    cond: float
    face_dof_slices: list       # per local face, slice into the dof list
    interior_dof_slice: slice
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return len(self.shapes)

    def nodal_field(self, coeffs):
        """SplitPoly from local dof values."""
        c = np.tensordot(np.asarray(coeffs, dtype=float), self.nodal, axes=(0, 0))
        return SplitPoly(self.split, self.degree, "sym", c)

    def dof_values(self, field):
        return np.array([dof.apply(field) for dof in self.dofs])


def _finalize(family, split, k, degree, shapes, dof_groups, face_data,
              cond_limit=COND_LIMIT):
    """Assemble the Vandermonde, invert it, and record the dof layout."""
    d = split.dim
    dofs = []
    face_slices = [None] * (d + 1)
    for name, payload in dof_groups:
        if name == "face":
            iface, items = payload
            face_slices[iface] = slice(len(dofs), len(dofs) + len(items))
            dofs.extend(items)
        else:
            dofs.extend(payload)
    interior_start = max((s.stop for s in face_slices if s is not None), default=0)
    interior = slice(interior_start, len(dofs))
    if len(dofs) != len(shapes):
        raise CertificationError(
            f"{family}: {len(dofs)} dofs vs {len(shapes)} shapes")
    vand = apply_dofs(dofs, shapes, d, degree)
    u, s, vt = np.linalg.svd(vand)
    if s[-1] <= 0 or s[0] / s[-1] > cond_limit:
        raise CertificationError(
            f"{family}: Vandermonde condition {s[0] / max(s[-1], 1e-300):.2e}")
    cond = s[0] / s[-1]
    vinv = vt.T @ np.diag(1.0 / s) @ u.T
    nodal = np.tensordot(vinv.T, shapes, axes=(1, 0))
    return ElementSpace(family=family, d=d, k=k, split=split, degree=degree,
                        shapes=shapes, dofs=dofs, face_data=face_data,
                        vandermonde=vand, nodal=nodal, cond=cond,
                        face_dof_slices=face_slices, interior_dof_slice=interior)


def _build_linear_phi_split(split, face_data):
    d = split.dim
    from .poly import split_hat
    shapes = []
    hat_c = split_hat(d + 1, split)
    for tens in _sym_unit_tensors(d):
        shapes.append(_scalar_times_tensor(hat_c, tens))
    for m in range(d + 1):
        hat = split_hat(m, split)
        for tens in _sym_unit_tensors(d):
            shapes.append(_scalar_times_tensor(hat, tens))
        star = [i for i in range(d + 1) if i != m]
        for a in range(len(star)):
            for b in range(a + 1, len(star)):
                ph = pair_field(IndexSet((m,), d), star[a], star[b], split)
                shapes.append(ph.multiply(hat))
    stacked = _stack(shapes, split, 1)
    groups = [("face", (fd.opposite, _face_moment_dofs(split, fd, 1, 1)))
              for fd in face_data]
    groups.append(("interior", _interior_moment_dofs(split, 0, 1)))
    return _finalize("linear-phi-split", split, 1, 1, stacked, groups, face_data)


def _constrained_basis(parent_shapes, constraint):
    combos = nullspace(constraint)
    return np.tensordot(combos.T, parent_shapes, axes=(1, 0))


def _div_moment_matrix(split, shapes, degree, test_coeff_sets):
    """Rows of (div tau, q) for q given by P_1 coefficient vectors on the base."""
    d = split.dim
    base = split.base
    rows = np.zeros((len(test_coeff_sets), len(shapes)))
    for i, sub in enumerate(split.subcells):
        pts, w, lams = entity_quadrature(sub, degree + 2)
        lams_c = base.barycentric(pts)
        b1 = bernstein_matrix(d, 1, lams_c)
        divs = np.array([
            SplitPoly(split, degree, "sym", s).div().eval_subcell(i, lams)
            for s in shapes])  # (nshape, npts, d)
        for r, q in enumerate(test_coeff_sets):
            qv = b1 @ q  # (npts, d)
            rows[r] += np.einsum("p,spi,pi->s", w, divs, qv)
    return rows


def _p1_complement_of_rm(split):
    """Coefficient vectors of an L2-orthogonal complement of RM in P_1(T; R^d)."""
    d = split.dim
    base = split.base
    from .poly import RigidMotions
    rm = RigidMotions(base)
    pts, w, lams = entity_quadrature(base, 4)
    b1 = bernstein_matrix(d, 1, lams)
    rvals = rm.eval(pts)  # (npts, d, nrm)
    # pairing of every P1 basis field with every rigid motion
    pair = np.einsum("p,pb,pir->rbi", w, b1, rvals).reshape(rm.dim, -1)
    comp = nullspace(pair)
    return [c.reshape(-1, d) for c in comp.T]


def _build_linear_reduced(split, face_data):
    parent = _build_linear_phi_split(split, face_data)
    tests = _p1_complement_of_rm(split)
    constraint = _div_moment_matrix(split, parent.shapes, 1, tests)
    shapes = _constrained_basis(parent.shapes, constraint)
    groups = [("face", (fd.opposite, _face_moment_dofs(split, fd, 1, 1)))
              for fd in face_data]
    return _finalize("linear-reduced", split, 1, 1, shapes, groups, face_data)


def _face_trace_complement(split, fd):
    """Complement of P_1(F) n_F + RM(F) inside P_1(F; R^d), as point evaluators."""
    d = split.dim
    facet = split.coarse_face(fd.opposite, fd.order)
    pts, w, lams_f = entity_quadrature(facet, 4)
    b1 = bernstein_matrix(d - 1, 1, lams_f)
    nc1 = b1.shape[1]
    # columns: allowed fields sampled at quadrature points
    allowed = []
    for qi in range(nc1):
        allowed.append(b1[:, qi][:, None] * fd.normal[None, :])
    rm_eval, rm_dim = face_rigid_motions(facet, fd.normal)
    rvals = rm_eval(pts)
    for r in range(rm_dim):
        allowed.append(rvals[:, :, r])
    # full P_1(F; R^d) coefficient basis
    full = []
    for qi in range(nc1):
        for comp in range(d):
            e = np.zeros(d)
            e[comp] = 1.0
            full.append(b1[:, qi][:, None] * e[None, :])
    full = np.array(full)           # (nfull, npts, d)
    allowed = np.array(allowed)     # (nallow, npts, d)
    # combinations of the full basis with zero L2 pairing against every allowed field
    pair = np.einsum("p,api,bpi->ab", w, allowed, full)
    comp = nullspace(pair)
    fields = np.tensordot(comp.T, full, axes=(1, 0))  # (ncomp, npts, d)
    return facet, pts, w, fields


def _build_linear_rm(split, face_data):
    parent = _build_linear_reduced(split, face_data)
    d = split.dim
    rows = []
    for fd in face_data:
        facet, pts, w, fields = _face_trace_complement(split, fd)
        lams_sub = split.subcells[fd.opposite].barycentric(pts)
        traces = np.array([
            SplitPoly(split, 1, "sym", s).eval_subcell(fd.opposite, lams_sub)
            for s in parent.shapes])  # (nshape, npts, nsym)
        nmat = sym_vec_matrix(fd.normal, d)  # (d, nsym)
        tn = np.einsum("spc,ic->spi", traces, nmat)
        for f in fields:
            rows.append(np.einsum("p,spi,pi->s", w, tn, f))
    shapes = _constrained_basis(parent.shapes, np.array(rows))
    groups = [("face", (fd.opposite, _rm_face_dofs(split, fd, 1)))
              for fd in face_data]
    return _finalize("linear-rm", split, 1, 1, shapes, groups, face_data)


def _high_phi_split_dof_groups(split, k, degree, face_data):
    d = split.dim
    groups = [("face", (fd.opposite, _face_moment_dofs(split, fd, k, degree)))
              for fd in face_data]
    nn = []
    for ell in range(0, d):
        if ell > k - 1:
            continue
        for f in interior_subsimplices(d, ell):
            nn.extend(_nn_entity_dofs(split, f.labels, k, degree))
    groups.append(("interior_nn", nn))
    tn = []
    for rec in split.interior_faces:
        tn.extend(_tn_face_dofs(split, rec, k, degree))
    groups.append(("interior_tn", tn))
    groups.append(("bubbles", _bubble_moment_dofs(split, k, degree)))
    return groups


def _build_high_phi_split(split, k, face_data):
    degree = k
    shapes = _shapes_high_phi_split(split, k, degree)
    groups = _high_phi_split_dof_groups(split, k, degree, face_data)
    return _finalize("high-phi-split", split, k, degree, shapes, groups, face_data)


def _build_high_phi_nn(split, k, face_data):
    if k < 2:
        raise DomainError("the nn-enriched family needs k >= 2")
    d = split.dim
    degree = max(k, d + 1)
    shapes, _ = _shapes_high_phi_nn(split, k, degree)
    groups = _high_phi_split_dof_groups(split, k, degree, face_data)
    # the enrichment beyond the composite space is controlled by moments
    # against the selected enrichment members themselves (cell-local)
    n_base = element_dimension("high-phi-split", d, k)
    extras = shapes[n_base:]
    groups.append(("interior_nnface", _field_moment_dofs(split, extras, degree)))
    return _finalize("high-phi-nn", split, k, degree, shapes, groups, face_data)


def _build_high_reduced(split, k, face_data):
    if k < 2:
        raise DomainError("the reduced family needs k >= 2")
    degree = k
    shapes = _stack(_shapes_coarse_polynomials(split, k)
                    + [s for _, s in _phi_members(split, k)], split, degree)
    groups = [("face", (fd.opposite, _face_moment_dofs(split, fd, k, degree)))
              for fd in face_data]
    groups.append(("interior", _interior_moment_dofs(split, k - 2, degree)))
    return _finalize("high-reduced", split, k, degree, shapes, groups, face_data)


def _build_high_psi(split, k, face_data):
    if k < 2:
        raise DomainError("the range-corrected family needs k >= 2")
    d = split.dim
    degree = max(k, d + 1)
    extender = PsiExtender(split, k, face_data)
    members = [extender.extend(phi)[0] for _, phi in _phi_members(split, k)]
    shapes = _stack([s.elevate(degree) for s in
                     (_shapes_coarse_polynomials(split, k))] + members,
                    split, degree)
    groups = [("face", (fd.opposite, _face_moment_dofs(split, fd, k, degree)))
              for fd in face_data]
    groups.append(("interior", _interior_moment_dofs(split, k - 2, degree)))
    elem = _finalize("high-psi", split, k, degree, shapes, groups, face_data)
    elem.meta["extender"] = extender
    return elem


def _build_rt_plus(split, k, face_data):
    d = split.dim
    degree = k + 1
    base = split.base
    shapes = []
    for c in div_bubble_space(base, k + 1):
        p = Poly(base, k + 1, "sym", c)
        shapes.append(SplitPoly.from_coarse(p, split))
    shapes += _shapes_boundary_normal(split, k)
    shapes += [s for _, s in _phi_members(split, k)]
    stacked = _stack(shapes, split, degree)
    groups = [("face", (fd.opposite, _face_moment_dofs(split, fd, k, degree)))
              for fd in face_data]
    groups.append(("interior", _interior_moment_dofs(split, k - 1, degree)))
    return _finalize("rt-plus", split, k, degree, stacked, groups, face_data)


_BUILDERS = {
    "linear-phi-split": lambda split, k, fd: _build_linear_phi_split(split, fd),
    "linear-reduced": lambda split, k, fd: _build_linear_reduced(split, fd),
    "linear-rm": lambda split, k, fd: _build_linear_rm(split, fd),
    "high-phi-split": _build_high_phi_split,
    "high-phi-nn": _build_high_phi_nn,
    "high-reduced": _build_high_reduced,
    "high-psi": _build_high_psi,
    "rt-plus": _build_rt_plus,
}


def build_element(family, split_or_cell, k=1, face_data=None):
    """Build and certify a local stress element.

    The linear families fix k = 1; high-order reduced and range-corrected
    families need k >= 2.
    """
    if family not in _BUILDERS:
        raise DomainError(f"unknown family {family!r}; choose from {FAMILIES}")
    split = split_or_cell
    if not isinstance(split, SplitSimplex):
        split = SplitSimplex(split_or_cell)
    if family.startswith("linear") and k != 1:
        raise DomainError("linear families are fixed at k = 1")
    if k < 1:
        raise DomainError("k must be >= 1")
    face_data = face_data or default_face_data(split)
    return _BUILDERS[family](split, k, face_data)


_ELEMENT_CACHE = {}


def build_element_cached(family, split, k=1, face_data=None):
    """Congruence-aware element construction for meshes.

    The whole construction is translation invariant, so cells that agree up
    to translation (same shifted vertices, face orders and fixed normals)
    share one build; the cached coefficient data is rebased onto the actual
    cell geometry.  Uniform box meshes hit only a handful of classes.
    """
    import dataclasses
    face_data = face_data or default_face_data(split)
    verts = split.base.vertices
    key = (family, k,
           np.round(verts - verts[0], 12).tobytes(),
           tuple(fd.opposite for fd in face_data),
           tuple(tuple(fd.order) for fd in face_data),
           np.round(np.array([fd.normal for fd in face_data]), 12).tobytes())
    got = _ELEMENT_CACHE.get(key)
    if got is None:
        got = build_element(family, split, k, face_data)
        _ELEMENT_CACHE[key] = got
    return dataclasses.replace(got, split=split, face_data=face_data)


def element_dimension(family, d, k=1):
    """Closed-form local dimension of each family."""
    from math import comb
    ns = d * (d + 1) // 2
    if family == "linear-phi-split":
        return ns * (2 * d + 1)
    if family == "linear-reduced":
        return d * d * (d + 1)
    if family == "linear-rm":
        return d * (d + 1) ** 2 // 2
    if family == "high-phi-split":
        return (d + 1) * comb(k + d - 1, k) * ((d + 1) * k + d) // 2
    if family == "high-phi-nn":
        return element_dimension("high-phi-split", d, k) + d * d * (d + 1) // 2
    if family in ("high-reduced", "high-psi"):
        return ns * (comb(k + d, d) + comb(k + d - 2, d - 2))
    if family == "rt-plus":
        return d * (d + 1) * comb(k + d - 1, d - 1) + ns * comb(k + d - 1, d)
    raise DomainError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# certificates


@dataclass
class UnisolvenceReport:
    family: str
    d: int
    k: int
    dim: int
    cond: float
    min_singular_value: float

    @property
    def invertible(self):
        return self.min_singular_value > 0 and self.cond < COND_LIMIT


def unisolvence_certificate(elem):
    s = np.linalg.svd(elem.vandermonde, compute_uv=False)
    return UnisolvenceReport(family=elem.family, d=elem.d, k=elem.k,
                             dim=elem.dim, cond=float(s[0] / s[-1]),
                             min_singular_value=float(s[-1]))


def shape_rank(elem):
    """Rank of the stacked shape coefficients (direct-sum certificate)."""
    flat = elem.shapes.reshape(elem.shapes.shape[0], -1)
    return numeric_rank(flat)


def interior_jump_max(split, shapes, degree, quad_degree=None):
    """Largest normal-trace jump across the interior faces of the split.

    Returns a value relative to the largest trace magnitude encountered.
    """
    d = split.dim
    qd = quad_degree if quad_degree is not None else degree + 2
    worst = 0.0
    scale = 1e-30
    for rec in split.interior_faces:
        i, j = rec.pair
        pts, w, _ = entity_quadrature(rec.facet, qd)
        li = split.subcells[i].barycentric(pts)
        lj = split.subcells[j].barycentric(pts)
        bi = bernstein_matrix(d, degree, li)
        bj = bernstein_matrix(d, degree, lj)
        vi = np.einsum("pn,snc->spc", bi, shapes[:, i])
        vj = np.einsum("pn,snc->spc", bj, shapes[:, j])
        nmat = sym_vec_matrix(rec.normal, d)
        ji = np.einsum("spc,ic->spi", vi - vj, nmat)
        mags = np.einsum("spc,ic->spi", vi, nmat)
        worst = max(worst, np.abs(ji).max())
        scale = max(scale, np.abs(mags).max(), np.abs(vi).max())
    return worst / scale


def boundary_trace_moment_matrix(split, shapes, degree, k, face_data=None):
    """Rows of all coarse-face moments against P_k(F; R^d), for H0 extraction."""
    face_data = face_data or default_face_data(split)
    dofs = []
    for fd in face_data:
        dofs.extend(_face_moment_dofs(split, fd, k, degree))
    return apply_dofs(dofs, shapes, split.dim, degree)
