"""Bernstein-basis polynomial calculus on simplices and barycentric splits.

Scalar, vector and symmetric-tensor valued polynomials are stored as
coefficient arrays over the Bernstein basis B_a = (k!/a!) lambda^a.  All
operations (products, derivatives, traces, extensions, restriction to the
split cells) are exact in coefficient arithmetic up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np

from .errors import DomainError
from .geometry import Simplex, SplitSimplex
from .simplex import center_label

# ---------------------------------------------------------------------------
# multi-indices


def _gen_multiindices(nvars, k):
    if nvars == 1:
        yield (k,)
        return
    for a0 in range(k, -1, -1):
        for rest in _gen_multiindices(nvars - 1, k - a0):
            yield (a0,) + rest


@lru_cache(maxsize=None)
def multi_index_table(d, k):
    """All multi-indices of length d+1 summing to k, in a fixed order."""
    return np.array(list(_gen_multiindices(d + 1, k)), dtype=int)


@lru_cache(maxsize=None)
def _index_of(d, k):
    return {tuple(a): i for i, a in enumerate(multi_index_table(d, k))}


def n_coeffs(d, k):
    return comb(k + d, d)


@lru_cache(maxsize=None)
def _multinomials(d, k):
    tab = multi_index_table(d, k)
    out = np.empty(len(tab))
    for i, a in enumerate(tab):
        m = factorial(k)
        for ai in a:
            m //= factorial(ai)
        out[i] = m
    return out


def bernstein_matrix(d, k, lams):
    """Values of all Bernstein basis functions at barycentric points.

    lams has shape (npts, d+1); the result is (npts, n_coeffs(d, k)).
    """
    lams = np.atleast_2d(np.asarray(lams, dtype=float))
    tab = multi_index_table(d, k)
    vals = np.prod(lams[:, None, :] ** tab[None, :, :], axis=2)
    return vals * _multinomials(d, k)[None, :]


# ---------------------------------------------------------------------------
# coefficient operations


@lru_cache(maxsize=None)
def _derivative_shift(d, k):
    """For each i, indices mapping beta (degree k-1) to beta + e_i (degree k)."""
    low = multi_index_table(d, k - 1)
    idx = _index_of(d, k)
    shift = np.empty((d + 1, len(low)), dtype=int)
    for i in range(d + 1):
        for r, b in enumerate(low):
            bb = list(b)
            bb[i] += 1
            shift[i, r] = idx[tuple(bb)]
    return shift


def directional_derivative(coeffs, d, k, grad_lambda, direction):
    """Coefficients of the partial derivative along a Cartesian direction."""
    shift = _derivative_shift(d, k)
    out = 0.0
    for i in range(d + 1):
        out = out + grad_lambda[i, direction] * coeffs[shift[i]]
    return k * out


def gradient_coeffs(coeffs, d, k, grad_lambda):
    """All partial derivatives, stacked along a new last axis of size d."""
    shift = _derivative_shift(d, k)
    # gathered[i] = coeffs[beta + e_i]
    gathered = np.stack([coeffs[shift[i]] for i in range(d + 1)], axis=0)
    return k * np.tensordot(gathered, grad_lambda, axes=(0, 0))


@lru_cache(maxsize=None)
def _product_table(d, ka, kb):
    ta, tb = multi_index_table(d, ka), multi_index_table(d, kb)
    idx = _index_of(d, ka + kb)
    denom = comb(ka + kb, ka)
    ia, ib, io, w = [], [], [], []
    for a_i, a in enumerate(ta):
        for b_i, b in enumerate(tb):
            g = a + b
            weight = 1
            for ai, gi in zip(a, g):
                weight *= comb(int(gi), int(ai))
            ia.append(a_i)
            ib.append(b_i)
            io.append(idx[tuple(g)])
            w.append(weight / denom)
    return (np.array(ia), np.array(ib), np.array(io), np.array(w))


def multiply_coeffs(a, b, d, ka, kb):
    """Bernstein product of a (trailing axes allowed) with a scalar b."""
    ia, ib, io, w = _product_table(d, ka, kb)
    bv = np.asarray(b)[ib].reshape((-1,) + (1,) * (a.ndim - 1))
    prod = a[ia] * bv
    prod = prod * w.reshape((-1,) + (1,) * (prod.ndim - 1))
    out_shape = (n_coeffs(d, ka + kb),) + prod.shape[1:]
    out = np.zeros(out_shape)
    np.add.at(out, io, prod)
    return out


@lru_cache(maxsize=None)
def elevation_matrix(d, k, inc=1):
    """Degree elevation k -> k+inc as a dense matrix."""
    if inc < 1:
        raise DomainError("elevation increment must be >= 1")
    hi = multi_index_table(d, k + 1)
    idx = _index_of(d, k)
    mat = np.zeros((len(hi), n_coeffs(d, k)))
    for r, g in enumerate(hi):
        for i in range(d + 1):
            if g[i] > 0:
                gg = list(g)
                gg[i] -= 1
                mat[r, idx[tuple(gg)]] += g[i] / (k + 1)
    if inc == 1:
        return mat
    return elevation_matrix(d, k + 1, inc - 1) @ mat


def elevate_coeffs(coeffs, d, k, target):
    if target == k:
        return coeffs
    if target < k:
        raise DomainError("cannot lower the Bernstein degree")
    mat = elevation_matrix(d, k, target - k)
    return np.tensordot(mat, coeffs, axes=(1, 0))


@lru_cache(maxsize=None)
def trace_indices(d, k, positions):
    """Cell-table indices of the coefficients supported on a face.

    positions are the local vertex positions spanning the face; the returned
    array is ordered like the face's own multi-index table, so gathering
    yields the trace and scattering yields the barycentric extension.
    """
    m = len(positions) - 1
    face_tab = multi_index_table(m, k)
    idx = _index_of(d, k)
    out = np.empty(len(face_tab), dtype=int)
    for r, b in enumerate(face_tab):
        a = [0] * (d + 1)
        for p, bi in zip(positions, b):
            a[p] = int(bi)
        out[r] = idx[tuple(a)]
    return out


def trace_coeffs(coeffs, d, k, positions):
    return coeffs[trace_indices(d, k, tuple(positions))]


def extend_coeffs(face_coeffs, d, k, positions):
    """Extend a face polynomial to the cell via barycentric substitution.

    A constant on the face extends to the matching power of the sum of the
    face's barycentric coordinates, so the extension is degree-homogeneous;
    tracing back onto the face reproduces the input exactly.
    """
    out_shape = (n_coeffs(d, k),) + face_coeffs.shape[1:]
    out = np.zeros(out_shape)
    out[trace_indices(d, k, tuple(positions))] = face_coeffs
    return out


@lru_cache(maxsize=None)
def split_conversion(d, k, i):
    """Matrix taking coarse-cell Bernstein coefficients to split-cell i ones.

    Combinatorial: the coarse barycentric coordinates restricted to split
    cell i are fixed affine combinations of the subcell's coordinates.
    """
    c = center_label(d)
    labs = tuple(m for m in range(d + 1) if m != i) + (c,)
    # coarse lambda_m over subcell coordinates, as degree-1 Bernstein rows
    lin = np.zeros((d + 1, d + 1))
    for m in range(d + 1):
        for p, g in enumerate(labs):
            if g == m:
                lin[m, p] = 1.0
        lin[m, d] += 1.0 / (d + 1)  # center contributes 1/(d+1) to every coarse coordinate
    # degree-1 table order must match rows of `lin`
    one_tab = multi_index_table(d, 1)
    lin_b = np.zeros_like(lin)
    for r, a in enumerate(one_tab):
        p = int(np.argmax(a))
        lin_b[:, r] = lin[:, p]
    tab = multi_index_table(d, k)
    mats = np.zeros((n_coeffs(d, k), len(tab)))
    mult = _multinomials(d, k)
    for col, a in enumerate(tab):
        acc = np.ones(1)
        deg = 0
        for m in range(d + 1):
            for _ in range(int(a[m])):
                acc = multiply_coeffs(acc, lin_b[m], d, deg, 1)
                deg += 1
        if deg == 0:
            acc = np.ones(n_coeffs(d, 0))
        mats[:, col] = mult[col] * acc
    return mats


# ---------------------------------------------------------------------------
# symmetric-tensor component conventions


@lru_cache(maxsize=None)
def sym_pairs(d):
    return tuple((i, j) for i in range(d) for j in range(i, d))


def n_sym(d):
    return d * (d + 1) // 2


@lru_cache(maxsize=None)
def sym_pair_index(d):
    lut = {}
    for c, (i, j) in enumerate(sym_pairs(d)):
        lut[(i, j)] = c
        lut[(j, i)] = c
    return lut


@lru_cache(maxsize=None)
def sym_weights(d):
    """Frobenius weights: 1 on diagonal components, 2 off-diagonal."""
    return np.array([1.0 if i == j else 2.0 for i, j in sym_pairs(d)])


def sym_outer(a, b):
    """Components of sym(a (x) b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = len(a)
    return np.array([(a[i] * b[j] + a[j] * b[i]) / 2.0 for i, j in sym_pairs(d)])


def sym_eye(d):
    return np.array([1.0 if i == j else 0.0 for i, j in sym_pairs(d)])


def sym_vec_matrix(v, d):
    """Matrix M with (tau v)_i = sum_c M[i, c] tau_c."""
    lut = sym_pair_index(d)
    mat = np.zeros((d, n_sym(d)))
    for i in range(d):
        for j in range(d):
            mat[i, lut[(i, j)]] += v[j]
    return mat


def sym_bilinear_row(a, b, d):
    """Row r with a^T tau b = sum_c r[c] tau_c."""
    lut = sym_pair_index(d)
    row = np.zeros(n_sym(d))
    for i in range(d):
        for j in range(d):
            row[lut[(i, j)]] += a[i] * b[j]
    return row


def sym_to_matrix(comps, d):
    mat = np.zeros(comps.shape[:-1] + (d, d))
    for c, (i, j) in enumerate(sym_pairs(d)):
        mat[..., i, j] = comps[..., c]
        mat[..., j, i] = comps[..., c]
    return mat


def sym_trace(comps, d):
    diag = [c for c, (i, j) in enumerate(sym_pairs(d)) if i == j]
    return comps[..., diag].sum(axis=-1)


def compliance_matrix(d, mu, lam):
    """Compliance acting on symmetric components: A s = s/(2 mu) - c tr(s) I."""
    c = lam / (2.0 * mu * (2.0 * mu + d * lam))
    eye = sym_eye(d)
    isdiag = np.array([1.0 if i == j else 0.0 for i, j in sym_pairs(d)])
    return np.eye(n_sym(d)) / (2.0 * mu) - c * np.outer(eye, isdiag)


def compliance_matrix_devtr(d, mu, lam):
    """Equivalent deviatoric/trace form of the compliance, for cross-checking."""
    eye = sym_eye(d)
    isdiag = np.array([1.0 if i == j else 0.0 for i, j in sym_pairs(d)])
    dev = np.eye(n_sym(d)) - np.outer(eye, isdiag) / d
    return dev / (2.0 * mu) + np.outer(eye, isdiag) / (d * (2.0 * mu + d * lam))


# ---------------------------------------------------------------------------
# quadrature (Grundmann-Moller simplex rules, exact rational weights)


@dataclass(frozen=True)
class QuadRule:
    dim: int
    degree: int                 # total degree integrated exactly
    points: np.ndarray          # (npts, dim+1) barycentric
    weights: np.ndarray         # sums to the reference simplex volume 1/dim!


@lru_cache(maxsize=None)
def quad_rule(d, degree):
    """Simplex rule exact for polynomials of the given total degree."""
    if d < 0:
        raise DomainError("dimension must be nonnegative")
    if degree < 0:
        raise DomainError("degree must be nonnegative")
    if d == 0:
        return QuadRule(0, degree, np.ones((1, 1)), np.ones(1))
    s = max(0, (degree - 1 + 1) // 2)  # exact to 2s+1 >= degree
    tdeg = 2 * s + 1
    pts_w = {}
    for i in range(s + 1):
        denom = tdeg + d - 2 * i
        wi = (Fraction(-1) ** i * Fraction(2) ** (-2 * s)
              * Fraction(denom) ** tdeg
              / (factorial(i) * factorial(tdeg + d - i)))
        for beta in _gen_multiindices(d + 1, s - i):
            node = tuple(Fraction(2 * b + 1, denom) for b in beta)
            pts_w[node] = pts_w.get(node, Fraction(0)) + wi
    nodes = np.array([[float(x) for x in node] for node in pts_w], dtype=float)
    weights = np.array([float(w) for w in pts_w.values()])
    return QuadRule(d, tdeg, nodes, weights)


def entity_quadrature(simplex, degree):
    """Physical points, weights (summing to the measure) and barycentric nodes."""
    rule = quad_rule(simplex.dim, degree)
    pts = simplex.point(rule.points)
    scale = simplex.measure * factorial(simplex.dim) if simplex.dim > 0 else 1.0
    return pts, rule.weights * scale, rule.points


def integrate_bernstein(coeffs, d, k, measure):
    """Exact integral of a Bernstein polynomial: every basis function shares it."""
    return measure / n_coeffs(d, k) * coeffs.sum(axis=0)


@lru_cache(maxsize=None)
def _gram_unit(d, k):
    tab = multi_index_table(d, k)
    n = len(tab)
    gram = np.empty((n, n))
    denom = comb(2 * k, k) * comb(2 * k + d, d)
    for a_i in range(n):
        for b_i in range(a_i, n):
            w = 1
            for ai, bi in zip(tab[a_i], tab[b_i]):
                w *= comb(int(ai + bi), int(ai))
            gram[a_i, b_i] = gram[b_i, a_i] = w / denom
    return gram


def bernstein_gram(d, k, measure):
    """Mass matrix of the Bernstein basis (closed form)."""
    return _gram_unit(d, k) * measure


# ---------------------------------------------------------------------------
# polynomial containers

_VALUE_NCOMP = {"scalar": lambda d: 1, "vector": lambda d: d, "sym": n_sym}


@dataclass
class Poly:
    """Polynomial on a single simplex, Bernstein coefficients (ncoef, ncomp)."""

    simplex: Simplex
    degree: int
    value: str
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        expect = (n_coeffs(self.simplex.dim, self.degree), self.ncomp)
        if self.coeffs.shape != expect:
            raise DomainError(f"coefficient shape {self.coeffs.shape}, expected {expect}")

    @property
    def ncomp(self):
        return _VALUE_NCOMP[self.value](self.simplex.ambient_dim)

    def eval(self, lams):
        return bernstein_matrix(self.simplex.dim, self.degree, lams) @ self.coeffs

    def eval_points(self, pts):
        return self.eval(self.simplex.barycentric(pts))

    def multiply(self, other):
        if other.value != "scalar":
            raise DomainError("can only multiply by a scalar polynomial")
        d = self.simplex.dim
        c = multiply_coeffs(self.coeffs, other.coeffs[:, 0], d, self.degree, other.degree)
        return Poly(self.simplex, self.degree + other.degree, self.value, c)

    def elevate(self, target):
        d = self.simplex.dim
        return Poly(self.simplex, target, self.value,
                    elevate_coeffs(self.coeffs, d, self.degree, target))

    def grad(self):
        if self.value != "scalar":
            raise DomainError("grad is defined for scalar polynomials")
        d = self.simplex.dim
        g = gradient_coeffs(self.coeffs[:, 0], d, self.degree, self.simplex.grad_lambda)
        return Poly(self.simplex, self.degree - 1, "vector", g)

    def strain(self):
        """Symmetric gradient of a vector polynomial."""
        if self.value != "vector":
            raise DomainError("strain is defined for vector polynomials")
        d = self.simplex.dim
        grads = gradient_coeffs(self.coeffs, d, self.degree, self.simplex.grad_lambda)
        comps = np.stack([(grads[:, i, j] + grads[:, j, i]) / 2.0 for i, j in sym_pairs(d)],
                         axis=-1)
        return Poly(self.simplex, self.degree - 1, "sym", comps)

    def div(self):
        """Row-wise divergence of a symmetric tensor, or divergence of a vector."""
        d = self.simplex.dim
        if self.value == "vector":
            grads = gradient_coeffs(self.coeffs, d, self.degree, self.simplex.grad_lambda)
            out = np.stack([grads[:, i, i] for i in range(d)], axis=-1).sum(axis=-1)
            return Poly(self.simplex, self.degree - 1, "scalar", out[:, None])
        if self.value != "sym":
            raise DomainError("div is defined for vector or symmetric-tensor polynomials")
        lut = sym_pair_index(d)
        grads = gradient_coeffs(self.coeffs, d, self.degree, self.simplex.grad_lambda)
        out = np.zeros((n_coeffs(d, self.degree - 1), d))
        for i in range(d):
            for j in range(d):
                out[:, i] += grads[:, lut[(i, j)], j]
        return Poly(self.simplex, self.degree - 1, "vector", out)

    def trace(self, positions, facet=None):
        """Restriction to the face spanned by the given local vertex positions."""
        facet = facet if facet is not None else self.simplex.subsimplex(positions)
        c = trace_coeffs(self.coeffs, self.simplex.dim, self.degree, tuple(positions))
        return Poly(facet, self.degree, self.value, c)

    def integrate(self):
        return integrate_bernstein(self.coeffs, self.simplex.dim, self.degree,
                                   self.simplex.measure)


def constant_poly(simplex, value, comps):
    comps = np.atleast_1d(np.asarray(comps, dtype=float))
    return Poly(simplex, 0, value, comps[None, :])


def bubble(f, cell):
    """Product of the barycentric coordinates of the labels in f."""
    d = cell.dim
    coeffs = np.ones(1)
    deg = 0
    one_tab = multi_index_table(d, 1)
    for m in f:
        lin = np.zeros(d + 1)
        for r, a in enumerate(one_tab):
            if a[m] == 1:
                lin[r] = 1.0
        coeffs = multiply_coeffs(coeffs, lin, d, deg, 1)
        deg += 1
    return Poly(cell, deg, "scalar", coeffs[:, None])


def extend_face_poly(face_poly, cell, positions):
    """Extend a polynomial on a face of `cell` by barycentric substitution."""
    d = cell.dim
    c = extend_coeffs(face_poly.coeffs, d, face_poly.degree, tuple(positions))
    return Poly(cell, face_poly.degree, face_poly.value, c)


@dataclass
class SplitPoly:
    """Piecewise polynomial on a barycentric split, one Bernstein block per subcell."""

    split: SplitSimplex
    degree: int
    value: str
    coeffs: np.ndarray  # (d+1, ncoef, ncomp)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        d = self.split.dim
        expect = (d + 1, n_coeffs(d, self.degree), self.ncomp)
        if self.coeffs.shape != expect:
            raise DomainError(f"coefficient shape {self.coeffs.shape}, expected {expect}")

    @property
    def ncomp(self):
        return _VALUE_NCOMP[self.value](self.split.dim)

    @classmethod
    def zero(cls, split, degree, value):
        d = split.dim
        ncomp = _VALUE_NCOMP[value](d)
        return cls(split, degree, value, np.zeros((d + 1, n_coeffs(d, degree), ncomp)))

    @classmethod
    def from_coarse(cls, poly, split):
        d = split.dim
        blocks = [split_conversion(d, poly.degree, i) @ poly.coeffs for i in range(d + 1)]
        return cls(split, poly.degree, poly.value, np.stack(blocks))

    def piece(self, i):
        return Poly(self.split.subcells[i], self.degree, self.value, self.coeffs[i])

    def eval_subcell(self, i, lams):
        return bernstein_matrix(self.split.dim, self.degree, lams) @ self.coeffs[i]

    def eval_points(self, pts, tol=1e-12):
        """Evaluate at physical points, locating the containing subcell."""
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), self.ncomp))
        remaining = np.ones(len(pts), dtype=bool)
        for i, sub in enumerate(self.split.subcells):
            if not remaining.any():
                break
            lam = sub.barycentric(pts[remaining])
            inside = lam.min(axis=1) >= -tol
            if inside.any():
                sel = np.where(remaining)[0][inside]
                out[sel] = self.eval_subcell(i, lam[inside])
                remaining[sel] = False
        if remaining.any():
            raise DomainError("points outside the split cell")
        return out

    def multiply(self, other):
        if other.value != "scalar":
            raise DomainError("can only multiply by a scalar field")
        d = self.split.dim
        blocks = [multiply_coeffs(self.coeffs[i], other.coeffs[i][:, 0], d,
                                  self.degree, other.degree)
                  for i in range(d + 1)]
        return SplitPoly(self.split, self.degree + other.degree, self.value,
                         np.stack(blocks))

    def elevate(self, target):
        d = self.split.dim
        blocks = [elevate_coeffs(self.coeffs[i], d, self.degree, target)
                  for i in range(d + 1)]
        return SplitPoly(self.split, target, self.value, np.stack(blocks))

    def div(self):
        pieces = [self.piece(i).div() for i in range(self.split.dim + 1)]
        return SplitPoly(self.split, self.degree - 1, "vector",
                         np.stack([p.coeffs for p in pieces]))

    def integrate(self):
        total = 0.0
        for i, sub in enumerate(self.split.subcells):
            total = total + integrate_bernstein(self.coeffs[i], self.split.dim,
                                                self.degree, sub.measure)
        return total

    def __add__(self, other):
        if self.degree != other.degree or self.value != other.value:
            raise DomainError("mismatched fields")
        return SplitPoly(self.split, self.degree, self.value, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self.degree != other.degree or self.value != other.value:
            raise DomainError("mismatched fields")
        return SplitPoly(self.split, self.degree, self.value, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SplitPoly(self.split, self.degree, self.value, self.coeffs * scalar)

    __rmul__ = __mul__


def split_hat(label, split):
    """Continuous piecewise-linear hat on the split, nodal at the given label."""
    d = split.dim
    out = SplitPoly.zero(split, 1, "scalar")
    one_tab = multi_index_table(d, 1)
    pos_of = {tuple(a): int(np.argmax(a)) for a in one_tab}
    for i in range(d + 1):
        p = split.local_position(i, label)
        if p is None:
            continue
        for r, a in enumerate(one_tab):
            if a[p] == 1:
                out.coeffs[i, r, 0] = 1.0
    return out


def split_bubble(f, split):
    """Product of split hats over the labels of f; supported on the star of f."""
    labels = list(f)
    out = split_hat(labels[0], split)
    for m in labels[1:]:
        out = out.multiply(split_hat(m, split))
    return out


def extend_face_to_split(face_poly, split, labels):
    """Extend a polynomial on the entity with the given labels to the split.

    On every subcell containing the entity the extension substitutes the
    subcell's barycentric coordinates; elsewhere it is set to zero (callers
    multiply by a bubble supported on the star of the entity).
    """
    d = split.dim
    out = SplitPoly.zero(split, face_poly.degree, face_poly.value)
    for i in split.subcells_containing(labels):
        positions = tuple(split.local_position(i, m) for m in labels)
        out.coeffs[i] = extend_coeffs(face_poly.coeffs, d, face_poly.degree, positions)
    return out


# ---------------------------------------------------------------------------
# projections


def project_poly(simplex, degree, value, func, quad_degree=None):
    """L2 projection of a callable (physical points -> components)."""
    d = simplex.dim
    qd = quad_degree if quad_degree is not None else 2 * degree + 2
    pts, w, lams = entity_quadrature(simplex, qd)
    b = bernstein_matrix(d, degree, lams)
    vals = np.atleast_2d(np.asarray(func(pts), dtype=float))
    gram = bernstein_gram(d, degree, simplex.measure)
    rhs = b.T @ (w[:, None] * vals)
    return Poly(simplex, degree, value, np.linalg.solve(gram, rhs))


class RigidMotions:
    """Basis of the rigid motions of a cell: translations plus rotations."""

    def __init__(self, cell):
        self.cell = cell
        self.d = cell.ambient_dim
        self.centroid = cell.barycenter()
        self.pairs = [(i, j) for i in range(self.d) for j in range(i + 1, self.d)]

    @property
    def dim(self):
        return self.d + len(self.pairs)

    def eval(self, pts):
        pts = np.atleast_2d(pts)
        n = len(pts)
        out = np.zeros((n, self.d, self.dim))
        for i in range(self.d):
            out[:, i, i] = 1.0
        x = pts - self.centroid
        for c, (i, j) in enumerate(self.pairs):
            out[:, i, self.d + c] = -x[:, j]
            out[:, j, self.d + c] = x[:, i]
        return out


def project_rigid_motion(cell, func, quad_degree=6):
    """Coefficients of the L2 projection onto the rigid motions of `cell`."""
    rm = RigidMotions(cell)
    pts, w, _ = entity_quadrature(cell, quad_degree)
    basis = rm.eval(pts)  # (npts, d, nrm)
    gram = np.einsum("p,pia,pib->ab", w, basis, basis)
    vals = np.atleast_2d(np.asarray(func(pts), dtype=float))
    rhs = np.einsum("p,pia,pi->a", w, basis, vals)
    return rm, np.linalg.solve(gram, rhs)


def l2_project(cell, target, func, quad_degree=None):
    """Project onto P_m(cell) (target=('P', m, value)) or RM(cell) (target='RM')."""
    if target == "RM":
        rm, coeffs = project_rigid_motion(cell, func,
                                          quad_degree if quad_degree else 6)
        return rm, coeffs
    kind, m, value = target
    if kind != "P":
        raise DomainError(f"unknown projection target {target}")
    return project_poly(cell, m, value, func, quad_degree)
