"""Scaled monomials, polynomial decompositions and quadrature on mesh entities.

Polynomials are stored as coefficient arrays over the scaled monomial basis of the
entity, ``m_a(x) = ((x - b) / h) ** alpha_a`` in the entity's local coordinates.
Vector polynomials are arrays of shape ``(ncomp, nmono)``. Derivatives in this
module act on the scaled coordinates; divide by ``h`` for physical derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import roots_jacobi


# ---------------------------------------------------------------- monomials
@lru_cache(maxsize=None)
def monomial_exponents(dim, d):
    """Multi-indices of total degree <= d, graded then lexicographic (x before y)."""
    out = []
    for deg in range(d + 1):
        if dim == 1:
            out.append((deg,))
        elif dim == 2:
            for i in range(deg, -1, -1):
                out.append((i, deg - i))
        elif dim == 3:
            for i in range(deg, -1, -1):
                for j in range(deg - i, -1, -1):
                    out.append((i, j, deg - i - j))
        else:
            raise ValueError("dim must be 1, 2 or 3")
    return tuple(out)


def dim_poly(dim, d):
    return comb(d + dim, dim) if d >= 0 else 0


@lru_cache(maxsize=None)
def _index(dim, d):
    return {a: i for i, a in enumerate(monomial_exponents(dim, d))}


class MonomialBasis:
    """Scaled monomials of degree <= d on an entity.

    ``frame`` has one row per local axis (identity for cells, the face frame for
    faces, the tangent for edges).
    """

    def __init__(self, center, diameter, d, frame=None):
        self.center = np.asarray(center, dtype=float)
        self.diameter = float(diameter)
        self.frame = np.eye(3) if frame is None else np.atleast_2d(np.asarray(frame, dtype=float))
        self.dim = self.frame.shape[0]
        self.degree = d
        self.exponents = np.array(monomial_exponents(self.dim, d), dtype=np.int64)

    def __len__(self):
        return len(self.exponents)

    def local(self, x):
        """Scaled local coordinates of 3D points."""
        x = np.atleast_2d(x)
        return (x - self.center) @ self.frame.T / self.diameter

    def eval(self, x):
        xi = self.local(x)
        return np.prod(xi[:, None, :] ** self.exponents[None, :, :], axis=2)

    def grad(self, x):
        """Gradient in scaled local coordinates, shape (npts, nmono, dim)."""
        xi = self.local(x)
        out = np.zeros((len(xi), len(self.exponents), self.dim))
        for j in range(self.dim):
            e = self.exponents.copy()
            c = e[:, j].astype(float)
            e[:, j] = np.maximum(e[:, j] - 1, 0)
            out[:, :, j] = c * np.prod(xi[:, None, :] ** e[None, :, :], axis=2)
        return out

    def grad_physical(self, x):
        """Gradient in physical units along the local axes."""
        return self.grad(x) / self.diameter


def scaled_monomials(mesh, kind, index, d):
    """Basis on ``kind`` in {'cell', 'face', 'edge'} number ``index``."""
    if kind == "cell":
        return MonomialBasis(mesh.cell_centroids[index], mesh.cell_diameters[index], d)
    if kind == "face":
        return MonomialBasis(mesh.face_centroids[index], mesh.face_diameters[index], d,
                             mesh.face_frames[index])
    if kind == "edge":
        return MonomialBasis(mesh.edge_midpoints[index], mesh.edge_lengths[index], d,
                             mesh.edge_tangents[index])
    raise ValueError(f"unknown entity kind '{kind}'")


# ---------------------------------------------------- coefficient calculus
def mono_derivative(dim, d, j):
    """Matrix of d/dxi_j from P_d to P_{d-1} coefficients."""
    src = monomial_exponents(dim, d)
    dst = _index(dim, max(d - 1, 0))
    D = np.zeros((dim_poly(dim, max(d - 1, 0)), len(src)))
    for i, a in enumerate(src):
        if a[j] > 0:
            b = list(a)
            b[j] -= 1
            D[dst[tuple(b)], i] = a[j]
    return D


def mono_times_coord(dim, d, j):
    """Matrix of multiplication by xi_j from P_d to P_{d+1} coefficients."""
    src = monomial_exponents(dim, d)
    dst = _index(dim, d + 1)
    M = np.zeros((dim_poly(dim, d + 1), len(src)))
    for i, a in enumerate(src):
        b = list(a)
        b[j] += 1
        M[dst[tuple(b)], i] = 1.0
    return M


def embed(dim, d_from, d_to):
    """Inclusion P_{d_from} -> P_{d_to} in coefficients."""
    E = np.zeros((dim_poly(dim, d_to), dim_poly(dim, d_from)))
    E[np.arange(dim_poly(dim, d_from)), np.arange(dim_poly(dim, d_from))] = 1.0
    return E


def vec_curl(p, d):
    """Curl of a 3-vector polynomial with coefficients ``p`` (3, dim P_d)."""
    D = [mono_derivative(3, d, j) for j in range(3)]
    return np.array([D[1] @ p[2] - D[2] @ p[1],
                     D[2] @ p[0] - D[0] @ p[2],
                     D[0] @ p[1] - D[1] @ p[0]])


def vec_div(p, d):
    dim = p.shape[0]
    return sum(mono_derivative(dim, d, j) @ p[j] for j in range(dim))


def grad_basis(dim, k):
    """Gradients of the non-constant monomials of degree <= k+1, each (dim, dim P_k)."""
    n = dim_poly(dim, k + 1)
    D = [mono_derivative(dim, k + 1, j) for j in range(dim)]
    return [np.array([D[j][:, a] for j in range(dim)]) for a in range(1, n)]


def x_cross_basis(k):
    """x × (m e_j) for m in P_{k-1} scaled monomials, each (3, dim P_k)."""
    if k < 1:
        return []
    X = [mono_times_coord(3, k - 1, j) for j in range(3)]
    out = []
    for a in range(dim_poly(3, k - 1)):
        for j in range(3):
            c = np.zeros((3, dim_poly(3, k - 1)))
            c[j, a] = 1.0
            out.append(np.array([X[1] @ c[2] - X[2] @ c[1],
                                 X[2] @ c[0] - X[0] @ c[2],
                                 X[0] @ c[1] - X[1] @ c[0]]))
    return out


def curl_basis(k):
    """Curls of (m e_j), m in P_{k+1}; a spanning (not independent) set in P_k^3."""
    out = []
    for a in range(dim_poly(3, k + 1)):
        for j in range(3):
            c = np.zeros((3, dim_poly(3, k + 1)))
            c[j, a] = 1.0
            v = vec_curl(c, k + 1)[:, :dim_poly(3, k)]
            if np.any(v):
                out.append(v)
    return out


def x_times_basis(dim, k):
    """x m for m in P_{k-1}, each (dim, dim P_k)."""
    if k < 1:
        return []
    X = [mono_times_coord(dim, k - 1, j) for j in range(dim)]
    return [np.array([X[j][:, a] for j in range(dim)]) for a in range(dim_poly(dim, k - 1))]


def grad_perp_basis(k):
    """Face rotated gradients (d/deta m, -d/dxi m) of non-constant m in P_{k+1}."""
    return [np.array([g[1], -g[0]]) for g in grad_basis(2, k)]


def decomposition_bases(kind, k):
    """Spanning sets of the polynomial splittings on a cell or a face."""
    if kind == "cell":
        return {"grad": grad_basis(3, k), "x_cross": x_cross_basis(k),
                "curl": curl_basis(k), "x_times": x_times_basis(3, k)}
    if kind == "face":
        return {"grad_perp": grad_perp_basis(k), "x_times": x_times_basis(2, k)}
    raise ValueError(f"unknown entity kind '{kind}'")


# ---------------------------------------------------------------- quadrature
@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


def _jacobi01(n, alpha):
    """Gauss-Jacobi nodes on [0,1] for the weight (1-a)**alpha."""
    t, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (1.0 + t), w / 2.0 ** (alpha + 1)


def gauss_legendre01(n):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (1.0 + t), 0.5 * w


@lru_cache(maxsize=None)
def reference_segment(degree):
    return gauss_legendre01(max(1, (degree + 2) // 2))


@lru_cache(maxsize=None)
def reference_triangle(degree):
    """Collapsed rule on {x, y >= 0, x + y <= 1}, weights sum to 1/2."""
    n = max(1, (degree + 2) // 2)
    a, wa = _jacobi01(n, 1.0)
    b, wb = gauss_legendre01(n)
    A, B = np.meshgrid(a, b, indexing="ij")
    pts = np.column_stack([A.ravel(), (B * (1.0 - A)).ravel()])
    w = np.outer(wa, wb).ravel()
    return pts, w


@lru_cache(maxsize=None)
def reference_tetrahedron(degree):
    """Collapsed rule on the unit tetrahedron, weights sum to 1/6."""
    n = max(1, (degree + 2) // 2)
    a, wa = _jacobi01(n, 2.0)
    b, wb = _jacobi01(n, 1.0)
    c, wc = gauss_legendre01(n)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    pts = np.column_stack([A.ravel(), (B * (1.0 - A)).ravel(), (C * (1.0 - A) * (1.0 - B)).ravel()])
    w = (wa[:, None, None] * wb[None, :, None] * wc[None, None, :]).ravel()
    return pts, w


def segment_rule(p0, p1, degree):
    t, w = reference_segment(degree)
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    pts = p0 + t[:, None] * (p1 - p0)
    return QuadratureRule(pts, w * np.linalg.norm(p1 - p0), degree)


def polygon_rule(pts, normal, center, degree):
    """Fan of triangles (center, p_i, p_{i+1}); signed areas w.r.t. ``normal``."""
    ref, rw = reference_triangle(degree)
    p = np.asarray(pts, float)
    q = np.roll(p, -1, axis=0)
    u = p - center
    v = q - center
    area2 = np.cross(u, v) @ normal
    P = center + ref[:, 0][None, :, None] * u[:, None, :] + ref[:, 1][None, :, None] * v[:, None, :]
    W = area2[:, None] * rw[None, :]
    return QuadratureRule(P.reshape(-1, 3), W.ravel(), degree)


def polyhedron_rule(face_loops, face_normals, face_signs, face_centers, anchor, degree):
    """Tets (anchor, c_f, p_i, p_{i+1}) with signed volumes; exact for any closed surface."""
    ref, rw = reference_tetrahedron(degree)
    allp, allw = [], []
    for pts, n, s, c in zip(face_loops, face_normals, face_signs, face_centers):
        p = np.asarray(pts, float)
        q = np.roll(p, -1, axis=0)
        a = c - anchor
        u = p - c
        v = q - c
        vol6 = s * np.einsum("ij,j->i", np.cross(u, v), a)
        P = (anchor + ref[:, 0][None, :, None] * a[None, None, :]
             + ref[:, 1][None, :, None] * (u + a)[:, None, :]
             + ref[:, 2][None, :, None] * (v + a)[:, None, :])
        allp.append(P.reshape(-1, 3))
        allw.append((vol6[:, None] * rw[None, :]).ravel())
    return QuadratureRule(np.vstack(allp), np.concatenate(allw), degree)


def quadrature(mesh, kind, index, exactness):
    """Quadrature rule on a mesh entity, exact to polynomial degree ``exactness``."""
    if kind == "edge":
        a, b = mesh.edges[index]
        return segment_rule(mesh.vertices[a], mesh.vertices[b], exactness)
    if kind == "face":
        return polygon_rule(mesh.vertices[mesh.faces[index]], mesh.face_normals[index],
                            mesh.face_centroids[index], exactness)
    if kind == "cell":
        cf = mesh.cells[index]
        return polyhedron_rule([mesh.vertices[mesh.faces[f]] for f in cf],
                               mesh.face_normals[cf], mesh.cell_face_signs[index],
                               mesh.face_centroids[cf], mesh.cell_anchors[index], exactness)
    raise ValueError(f"unknown entity kind '{kind}'")
