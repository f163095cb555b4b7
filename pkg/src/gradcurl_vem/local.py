"""Per-cell degrees of freedom, projectors, stabilizations and local matrices (order 1).

Local DOF layouts on a cell with ``nv`` vertices, ``ne`` edges and ``nf`` faces:

* U: ``q(x_v)`` per vertex.
* V: ``(curl v)(x_v)`` (3 slots per vertex, slot ``3*v + c``), then
  ``(1/|e|) int_e v . t_e`` per edge (slot ``3*nv + e``).
* W: ``w(x_v)`` (slot ``3*v + c``), then ``int_f w . n_f`` per face (slot ``3*nv + f``).
* Q: ``int_K q``.

Cell polynomials in P_1(K)^3 use 12 coefficients ordered component-major,
``4*i + a`` for component ``i`` and scaled monomial ``a`` in (1, xi, eta, zeta).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .polyquad import (
    MonomialBasis,
    grad_basis,
    grad_perp_basis,
    polygon_rule,
    polyhedron_rule,
    segment_rule,
    x_cross_basis,
    x_times_basis,
)

ORDER = 1
PROJ_QUAD = 4
LOAD_QUAD = 10
DOF_POINTS = 10


def dof_exactness(points):
    """Exactness degree of a Gauss rule with ``points`` nodes per direction."""
    return 2 * int(points) - 1


class NumericalDegeneracyError(ArithmeticError):
    """A local projector system is singular or too ill-conditioned."""


def _solve(A, B, what):
    c = np.linalg.cond(A)
    if not np.isfinite(c) or c > 1e13:
        raise NumericalDegeneracyError(f"{what}: singular local system (cond {c:.2e})")
    return np.linalg.solve(A, B)


# ------------------------------------------------------------------ layouts
@dataclass(frozen=True)
class DofLayout:
    space: str
    slots: tuple  # (entity kind, local entity index, functional)

    def __len__(self):
        return len(self.slots)


def dof_layout(space, nv, ne, nf, order=ORDER):
    if order != 1:
        raise NotImplementedError("only order 1 is implemented")
    comps = ("x", "y", "z")
    if space == "U":
        slots = [("vertex", v, "value") for v in range(nv)]
    elif space == "V":
        slots = [("vertex", v, f"curl_{c}") for v in range(nv) for c in comps]
        slots += [("edge", e, "tangential_mean") for e in range(ne)]
    elif space == "W":
        slots = [("vertex", v, f"value_{c}") for v in range(nv) for c in comps]
        slots += [("face", f, "normal_flux") for f in range(nf)]
    elif space == "Q":
        slots = [("cell", 0, "integral")]
    else:
        raise ValueError(f"unknown space '{space}'")
    return DofLayout(space, tuple(slots))


# ------------------------------------------------------------- cell data
@dataclass
class FaceData:
    index: int
    sign: int
    loop: np.ndarray
    edges: np.ndarray
    edge_signs: np.ndarray
    normal: np.ndarray
    centroid: np.ndarray
    frame: np.ndarray
    area: float
    diameter: float


@dataclass
class LocalCell:
    index: int
    vertex_ids: np.ndarray
    X: np.ndarray
    edge_ids: np.ndarray
    edge_pairs: np.ndarray
    edge_lengths: np.ndarray
    edge_tangents: np.ndarray
    faces: list
    centroid: np.ndarray
    diameter: float
    volume: float
    anchor: np.ndarray

    @property
    def nv(self):
        return len(self.vertex_ids)

    @property
    def ne(self):
        return len(self.edge_ids)

    @property
    def nf(self):
        return len(self.faces)

    @property
    def n_v_dofs(self):
        return 3 * self.nv + self.ne

    @property
    def n_w_dofs(self):
        return 3 * self.nv + self.nf

    def basis(self, d=1):
        return MonomialBasis(self.centroid, self.diameter, d)

    def face_basis(self, j, d=1):
        fd = self.faces[j]
        return MonomialBasis(fd.centroid, fd.diameter, d, fd.frame)

    def face_rule(self, j, degree):
        fd = self.faces[j]
        return polygon_rule(self.X[fd.loop], fd.normal, fd.centroid, degree)

    def cell_rule(self, degree):
        return polyhedron_rule([self.X[fd.loop] for fd in self.faces],
                               [fd.normal for fd in self.faces],
                               [fd.sign for fd in self.faces],
                               [fd.centroid for fd in self.faces], self.anchor, degree)

    def edge_rule(self, e, degree):
        a, b = self.edge_pairs[e]
        return segment_rule(self.X[a], self.X[b], degree)

    def geometry_key(self):
        """Translation-invariant fingerprint used to reuse local matrices."""
        rel = np.round((self.X - self.centroid) / self.diameter, 11) + 0.0
        parts = [rel.tobytes(), np.round(self.diameter, 13).tobytes(), self.edge_pairs.tobytes()]
        for fd in self.faces:
            parts += [fd.loop.tobytes(), fd.edges.tobytes(), fd.edge_signs.tobytes(),
                      bytes([fd.sign + 1]), (np.round(fd.normal, 12) + 0.0).tobytes(),
                      (np.round(fd.frame, 12) + 0.0).tobytes()]
        return b"|".join(parts)


def local_cell(mesh, k):
    vids = mesh.cell_vertices[k]
    vpos = {int(v): i for i, v in enumerate(vids)}
    eids = np.asarray(mesh.cell_edges[k])
    pairs = np.array([[vpos[int(a)], vpos[int(b)]] for a, b in mesh.edges[eids]], dtype=np.int64)
    # order edges by local endpoints so congruent cells share one local numbering
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    eids, pairs = eids[order], pairs[order]
    epos = {int(e): i for i, e in enumerate(eids)}
    faces = []
    for f, s in zip(mesh.cells[k], mesh.cell_face_signs[k]):
        faces.append(FaceData(
            index=int(f), sign=int(s),
            loop=np.array([vpos[int(v)] for v in mesh.faces[f]], dtype=np.int64),
            edges=np.array([epos[int(e)] for e in mesh.face_edges[f]], dtype=np.int64),
            edge_signs=np.asarray(mesh.face_edge_signs[f], dtype=np.int64),
            normal=mesh.face_normals[f], centroid=mesh.face_centroids[f],
            frame=mesh.face_frames[f], area=float(mesh.face_areas[f]),
            diameter=float(mesh.face_diameters[f])))
    return LocalCell(
        index=k, vertex_ids=vids, X=mesh.vertices[vids], edge_ids=eids, edge_pairs=pairs,
        edge_lengths=mesh.edge_lengths[eids], edge_tangents=mesh.edge_tangents[eids],
        faces=faces, centroid=mesh.cell_centroids[k], diameter=float(mesh.cell_diameters[k]),
        volume=float(mesh.cell_volumes[k]), anchor=mesh.cell_anchors[k])


# ------------------------------------------------------------ DOF evaluation
def eval_dofs(space, cell, fields, points=DOF_POINTS):
    """Local DOF vector of analytic fields.

    ``fields`` maps names to callables on (npts, 3) arrays: ``v`` and ``curl``
    for V, ``w`` for W, ``q`` for U and Q. Integrals use ``points`` Gauss nodes
    per direction.
    """
    degree = dof_exactness(points)
    if space == "U":
        return np.asarray(fields["q"](cell.X), dtype=float)
    if space == "Q":
        r = cell.cell_rule(degree)
        return np.array([r.integrate(fields["q"](r.points))])
    if space == "V":
        out = np.empty(cell.n_v_dofs)
        out[:3 * cell.nv] = np.asarray(fields["curl"](cell.X)).ravel()
        for e in range(cell.ne):
            r = cell.edge_rule(e, degree)
            out[3 * cell.nv + e] = r.integrate(fields["v"](r.points) @ cell.edge_tangents[e]) / cell.edge_lengths[e]
        return out
    if space == "W":
        out = np.empty(cell.n_w_dofs)
        out[:3 * cell.nv] = np.asarray(fields["w"](cell.X)).ravel()
        for j, fd in enumerate(cell.faces):
            r = cell.face_rule(j, degree)
            out[3 * cell.nv + j] = r.integrate(fields["w"](r.points) @ fd.normal)
        return out
    raise ValueError(f"unknown space '{space}'")


def w_dofs_of_poly(cell, coef):
    """W dofs of p in P_1(K)^3 given its 12 coefficients (exact)."""
    return w_poly_dof_matrix(cell) @ coef


def w_poly_dof_matrix(cell):
    """Matrix (n_w_dofs, 12) mapping P_1^3 coefficients to W dofs."""
    mb = cell.basis(1)
    D = np.zeros((cell.n_w_dofs, 12))
    mv = mb.eval(cell.X)
    for i in range(3):
        D[i:3 * cell.nv:3, 4 * i:4 * i + 4] = mv
    for j, fd in enumerate(cell.faces):
        mc = mb.eval(fd.centroid[None, :])[0]
        for i in range(3):
            D[3 * cell.nv + j, 4 * i:4 * i + 4] = fd.area * fd.normal[i] * mc
    return D


def v_const_dof_matrix(cell):
    """Matrix (n_v_dofs, 3) mapping a constant vector to V dofs."""
    D = np.zeros((cell.n_v_dofs, 3))
    D[3 * cell.nv:] = cell.edge_tangents
    return D


# --------------------------------------------------------------- structure
def local_structure(cell):
    """Discrete gradient G_K (V<-U), curl E_K (W<-V) and divergence D_K (Q<-W)."""
    nv, ne, nf = cell.nv, cell.ne, cell.nf
    G = np.zeros((3 * nv + ne, nv))
    for e, (a, b) in enumerate(cell.edge_pairs):
        G[3 * nv + e, b] = 1.0 / cell.edge_lengths[e]
        G[3 * nv + e, a] = -1.0 / cell.edge_lengths[e]
    E = np.zeros((3 * nv + nf, 3 * nv + ne))
    E[:3 * nv, :3 * nv] = np.eye(3 * nv)
    D = np.zeros((1, 3 * nv + nf))
    for j, fd in enumerate(cell.faces):
        E[3 * nv + j, 3 * nv + fd.edges] = fd.edge_signs * cell.edge_lengths[fd.edges]
        D[0, 3 * nv + j] = fd.sign
    return G, E, D


# --------------------------------------------------------------- projectors
@dataclass
class FacePack:
    pin: np.ndarray        # (3, m) loop vertex values -> P_1(f) coefficients
    mass2: np.ndarray      # (6, 6) P_2(f) Gram matrix
    pin_w: np.ndarray      # (3, 3, nW) Pi^nabla of each Cartesian component of w
    p02_n: np.ndarray      # (6, nW) Pi^0_2 of w . n_f
    p01_w: np.ndarray      # (9, nW) Pi^0_1 of w, component-major
    p01_vt: np.ndarray     # (6, nV) Pi^0_1 of the tangential trace of v (frame comps)


@dataclass
class ProjectorPack:
    faces: list
    pin_w: np.ndarray      # (12, nW)
    p01_w: np.ndarray      # (12, nW)
    p00_v: np.ndarray      # (3, nV)
    mass1: np.ndarray      # (12, 12) Gram of P_1(K)^3
    mass2: np.ndarray      # (10, 10) scalar P_2(K) Gram
    div_row: np.ndarray    # (nW,) int_dK w.n = |K| div w
    G: np.ndarray
    E: np.ndarray
    D: np.ndarray


def face_pin_matrix(cell, j):
    """Pi^nabla_1 of a scalar with piecewise-linear trace given by loop vertex values."""
    fd = cell.faces[j]
    m = len(fd.loop)
    xi = cell.face_basis(j).local(cell.X[fd.loop])
    nxt = np.roll(np.arange(m), -1)
    seg = xi[nxt] - xi
    seg_len = cell.edge_lengths[fd.edges]
    d = seg / np.linalg.norm(seg, axis=1)[:, None]
    nout = np.column_stack([d[:, 1], -d[:, 0]])
    # trapezoid weights: int_{seg i} v = l_i (v_i + v_{i+1}) / 2
    avg = np.zeros((m, m))
    avg[np.arange(m), np.arange(m)] = 0.5
    avg[np.arange(m), nxt] += 0.5
    seg_int = seg_len[:, None] * avg
    P = np.zeros((3, m))
    P[1:] = fd.diameter / fd.area * (nout.T @ seg_int)
    bnd = seg_len.sum()
    mono_int = seg_len @ (0.5 * (xi + xi[nxt]))
    P[0] = (seg_int.sum(axis=0) - mono_int @ P[1:]) / bnd
    return P


def _face_pack(cell, j, E):
    fd = cell.faces[j]
    nv, nW, nV = cell.nv, cell.n_w_dofs, cell.n_v_dofs
    n = fd.normal
    pin = face_pin_matrix(cell, j)
    fb2 = cell.face_basis(j, 2)
    r = cell.face_rule(j, PROJ_QUAD)
    mvals = fb2.eval(r.points)
    mass2 = (mvals * r.weights[:, None]).T @ mvals
    mass1 = mass2[:3, :3]
    # Pi^nabla of each component of w from loop vertex values
    pin_w = np.zeros((3, 3, nW))
    for c in range(3):
        pin_w[c][:, 3 * fd.loop + c] = pin
    pin_n = np.tensordot(n, pin_w, axes=(0, 0))
    flux = np.zeros(nW)
    flux[3 * nv + j] = 1.0
    mom2 = mass2[:, :3] @ pin_n
    mom2[0] = flux
    p02_n = _solve(mass2, mom2, f"face {fd.index} P2 mass")
    mom1 = mass1 @ pin_n
    mom1[0] = flux
    p01_n = _solve(mass1, mom1, f"face {fd.index} P1 mass")
    p01_w = np.zeros((9, nW))
    for c in range(3):
        p01_w[3 * c:3 * c + 3] = pin_w[c] - n[c] * pin_n + n[c] * p01_n

    # tangential L2 projection of v onto P_1(f)^2 through grad_perp P_2 + x_f P_0
    basis = grad_perp_basis(1) + x_times_basis(2, 1)
    T = np.array([b.ravel() for b in basis]).T  # (6, 6) comp-major coefficients
    pin_rot = np.zeros((3, nV))
    for c in range(3):
        pin_rot[:, 3 * fd.loop + c] += n[c] * pin
    d = np.zeros((6, nV))
    emono = np.zeros((len(fd.edges), 6))
    for i, e in enumerate(fd.edges):
        er = cell.edge_rule(e, 2)
        emono[i] = er.integrate(fb2.eval(er.points))
    for b in range(5):
        beta = b + 1
        rot_part = mass2[beta, :3] @ pin_rot
        bnd = np.zeros(nV)
        bnd[3 * nv + fd.edges] = fd.edge_signs * emono[:, beta]
        d[b] = fd.diameter * (rot_part - bnd)
    # d[5] = 0: zero moment against x_f
    massv = np.kron(np.eye(2), mass1)
    p01_vt = _solve(massv, _solve(T.T, d, f"face {fd.index} split"), f"face {fd.index} mass")
    return FacePack(pin, mass2, pin_w, p02_n, p01_w, p01_vt)


def projectors(cell):
    """All order-1 projectors of a cell as DOF-to-coefficient matrices."""
    nv, nW, nV = cell.nv, cell.n_w_dofs, cell.n_v_dofs
    G, E, D = local_structure(cell)
    hK, vol = cell.diameter, cell.volume
    faces = [_face_pack(cell, j, E) for j in range(cell.nf)]
    cb2 = cell.basis(2)
    rc = cell.cell_rule(PROJ_QUAD)
    cm = cb2.eval(rc.points)
    mass2 = (cm * rc.weights[:, None]).T @ cm
    mass1 = np.kron(np.eye(3), mass2[:4, :4])

    # face integrals of w
    Iw = np.zeros((len(faces), 3, nW))
    for j, (fd, fp) in enumerate(zip(cell.faces, faces)):
        Iw[j] = fd.area * fp.p01_w[0::3]
    sig = np.array([fd.sign for fd in cell.faces], dtype=float)
    nrm = np.array([fd.normal for fd in cell.faces])
    area = np.array([fd.area for fd in cell.faces])
    fc = np.array([fd.centroid for fd in cell.faces])

    # Pi^nabla_1 on W
    pin_w = np.zeros((12, nW))
    mono_c = (fc - cell.centroid) / hK
    S = area @ mono_c
    for i in range(3):
        for a in range(3):
            pin_w[4 * i + 1 + a] = hK / vol * np.tensordot(sig * nrm[:, a], Iw[:, i], axes=(0, 0))
        pin_w[4 * i] = (Iw[:, i].sum(axis=0) - S @ pin_w[4 * i + 1:4 * i + 4]) / area.sum()

    # Pi^0_1 on W through grad P_2 + x_K x P_0
    div_row = np.zeros(nW)
    div_row[3 * nv:] = sig
    basis = grad_basis(3, 1) + x_cross_basis(1)
    T = np.array([b.ravel() for b in basis]).T
    dm = np.zeros((12, nW))
    cross = []
    for j, fd in enumerate(cell.faces):
        r = cell.face_rule(j, PROJ_QUAD)
        fm = cell.face_basis(j, 2).eval(r.points)
        km = cb2.eval(r.points)
        cross.append((km * r.weights[:, None]).T @ fm)
    for b in range(9):
        beta = b + 1
        row = -div_row / vol * mass2[0, beta]
        for j, fp in enumerate(faces):
            row = row + sig[j] * (cross[j][beta] @ fp.p02_n)
        dm[b] = hK * row
    for b in range(9, 12):
        dm[b] = T[:, b] @ mass1 @ pin_w
    p01_w = _solve(mass1, _solve(T.T, dm, f"cell {cell.index} split"), f"cell {cell.index} mass")

    # Pi^0_0 on V
    pinE = pin_w @ E
    p00_v = np.zeros((3, nV))
    for i in range(3):
        p0 = np.zeros(3)
        p0[i] = -0.5
        # phi = x_K x p0 = hK * (xi x p0)
        phi = hK * sum(p0[c] * x_cross_basis(1)[c] for c in range(3)).ravel()
        row = phi @ mass1 @ pinE
        for j, (fd, fp) in enumerate(zip(cell.faces, faces)):
            r = cell.face_rule(j, PROJ_QUAD)
            ph = np.cross(r.points - cell.centroid, p0)
            psi = np.cross(fd.normal, ph)
            psi_t = psi @ fd.frame.T
            fm = cell.face_basis(j, 1).eval(r.points)
            g = (psi_t * r.weights[:, None]).T @ fm  # (2, 3)
            row = row + fd.sign * (g.ravel() @ fp.p01_vt)
        p00_v[i] = row / vol
    return ProjectorPack(faces, pin_w, p01_w, p00_v, mass1, mass2, div_row, G, E, D)


# ----------------------------------------------------------- stabilizations
def _edge_mass_w(cell, scale_fn=None):
    """Sum over faces and their loop edges of the L2 product of linear vertex traces."""
    nW = cell.n_w_dofs
    S = np.zeros((nW, nW))
    for fd in cell.faces:
        s = 1.0 if scale_fn is None else scale_fn(fd)
        m = len(fd.loop)
        for i in range(m):
            a, b = fd.loop[i], fd.loop[(i + 1) % m]
            l = cell.edge_lengths[fd.edges[i]]
            for c in range(3):
                ia, ib = 3 * a + c, 3 * b + c
                S[ia, ia] += s * l / 3.0
                S[ib, ib] += s * l / 3.0
                S[ia, ib] += s * l / 6.0
                S[ib, ia] += s * l / 6.0
    return S


def stab_S1(cell, pack):
    hK, vol = cell.diameter, cell.volume
    S = pack.pin_w.T @ pack.mass1 @ pack.pin_w / hK ** 2
    S += np.outer(pack.div_row, pack.div_row) / vol
    for fd, fp in zip(cell.faces, pack.faces):
        S += fp.p01_w.T @ np.kron(np.eye(3), fp.mass2[:3, :3]) @ fp.p01_w / fd.diameter
    S += _edge_mass_w(cell)
    return 0.5 * (S + S.T)


def stab_S2(cell, pack, tangent_power=1):
    """S_2 on V dofs. ``tangent_power`` is the h_f exponent of the edge tangential term."""
    nv, nV = cell.nv, cell.n_v_dofs
    E = pack.E
    hK = cell.diameter
    C = pack.p01_w @ E
    S = hK ** 2 * C.T @ pack.mass1 @ C
    for fd, fp in zip(cell.faces, pack.faces):
        Cf = fp.p01_w @ E
        S += fd.diameter ** 3 * Cf.T @ np.kron(np.eye(3), fp.mass2[:3, :3]) @ Cf
    Sw = _edge_mass_w(cell, lambda fd: fd.diameter ** 4)
    S += E.T @ Sw @ E
    for fd in cell.faces:
        idx = 3 * nv + fd.edges
        S[idx, idx] += fd.diameter ** tangent_power * cell.edge_lengths[fd.edges]
    return 0.5 * (S + S.T)


# ------------------------------------------------------------ local forms
@dataclass
class LocalMatrices:
    A_W: np.ndarray
    B_V: np.ndarray
    E: np.ndarray
    G: np.ndarray
    D: np.ndarray
    pack: ProjectorPack = field(repr=False)

    @property
    def A_V(self):
        return self.E.T @ self.A_W @ self.E


def grad_gram(cell):
    """Gram matrix of gradients on P_1(K)^3 coefficients."""
    g = np.zeros((12, 12))
    for i in range(3):
        for a in range(1, 4):
            g[4 * i + a, 4 * i + a] = cell.volume / cell.diameter ** 2
    return g


def local_forms(cell, tangent_power=1):
    pack = projectors(cell)
    DW = w_poly_dof_matrix(cell)
    RW = np.eye(cell.n_w_dofs) - DW @ pack.pin_w
    A = pack.pin_w.T @ grad_gram(cell) @ pack.pin_w + RW.T @ stab_S1(cell, pack) @ RW
    DV = v_const_dof_matrix(cell)
    RV = np.eye(cell.n_v_dofs) - DV @ pack.p00_v
    B = cell.volume * pack.p00_v.T @ pack.p00_v + RV.T @ stab_S2(cell, pack, tangent_power) @ RV
    return LocalMatrices(0.5 * (A + A.T), 0.5 * (B + B.T), pack.E, pack.G, pack.D, pack)


def load_vector_W(cell, pack, f, degree=LOAD_QUAD):
    """F_W = P0W^T b with b = int_K f_i m_a."""
    r = cell.cell_rule(degree)
    fv = f(r.points)
    m = cell.basis(1).eval(r.points)
    b = np.concatenate([(m * (r.weights * fv[:, i])[:, None]).sum(axis=0) for i in range(3)])
    return pack.p01_w.T @ b


def poly_eval(cell, coef, x):
    """Evaluate a P_1(K)^3 coefficient vector at points."""
    m = cell.basis(1).eval(x)
    return np.column_stack([m @ coef[4 * i:4 * i + 4] for i in range(3)])
