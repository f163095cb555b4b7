"""Global numbering, boundary elimination and sparse assembly.

Global layouts: U has one slot per vertex; V has ``3*NV`` vertex curl slots
followed by ``NE`` edge slots; W has ``3*NV`` vertex slots followed by ``NF`` face
slots; Q has one slot per cell.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .local import DOF_POINTS, LOAD_QUAD, dof_exactness, local_cell, local_forms, load_vector_W
from .polyquad import quadrature, reference_segment


class AssemblyError(RuntimeError):
    """Inconsistent global system (dimension mismatch or non-positive diagonal)."""


@dataclass
class DofNumbering:
    n_u: int
    n_v: int
    n_w: int
    n_q: int
    free_u: np.ndarray   # full indices of free U dofs
    free_v: np.ndarray   # full indices of free V dofs
    u_map: np.ndarray    # full -> free index, -1 if eliminated
    v_map: np.ndarray

    @property
    def n_free_u(self):
        return len(self.free_u)

    @property
    def n_free_v(self):
        return len(self.free_v)

    @property
    def n_eliminated(self):
        return (self.n_u - self.n_free_u) + (self.n_v - self.n_free_v)


def number_dofs(mesh):
    nv, ne = mesh.n_vertices, mesh.n_edges
    free_u = np.nonzero(~mesh.boundary_vertices)[0]
    vmask = np.concatenate([np.repeat(~mesh.boundary_vertices, 3), ~mesh.boundary_edges])
    free_v = np.nonzero(vmask)[0]
    u_map = -np.ones(nv, dtype=np.int64)
    u_map[free_u] = np.arange(len(free_u))
    v_map = -np.ones(3 * nv + ne, dtype=np.int64)
    v_map[free_v] = np.arange(len(free_v))
    return DofNumbering(nv, 3 * nv + ne, 3 * nv + mesh.n_faces, mesh.n_cells,
                        free_u, free_v, u_map, v_map)


def v_indices(mesh, cell):
    return np.concatenate([(3 * cell.vertex_ids[:, None] + np.arange(3)).ravel(),
                           3 * mesh.n_vertices + cell.edge_ids])


def w_indices(mesh, cell):
    return np.concatenate([(3 * cell.vertex_ids[:, None] + np.arange(3)).ravel(),
                           3 * mesh.n_vertices + np.array([fd.index for fd in cell.faces])])


# ----------------------------------------------------------- structure
def global_structure(mesh):
    """Full (non-eliminated) sparse G (V<-U), E (W<-V), D (Q<-W)."""
    nv, ne, nf = mesh.n_vertices, mesh.n_edges, mesh.n_faces
    rows = 3 * nv + np.arange(ne)
    inv = 1.0 / mesh.edge_lengths
    G = sps.coo_matrix((np.concatenate([inv, -inv]),
                        (np.concatenate([rows, rows]),
                         np.concatenate([mesh.edges[:, 1], mesh.edges[:, 0]]))),
                       shape=(3 * nv + ne, nv)).tocsr()
    er, ec, ev = [np.arange(3 * nv)], [np.arange(3 * nv)], [np.ones(3 * nv)]
    for f in range(nf):
        fe = mesh.face_edges[f]
        er.append(np.full(len(fe), 3 * nv + f))
        ec.append(3 * nv + fe)
        ev.append(mesh.face_edge_signs[f] * mesh.edge_lengths[fe])
    E = sps.coo_matrix((np.concatenate(ev), (np.concatenate(er), np.concatenate(ec))),
                       shape=(3 * nv + nf, 3 * nv + ne)).tocsr()
    dr, dc, dv = [], [], []
    for k, (cf, sg) in enumerate(zip(mesh.cells, mesh.cell_face_signs)):
        dr.append(np.full(len(cf), k))
        dc.append(3 * nv + cf)
        dv.append(sg.astype(float))
    D = sps.coo_matrix((np.concatenate(dv), (np.concatenate(dr), np.concatenate(dc))),
                       shape=(mesh.n_cells, 3 * nv + nf)).tocsr()
    return G, E, D


# ------------------------------------------------------------ interpolation
def interpolate_V(mesh, v, curl, points=DOF_POINTS):
    """Global V dofs of an analytic field: curl at vertices, tangential edge means."""
    degree = dof_exactness(points)
    out = np.empty(3 * mesh.n_vertices + mesh.n_edges)
    out[:3 * mesh.n_vertices] = np.asarray(curl(mesh.vertices)).ravel()
    t, w = reference_segment(degree)
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    vals = np.asarray(v(pts.reshape(-1, 3))).reshape(len(a), len(t), 3)
    out[3 * mesh.n_vertices:] = np.einsum("eqc,ec,q->e", vals, mesh.edge_tangents, w)
    return out


def interpolate_W(mesh, w, points=DOF_POINTS):
    """Global W dofs of an analytic field: vertex values, normal face fluxes."""
    degree = dof_exactness(points)
    out = np.empty(3 * mesh.n_vertices + mesh.n_faces)
    out[:3 * mesh.n_vertices] = np.asarray(w(mesh.vertices)).ravel()
    for f in range(mesh.n_faces):
        r = quadrature(mesh, "face", f, degree)
        out[3 * mesh.n_vertices + f] = r.integrate(w(r.points) @ mesh.face_normals[f])
    return out


# --------------------------------------------------------------- assembly
@dataclass
class GlobalSystem:
    mesh: object
    numbering: DofNumbering
    A: sps.csr_matrix        # free V x free V
    B_VV: sps.csr_matrix     # free V x free V
    B_lam: sps.csr_matrix    # free U x free V
    M_tilde: np.ndarray      # free U diagonal
    F: np.ndarray            # free V
    G: sps.csr_matrix        # free V x free U
    E: sps.csr_matrix        # W x free V
    D: sps.csr_matrix        # Q x W
    A_full: sps.csr_matrix
    B_full: sps.csr_matrix
    F_full: np.ndarray
    G_full: sps.csr_matrix
    E_full: sps.csr_matrix
    D_full: sps.csr_matrix
    n_local_computed: int = 0
    cells: list = None
    local: list = None

    @property
    def ndof(self):
        """Solved unknowns: free V plus free U (multiplier) dofs."""
        return self.numbering.n_free_v + self.numbering.n_free_u

    def expand_v(self, x_free):
        x = np.zeros(self.numbering.n_v)
        x[self.numbering.free_v] = x_free
        return x


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("GRADCURL_THREADS", "1") or 1)
    return max(1, int(threads))


def compute_local(mesh, cache=True, tangent_power=1, threads=None):
    """Local matrices for every cell, reusing results on geometrically identical cells."""
    cells = [local_cell(mesh, k) for k in range(mesh.n_cells)]
    keys = [c.geometry_key() for c in cells] if cache else list(range(len(cells)))
    first = {}
    for i, key in enumerate(keys):
        first.setdefault(key, i)
    todo = sorted(first.values())

    def work(i):
        return local_forms(cells[i], tangent_power)

    nt = _threads(threads)
    if nt > 1 and len(todo) > 1:
        with ThreadPoolExecutor(nt) as ex:
            results = list(ex.map(work, todo))
    else:
        results = [work(i) for i in todo]
    by_key = {keys[i]: r for i, r in zip(todo, results)}
    return cells, [by_key[key] for key in keys], len(todo)


def assemble(mesh, source=None, nu=1.0, cache=True, tangent_power=1, threads=None,
             load_degree=LOAD_QUAD):
    """Assemble the grad-curl system with homogeneous boundary conditions eliminated."""
    num = number_dofs(mesh)
    cells, mats, ncomp = compute_local(mesh, cache, tangent_power, threads)
    ar, ac, av, bv = [], [], [], []
    F_full = np.zeros(num.n_v)
    for cell, lm in zip(cells, mats):
        idx = v_indices(mesh, cell)
        AV = lm.A_V
        if AV.shape != (len(idx), len(idx)) or lm.B_V.shape != AV.shape:
            raise AssemblyError(f"cell {cell.index}: local matrix size mismatch")
        r = np.repeat(idx, len(idx))
        c = np.tile(idx, len(idx))
        ar.append(r)
        ac.append(c)
        av.append(AV.ravel())
        bv.append(lm.B_V.ravel())
        if source is not None:
            FW = load_vector_W(cell, lm.pack, source, load_degree)
            np.add.at(F_full, idx, lm.E.T @ FW / nu)
    r = np.concatenate(ar)
    c = np.concatenate(ac)
    A_full = sps.coo_matrix((np.concatenate(av), (r, c)), shape=(num.n_v, num.n_v)).tocsr()
    B_full = sps.coo_matrix((np.concatenate(bv), (r, c)), shape=(num.n_v, num.n_v)).tocsr()
    G_full, E_full, D_full = global_structure(mesh)
    fv, fu = num.free_v, num.free_u
    A = A_full[fv][:, fv].tocsr()
    B = B_full[fv][:, fv].tocsr()
    G = G_full[fv][:, fu].tocsr()
    fixed_v = np.setdiff1d(np.arange(num.n_v), fv)
    if G_full[fixed_v][:, fu].nnz:
        raise AssemblyError("free U dof couples to an eliminated V dof")
    B_lam = (G.T @ B).tocsr()
    M_tilde = np.asarray((G.T @ B @ G).diagonal()).ravel()
    return GlobalSystem(mesh, num, A, B, B_lam, M_tilde, F_full[fv], G,
                        E_full[:, fv].tocsr(), D_full, A_full, B_full, F_full,
                        G_full, E_full, D_full, ncomp, cells, mats)


def schur_system(system):
    """S = A + B_lam^T M_tilde^{-1} B_lam and its right-hand side."""
    mt = system.M_tilde
    if np.any(mt <= 0.0):
        raise AssemblyError(f"non-positive M_tilde entry (min {mt.min():.3e})")
    S = system.A + system.B_lam.T @ sps.diags(1.0 / mt) @ system.B_lam
    S = (0.5 * (S + S.T)).tocsr()
    return S, system.F.copy()


def saddle_system(system):
    """[[A, B_lam^T], [B_lam, 0]] and its right-hand side."""
    K = sps.bmat([[system.A, system.B_lam.T], [system.B_lam, None]], format="csr")
    rhs = np.concatenate([system.F, np.zeros(system.numbering.n_free_u)])
    return K, rhs


def dump_matrix(matrix, path):
    """Write a sparse matrix as 'row col value' lines (0-based)."""
    m = sps.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"# {m.shape[0]} {m.shape[1]} {m.nnz}\n")
        for i, j, v in zip(m.row, m.col, m.data):
            fh.write(f"{i} {j} {v:.17g}\n")
