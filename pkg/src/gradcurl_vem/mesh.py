"""Polyhedral meshes: topology, orientation, geometry caches and I/O.

Conventions
-----------
* Edge ``e = (a, b)`` is stored with ``a < b``; its tangent points from ``a`` to ``b``.
* A face stores one global unit normal ``n_f``. Its vertex loop is counter-clockwise
  with respect to ``n_f`` (the normal is computed from the loop, so this holds by
  construction). ``face_edge_signs[f][i]`` is +1 when loop segment ``i`` runs along
  the global edge tangent.
* A cell stores ``(face, sign)`` pairs such that ``sign * n_f`` points outward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MESH_FORMAT_VERSION = 1


class MeshParseError(ValueError):
    """Raised when a mesh file or array input is malformed."""


class MeshValidationError(ValueError):
    """Raised when mesh topology or geometry violates an invariant."""


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _newell_normal(pts):
    """Area vector of a closed polygon (norm equals the area)."""
    nxt = np.roll(pts, -1, axis=0)
    return 0.5 * np.cross(pts, nxt).sum(axis=0)


def _diameter(pts):
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d * d).sum(axis=-1)).max())


class Mesh:
    """Immutable conforming polyhedral mesh.

    Build with :meth:`from_polyhedra`, :func:`build_cube_mesh` or :func:`load_mesh`.
    """

    def __init__(self, vertices, faces, cells, name="mesh"):
        self.name = name
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise MeshParseError("vertices must be an (N, 3) array")
        if not np.all(np.isfinite(verts)):
            raise MeshParseError("vertex coordinates must be finite")
        nv = len(verts)
        loops = []
        for i, loop in enumerate(faces):
            try:
                loop = np.asarray(loop, dtype=np.int64)
            except (TypeError, ValueError) as exc:
                raise MeshParseError(f"face {i}: malformed vertex list") from exc
            if loop.ndim != 1 or len(loop) < 3:
                raise MeshParseError(f"face {i}: needs at least 3 vertices")
            if loop.min() < 0 or loop.max() >= nv:
                raise MeshParseError(f"face {i}: references a missing vertex")
            if len(set(loop.tolist())) != len(loop):
                raise MeshParseError(f"face {i}: repeated vertex in loop")
            loops.append(loop)
        nf = len(loops)
        cell_faces = []
        for k, cf in enumerate(cells):
            try:
                cf = np.asarray(cf, dtype=np.int64)
            except (TypeError, ValueError) as exc:
                raise MeshParseError(f"cell {k}: malformed face list") from exc
            if cf.ndim != 1 or len(cf) < 4:
                raise MeshParseError(f"cell {k}: needs at least 4 faces")
            if cf.min() < 0 or cf.max() >= nf:
                raise MeshParseError(f"cell {k}: references a missing face")
            if len(set(cf.tolist())) != len(cf):
                raise MeshParseError(f"cell {k}: repeated face")
            cell_faces.append(cf)
        if not cell_faces:
            raise MeshParseError("mesh has no cells")

        self.vertices = _readonly(verts)
        self.faces = [_readonly(f) for f in loops]
        self.cells = [_readonly(c) for c in cell_faces]
        self._build_edges()
        self._face_geometry()
        self._orient_cells()
        self._cell_geometry()
        self._boundary_flags()

    # ------------------------------------------------------------------ topology
    def _build_edges(self):
        index = {}
        edges = []
        face_edges, face_signs = [], []
        for loop in self.faces:
            fe = np.empty(len(loop), dtype=np.int64)
            fs = np.empty(len(loop), dtype=np.int64)
            for i in range(len(loop)):
                a, b = int(loop[i]), int(loop[(i + 1) % len(loop)])
                key = (min(a, b), max(a, b))
                if key not in index:
                    index[key] = len(edges)
                    edges.append(key)
                fe[i] = index[key]
                fs[i] = 1 if a < b else -1
            face_edges.append(_readonly(fe))
            face_signs.append(_readonly(fs))
        self.edges = _readonly(np.array(edges, dtype=np.int64).reshape(-1, 2))
        self.face_edges = face_edges
        self.face_edge_signs = face_signs
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        lengths = np.linalg.norm(d, axis=1)
        if np.any(lengths <= 0.0):
            raise MeshValidationError("zero-length edge")
        self.edge_lengths = _readonly(lengths)
        self.edge_tangents = _readonly(d / lengths[:, None])
        self.edge_midpoints = _readonly(
            0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]]))

    def _face_geometry(self):
        nf = len(self.faces)
        normals = np.empty((nf, 3))
        areas = np.empty(nf)
        cents = np.empty((nf, 3))
        diams = np.empty(nf)
        frames = np.empty((nf, 2, 3))
        for f, loop in enumerate(self.faces):
            pts = self.vertices[loop]
            av = _newell_normal(pts)
            a = np.linalg.norm(av)
            h = _diameter(pts)
            if a <= 1e-14 * h * h:
                raise MeshValidationError(f"face {f}: zero area")
            n = av / a
            # fan about the vertex mean
            c0 = pts.mean(axis=0)
            nxt = np.roll(pts, -1, axis=0)
            tri_area = 0.5 * np.cross(pts - c0, nxt - c0) @ n
            if np.any(tri_area <= 0.0):
                raise MeshValidationError(f"face {f}: not star-shaped w.r.t. its vertex mean")
            area = tri_area.sum()
            cent = (tri_area[:, None] * (c0 + pts + nxt) / 3.0).sum(axis=0) / area
            dist = np.abs((pts - cent) @ n)
            if dist.max() > 1e-9 * h:
                raise MeshValidationError(
                    f"face {f}: non-planar (deviation {dist.max():.3e}, h_f {h:.3e})")
            e1 = pts[1] - pts[0]
            e1 = e1 - (e1 @ n) * n
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(n, e1)
            normals[f], areas[f], cents[f], diams[f] = n, area, cent, h
            frames[f, 0], frames[f, 1] = e1, e2
        self.face_normals = _readonly(normals)
        self.face_areas = _readonly(areas)
        self.face_centroids = _readonly(cents)
        self.face_diameters = _readonly(diams)
        self.face_frames = _readonly(frames)

    def _orient_cells(self):
        """Derive sigma_{K,f} by consistent edge orientation and a signed-volume test."""
        incid = np.zeros(len(self.faces), dtype=np.int64)
        signs = []
        for k, cf in enumerate(self.cells):
            edge_use = {}
            for j, f in enumerate(cf):
                incid[f] += 1
                for e, s in zip(self.face_edges[f], self.face_edge_signs[f]):
                    edge_use.setdefault(int(e), []).append((j, int(s)))
            for e, uses in edge_use.items():
                if len(uses) != 2:
                    raise MeshValidationError(
                        f"cell {k}: edge {e} is used by {len(uses)} faces (surface not closed)")
            sg = np.zeros(len(cf), dtype=np.int64)
            sg[0] = 1
            stack = [0]
            while stack:
                j = stack.pop()
                for e, s in zip(self.face_edges[cf[j]], self.face_edge_signs[cf[j]]):
                    for jj, ss in edge_use[int(e)]:
                        if jj == j:
                            continue
                        want = -sg[j] * s * ss
                        if sg[jj] == 0:
                            sg[jj] = want
                            stack.append(jj)
                        elif sg[jj] != want:
                            raise MeshValidationError(f"cell {k}: inconsistent face orientation")
            if np.any(sg == 0):
                raise MeshValidationError(f"cell {k}: face set is not connected")
            vol = np.sum(sg * self.face_areas[cf] *
                         np.einsum("ij,ij->i", self.face_normals[cf], self.face_centroids[cf]))
            if vol < 0:
                sg = -sg
            signs.append(_readonly(sg))
        if np.any(incid > 2):
            bad = np.nonzero(incid > 2)[0]
            raise MeshValidationError(f"non-manifold faces: {bad.tolist()}")
        self.cell_face_signs = signs
        self._face_incidence = incid
        # interior faces must be used with opposite signs
        seen = {}
        for k, (cf, sg) in enumerate(zip(self.cells, signs)):
            for f, s in zip(cf, sg):
                if int(f) in seen and seen[int(f)] == s:
                    raise MeshValidationError(f"face {f}: both cells orient it the same way")
                seen[int(f)] = s
        if np.any(incid == 0):
            raise MeshValidationError("face not used by any cell")

    def _cell_geometry(self):
        nc = len(self.cells)
        vols = np.empty(nc)
        cents = np.empty((nc, 3))
        diams = np.empty(nc)
        anchors = np.empty((nc, 3))
        cverts, cedges = [], []
        for k, (cf, sg) in enumerate(zip(self.cells, self.cell_face_signs)):
            vids = np.unique(np.concatenate([self.faces[f] for f in cf]))
            eids = np.unique(np.concatenate([self.face_edges[f] for f in cf]))
            cverts.append(_readonly(vids))
            cedges.append(_readonly(eids))
            pts = self.vertices[vids]
            anchor = pts.mean(axis=0)
            vol = 0.0
            mom = np.zeros(3)
            for f, s in zip(cf, sg):
                loop = self.faces[f]
                p = self.vertices[loop]
                c0 = p.mean(axis=0)
                q = np.roll(p, -1, axis=0)
                # signed tets (anchor, c0, p_i, p_{i+1}) with outward orientation
                tv = s * np.einsum("ij,ij->i", np.cross(p - c0, q - c0), (c0 - anchor)[None, :]) / 6.0
                vol += tv.sum()
                mom += (tv[:, None] * (anchor + c0 + p + q) / 4.0).sum(axis=0)
            h = _diameter(pts)
            if vol <= 1e-14 * h ** 3:
                raise MeshValidationError(f"cell {k}: zero or negative volume")
            vols[k], cents[k], diams[k], anchors[k] = vol, mom / vol, h, anchor
            closure = np.sum((sg * self.face_areas[cf])[:, None] * self.face_normals[cf], axis=0)
            if np.abs(closure).max() > 1e-12 * h * h:
                raise MeshValidationError(f"cell {k}: surface is not closed")
        self.cell_volumes = _readonly(vols)
        self.cell_centroids = _readonly(cents)
        self.cell_diameters = _readonly(diams)
        self.cell_anchors = _readonly(anchors)
        self.cell_vertices = cverts
        self.cell_edges = cedges

    def _boundary_flags(self):
        bf = self._face_incidence == 1
        bv = np.zeros(len(self.vertices), dtype=bool)
        be = np.zeros(len(self.edges), dtype=bool)
        for f in np.nonzero(bf)[0]:
            bv[self.faces[f]] = True
            be[self.face_edges[f]] = True
        self.boundary_faces = _readonly(bf)
        self.boundary_vertices = _readonly(bv)
        self.boundary_edges = _readonly(be)

    # ------------------------------------------------------------------ helpers
    @classmethod
    def from_polyhedra(cls, vertices, faces, cells, name="mesh"):
        return cls(vertices, faces, cells, name=name)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def h(self):
        """Mesh size: largest cell diameter."""
        return float(self.cell_diameters.max())

    def summary(self):
        return {
            "name": self.name,
            "n_vertices": self.n_vertices,
            "n_edges": self.n_edges,
            "n_faces": self.n_faces,
            "n_cells": self.n_cells,
            "n_boundary_faces": int(self.boundary_faces.sum()),
            "h": self.h,
            "volume": float(self.cell_volumes.sum()),
        }

    def to_dict(self):
        return {
            "format": "polymesh",
            "version": MESH_FORMAT_VERSION,
            "vertices": self.vertices.tolist(),
            "faces": [f.tolist() for f in self.faces],
            "cells": [c.tolist() for c in self.cells],
        }

    def permuted_cells(self, perm):
        """Same mesh with cells listed in the order ``perm``."""
        return Mesh(self.vertices, self.faces, [self.cells[i] for i in perm], name=self.name)


def build_cube_mesh(n):
    """Unit cube split into ``n**3`` axis-aligned cubes."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    verts = np.column_stack([X.ravel(order="F"), Y.ravel(order="F"), Z.ravel(order="F")])

    def vid(i, j, k):
        return i + (n + 1) * (j + (n + 1) * k)

    faces = []
    fid = {}
    # loops counter-clockwise about the +axis direction
    for k in range(n + 1):
        for j in range(n):
            for i in range(n):
                fid[("z", i, j, k)] = len(faces)
                faces.append([vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)])
    for j in range(n + 1):
        for k in range(n):
            for i in range(n):
                fid[("y", i, j, k)] = len(faces)
                faces.append([vid(i, j, k), vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j, k)])
    for i in range(n + 1):
        for k in range(n):
            for j in range(n):
                fid[("x", i, j, k)] = len(faces)
                faces.append([vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)])
    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                cells.append([fid[("x", i, j, k)], fid[("x", i + 1, j, k)],
                              fid[("y", i, j, k)], fid[("y", i, j + 1, k)],
                              fid[("z", i, j, k)], fid[("z", i, j, k + 1)]])
    return Mesh(verts, faces, cells, name=f"cube{n}")


def load_mesh(path, format="json"):
    """Read a mesh file, or build a builtin mesh from ``builtin:cube:<n>``."""
    spec = str(path)
    if spec.startswith("builtin:"):
        parts = spec.split(":")
        if len(parts) != 3 or parts[1] != "cube":
            raise MeshParseError(f"unknown builtin mesh '{spec}'")
        try:
            n = int(parts[2])
        except ValueError as exc:
            raise MeshParseError(f"bad cube size in '{spec}'") from exc
        if n < 1:
            raise MeshParseError("cube size must be >= 1")
        return build_cube_mesh(n)
    if format != "json":
        raise MeshParseError(f"unsupported mesh format '{format}'")
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MeshParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise MeshParseError(f"{path}: expected a JSON object")
    version = data.get("version", MESH_FORMAT_VERSION)
    if version != MESH_FORMAT_VERSION:
        raise MeshParseError(f"{path}: unsupported format version {version}")
    for key in ("vertices", "faces", "cells"):
        if key not in data:
            raise MeshParseError(f"{path}: missing '{key}'")
    for key in ("faces", "cells"):
        for item in data[key]:
            if not isinstance(item, list) or not all(isinstance(i, int) for i in item):
                raise MeshParseError(f"{path}: '{key}' entries must be integer lists")
    return Mesh(data["vertices"], data["faces"], data["cells"], name=Path(path).stem)


def save_mesh(mesh, path):
    Path(path).write_text(json.dumps(mesh.to_dict()))


@dataclass
class RegularityReport:
    mu: float
    min_edge_ratio: np.ndarray
    min_face_inradius_ratio: np.ndarray
    kernel_ball_ratio: np.ndarray
    short_edges: list = field(default_factory=list)
    thin_faces: list = field(default_factory=list)
    thin_cells: list = field(default_factory=list)

    @property
    def passed(self):
        return not (self.short_edges or self.thin_faces or self.thin_cells)


def check_regularity(mesh, mu=0.2):
    """Approximate shape-regularity metrics per cell (report only).

    Face inradius: smallest distance from the face centroid to its edge lines.
    Cell ball: smallest distance from the cell centroid to its face planes.
    Both are only estimates of the largest ball the entity is star-shaped about.
    """
    nc = mesh.n_cells
    edge_r = np.empty(nc)
    face_r = np.empty(nc)
    ball_r = np.empty(nc)
    short_edges, thin_faces, thin_cells = set(), set(), []
    face_in = np.empty(mesh.n_faces)
    for f, loop in enumerate(mesh.faces):
        p = mesh.vertices[loop]
        q = np.roll(p, -1, axis=0)
        c = mesh.face_centroids[f]
        t = (q - p) / np.linalg.norm(q - p, axis=1)[:, None]
        r = c - p
        d = np.linalg.norm(r - (r * t).sum(axis=1)[:, None] * t, axis=1)
        face_in[f] = d.min()
    for k, cf in enumerate(mesh.cells):
        hk = mesh.cell_diameters[k]
        el = mesh.edge_lengths[mesh.cell_edges[k]] / hk
        edge_r[k] = el.min()
        fr = face_in[cf] / hk
        face_r[k] = fr.min()
        dist = np.abs(np.einsum("ij,ij->i", mesh.face_normals[cf],
                                mesh.face_centroids[cf] - mesh.cell_centroids[k]))
        ball_r[k] = dist.min() / hk
        for e, r in zip(mesh.cell_edges[k], el):
            if r < mu:
                short_edges.add(int(e))
        for f, r in zip(cf, fr):
            if r < mu:
                thin_faces.add(int(f))
        if ball_r[k] < mu:
            thin_cells.append(k)
    return RegularityReport(mu, edge_r, face_r, ball_r, sorted(short_edges),
                            sorted(thin_faces), thin_cells)
