"""Small polyhedral meshes for tests and checks: distorted hexahedra, prisms, cut cubes."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, build_cube_mesh

_CUBE = build_cube_mesh(1)


def _affine(rng, strength=0.3):
    while True:
        A = np.eye(3) + strength * rng.standard_normal((3, 3))
        if np.linalg.det(A) > 0.3 and np.linalg.cond(A) < 6:
            return A


def transformed(mesh, A, b=np.zeros(3), name=None):
    return Mesh(mesh.vertices @ np.asarray(A).T + b, mesh.faces, mesh.cells,
                name=name or mesh.name)


def hexahedron(rng):
    """Unit cube under a random affine map."""
    return transformed(_CUBE, _affine(rng), rng.standard_normal(3), "hex")


def frustum(rng):
    """Square base with a shrunken, shifted parallel top: planar trapezoid sides."""
    s = rng.uniform(0.5, 0.9)
    off = rng.uniform(-0.15, 0.15, size=2)
    bot = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float)
    top = np.column_stack([0.5 + s * (bot[:, :2] - 0.5) + off, np.ones(4)])
    verts = np.vstack([bot, top])
    faces = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]]
    return transformed(Mesh(verts, faces, [list(range(6))]), _affine(rng), rng.standard_normal(3),
                       "frustum")


def prism(rng):
    """Triangular prism with a scaled parallel top."""
    tri = np.array([[0, 0], [1, 0], [0.3, 0.9]]) + 0.1 * rng.standard_normal((3, 2))
    c = tri.mean(axis=0)
    s = rng.uniform(0.6, 1.0)
    top = c + s * (tri - c) + rng.uniform(-0.1, 0.1, size=2)
    verts = np.vstack([np.column_stack([tri, np.zeros(3)]), np.column_stack([top, np.ones(3)])])
    faces = [[0, 2, 1], [3, 4, 5], [0, 1, 4, 3], [1, 2, 5, 4], [2, 0, 3, 5]]
    return transformed(Mesh(verts, faces, [list(range(5))]), _affine(rng), rng.standard_normal(3),
                       "prism")


def cut_cube(rng=None, cut=2.5):
    """Unit cube with the (1,1,1) corner cut off: three pentagons, a triangle, three squares."""
    a = cut - 2.0
    verts = np.array([
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [0, 1, 1],
        [a, 1, 1], [1, a, 1], [1, 1, a]], float)
    faces = [
        [0, 3, 2, 1],            # z = 0
        [0, 1, 5, 4],            # y = 0
        [0, 4, 6, 3],            # x = 0
        [1, 2, 9, 8, 5],         # x = 1
        [3, 6, 7, 9, 2],         # y = 1
        [4, 5, 8, 7, 6],         # z = 1
        [7, 8, 9],               # cut
    ]
    m = Mesh(verts, faces, [list(range(7))], name="cutcube")
    if rng is None:
        return m
    return transformed(m, _affine(rng), rng.standard_normal(3), "cutcube")


def random_cells(seed=0, count=20):
    """A reproducible mix of single-cell meshes."""
    rng = np.random.default_rng(seed)
    makers = [hexahedron, prism, frustum, cut_cube]
    return [makers[i % len(makers)](rng) for i in range(count)]


def two_hexahedra():
    """Unit cube and its mirror image across x = 0, sharing one face."""
    verts = np.vstack([_CUBE.vertices, _CUBE.vertices[_CUBE.vertices[:, 0] > 0.5] * [-1, 1, 1]])
    # map mirrored vertices: x=1 nodes become x=-1 nodes
    idx = {tuple(np.round(v, 12)): i for i, v in enumerate(verts)}
    faces = [list(f) for f in _CUBE.faces]
    cell0 = list(range(len(faces)))
    cell1 = []
    for f in _CUBE.faces:
        loop = [idx[tuple(np.round(verts[v] * [-1, 1, 1], 12))] for v in f]
        key = sorted(loop)
        found = [j for j, g in enumerate(faces) if sorted(g) == key]
        if found:
            cell1.append(found[0])
        else:
            cell1.append(len(faces))
            faces.append(loop)
    return Mesh(verts, faces, [cell0, cell1], name="twohex")


def two_prisms():
    """Unit cube cut along the plane x = y into two triangular prisms."""
    v = _CUBE.vertices
    verts = v.copy()

    def vid(x, y, z):
        return int(np.nonzero(np.all(np.isclose(v, [x, y, z]), axis=1))[0][0])

    a0, b0, c0, d0 = vid(0, 0, 0), vid(1, 0, 0), vid(1, 1, 0), vid(0, 1, 0)
    a1, b1, c1, d1 = vid(0, 0, 1), vid(1, 0, 1), vid(1, 1, 1), vid(0, 1, 1)
    faces = [
        [a0, c0, b0], [a1, b1, c1],            # prism 1 caps
        [a0, b0, b1, a1], [b0, c0, c1, b1],    # prism 1 sides
        [a0, a1, c1, c0],                      # shared diagonal face
        [a0, d0, c0], [a1, c1, d1],            # prism 2 caps
        [c0, d0, d1, c1], [d0, a0, a1, d1],    # prism 2 sides
    ]
    return Mesh(verts, faces, [[0, 1, 2, 3, 4], [4, 5, 6, 7, 8]], name="twoprism")
