import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from gradcurl_vem import build_cube_mesh
from gradcurl_vem.fixtures import cut_cube
from gradcurl_vem.mesh import Mesh
from gradcurl_vem.polyquad import (
    MonomialBasis,
    decomposition_bases,
    dim_poly,
    grad_basis,
    monomial_exponents,
    polygon_rule,
    quadrature,
    reference_tetrahedron,
    reference_triangle,
    scaled_monomials,
    segment_rule,
    vec_curl,
    vec_div,
    x_cross_basis,
)

X, Y, Z = sp.symbols("x y z")


def _box(a, b, c, lo, hi):
    return math.prod((hi[i] ** (e + 1) - lo[i] ** (e + 1)) / (e + 1)
                     for i, e in enumerate((a, b, c)))


def _tet_exact(verts, expo):
    """Exact monomial integral over a tetrahedron via sympy on the affine pullback."""
    u, v, w = sp.symbols("u v w")
    p = [sp.Matrix([sp.Rational(str(c)) for c in q]) for q in verts]
    x = p[0] + u * (p[1] - p[0]) + v * (p[2] - p[0]) + w * (p[3] - p[0])
    J = abs(sp.Matrix.hstack(p[1] - p[0], p[2] - p[0], p[3] - p[0]).det())
    f = sp.expand(x[0] ** expo[0] * x[1] ** expo[1] * x[2] ** expo[2])
    val = sp.integrate(f, (w, 0, 1 - u - v), (v, 0, 1 - u), (u, 0, 1))
    return float(J * val)


def test_unit_cube_integrals():
    m = build_cube_mesh(1)
    r = quadrature(m, "cell", 0, 4)
    assert r.weights.sum() == pytest.approx(1.0, rel=1e-14)
    x = r.points
    assert r.integrate(x[:, 0] ** 2 * x[:, 1]) == pytest.approx(1 / 6, rel=1e-13)


@pytest.mark.parametrize("degree", [0, 2, 4, 7, 10])
def test_cube_monomials_exact(degree):
    m = build_cube_mesh(2)
    for k in (0, 7):
        r = quadrature(m, "cell", k, degree)
        lo = m.vertices[np.unique(np.concatenate([m.faces[f] for f in m.cells[k]]))].min(axis=0)
        for a, b, c in monomial_exponents(3, degree):
            val = r.integrate(r.points[:, 0] ** a * r.points[:, 1] ** b * r.points[:, 2] ** c)
            ref = _box(a, b, c, lo, lo + 0.5)
            assert val == pytest.approx(ref, rel=1e-12, abs=1e-15)


def test_cut_cube_monomials_sympy_oracle():
    m = cut_cube()
    corner = [(1, 1, 1), (0.5, 1, 1), (1, 0.5, 1), (1, 1, 0.5)]
    for degree in (2, 4):
        r = quadrature(m, "cell", 0, degree)
        for e in monomial_exponents(3, degree):
            val = r.integrate(np.prod(r.points ** np.array(e), axis=1))
            ref = _box(*e, (0, 0, 0), (1, 1, 1)) - _tet_exact(corner, e)
            assert val == pytest.approx(ref, rel=1e-12)


def _l_prism():
    """Extruded L; caps split into two rectangles so every face is star-shaped."""
    base = np.array([[0, 0], [1, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2], [0, 1]], float)
    v = np.vstack([np.column_stack([base, np.zeros(8)]), np.column_stack([base, np.ones(8)])])
    caps = [[0, 1, 4, 7], [1, 2, 3, 4], [7, 4, 5, 6]]
    faces = [c[::-1] for c in caps] + [[i + 8 for i in c] for c in caps]
    for i in range(8):
        j = (i + 1) % 8
        faces.append([i, j, j + 8, i + 8])
    return Mesh(v, faces, [list(range(len(faces)))])


def test_nonconvex_prism_exact():
    m = _l_prism()
    assert m.cell_volumes[0] == pytest.approx(3.0, rel=1e-14)
    r = quadrature(m, "cell", 0, 6)
    for e in monomial_exponents(3, 6):
        val = r.integrate(np.prod(r.points ** np.array(e), axis=1))
        ref = _box(*e, (0, 0, 0), (2, 1, 1)) + _box(*e, (0, 1, 0), (1, 2, 1))
        assert val == pytest.approx(ref, rel=1e-12)


def test_nonconvex_polygon_exact():
    p = np.array([[0, 0, 0], [2, 0, 0], [2, 1, 0], [1, 1, 0], [1, 2, 0], [0, 2, 0]], float)
    r = polygon_rule(p, np.array([0, 0, 1.0]), p.mean(axis=0), 5)
    for a, b in monomial_exponents(2, 5):
        val = r.integrate(r.points[:, 0] ** a * r.points[:, 1] ** b)
        ref = _box(a, b, 0, (0, 0, 0), (2, 1, 1)) + _box(a, b, 0, (0, 1, 0), (1, 2, 1))
        assert val == pytest.approx(ref, rel=1e-12)


def test_regular_pentagon_area():
    t = 2 * np.pi * np.arange(5) / 5
    p = np.column_stack([np.cos(t), np.sin(t), np.zeros(5)])
    shoelace = 0.5 * abs(np.dot(p[:, 0], np.roll(p[:, 1], -1)) - np.dot(p[:, 1], np.roll(p[:, 0], -1)))
    r = polygon_rule(p, np.array([0, 0, 1.0]), p.mean(axis=0), 2)
    assert abs(r.weights.sum() - shoelace) <= 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 12), st.integers(0, 12))
def test_reference_triangle_exact(a, b):
    if a + b > 12:
        return
    pts, w = reference_triangle(12)
    exact = Fraction(math.factorial(a) * math.factorial(b), math.factorial(a + b + 2))
    assert (w * pts[:, 0] ** a * pts[:, 1] ** b).sum() == pytest.approx(float(exact), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 9), st.integers(0, 9), st.integers(0, 9))
def test_reference_tetrahedron_exact(a, b, c):
    if a + b + c > 9:
        return
    pts, w = reference_tetrahedron(9)
    exact = Fraction(math.factorial(a) * math.factorial(b) * math.factorial(c),
                     math.factorial(a + b + c + 3))
    val = (w * pts[:, 0] ** a * pts[:, 1] ** b * pts[:, 2] ** c).sum()
    assert val == pytest.approx(float(exact), rel=1e-12)


def test_segment_rule():
    r = segment_rule([0, 0, 0], [3, 4, 0], 7)
    assert r.weights.sum() == pytest.approx(5.0)
    t = np.linalg.norm(r.points, axis=1)
    assert r.integrate(t ** 7) == pytest.approx(5 ** 8 / 8, rel=1e-13)


def test_scaled_monomials():
    m = build_cube_mesh(1)
    b = scaled_monomials(m, "cell", 0, 1)
    assert len(b) == 4
    x = np.array([[1.0, 0.5, 0.5]])
    np.testing.assert_allclose(b.eval(x)[0], [1, 0.5 / math.sqrt(3), 0, 0], atol=1e-15)
    assert len(scaled_monomials(m, "face", 0, 2)) == 6
    for kind, idx in [("cell", 0), ("face", 3), ("edge", 5)]:
        mb = scaled_monomials(m, kind, idx, 2)
        v = mb.eval(mb.center[None, :])[0]
        assert v[0] == 1.0 and np.all(v[1:] == 0.0)
    with pytest.raises(ValueError):
        scaled_monomials(m, "vertex", 0, 1)


def test_monomial_gradient_matches_finite_difference():
    b = MonomialBasis(np.array([0.2, -0.1, 0.3]), 0.7, 3)
    x = np.array([[0.4, 0.1, 0.5]])
    h = 1e-6
    fd = np.stack([(b.eval(x + h * e) - b.eval(x - h * e))[0] / (2 * h) for e in np.eye(3)], axis=1)
    np.testing.assert_allclose(b.grad_physical(x)[0], fd, atol=1e-7)


def _sym_field(coef, d):
    ex = monomial_exponents(3, d)
    return [sum(c * X ** a * Y ** b * Z ** g for c, (a, b, g) in zip(row, ex)) for row in coef]


def test_curl_of_x_cross_c_symbolic():
    c = np.array([1.0, 0.0, 0.0])
    v = x_cross_basis(1)[0]
    np.testing.assert_allclose(vec_curl(v, 1)[:, 0], [-2, 0, 0])
    f = _sym_field(v, 1)
    curl = [sp.diff(f[2], Y) - sp.diff(f[1], Z), sp.diff(f[0], Z) - sp.diff(f[2], X),
            sp.diff(f[1], X) - sp.diff(f[0], Y)]
    assert [float(sp.simplify(q)) for q in curl] == [-2 * c[0], 0.0, 0.0]
    # same field written directly as x cross c
    direct = sp.Matrix([X, Y, Z]).cross(sp.Matrix(list(c)))
    assert all(sp.simplify(a - b) == 0 for a, b in zip(f, direct))
    assert not np.any(0 * v)


def test_decomposition_dimensions():
    cell = decomposition_bases("cell", 1)
    assert len(cell["grad"]) == 9 and len(cell["x_cross"]) == 3
    M = np.array([b.ravel() for b in cell["grad"] + cell["x_cross"]])
    assert np.linalg.matrix_rank(M) == 12 == 3 * dim_poly(3, 1)
    face = decomposition_bases("face", 1)
    M = np.array([b.ravel() for b in face["grad_perp"] + face["x_times"]])
    assert np.linalg.matrix_rank(M) == 6
    for g in grad_basis(3, 1):
        assert not np.any(vec_curl(g, 1))
    for v in cell["curl"]:
        assert not np.any(vec_div(v, 1))
    with pytest.raises(ValueError):
        decomposition_bases("edge", 1)


def test_gram_condition_scale_invariant():
    conds = []
    for s in (1.0, 0.5):
        m = Mesh(s * cut_cube().vertices, cut_cube().faces, cut_cube().cells)
        mb = scaled_monomials(m, "cell", 0, 2)
        r = quadrature(m, "cell", 0, 4)
        v = mb.eval(r.points)
        conds.append(np.linalg.cond((v * r.weights[:, None]).T @ v))
    assert 0.5 <= conds[0] / conds[1] <= 2.0
