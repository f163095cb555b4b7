"""One test per acceptance criterion; each records a single PASS/FAIL line."""

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, record
from gradcurl_vem import build_cube_mesh
from gradcurl_vem.assembly import assemble, global_structure, interpolate_V, interpolate_W, schur_system
from gradcurl_vem.fixtures import frustum, hexahedron, prism, random_cells, two_prisms
from gradcurl_vem.linsolve import cg_solve, cholesky_ok, direct_solve
from gradcurl_vem.local import (
    face_pin_matrix,
    grad_gram,
    local_cell,
    local_forms,
    local_structure,
    poly_eval,
    projectors,
    v_const_dof_matrix,
    w_poly_dof_matrix,
)
from gradcurl_vem.manufactured import manufactured_case
from gradcurl_vem.study import SolverConfig, _maxabs, _rank, b_norm, multiplier_b_norm, run_study, solve_saddle


def _rel(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


@pytest.fixture(scope="module")
def study():
    meshes = [build_cube_mesh(n) for n in (4, 8, 12)]
    return run_study(meshes, manufactured_case(), SolverConfig())


def test_criterion_01_convergence_rates(study):
    rb = [r.rate_b for r in study.rows[1:]]
    ra = [r.rate_a1 for r in study.rows[1:]]
    ok = ra[-1] >= 0.85 and all(r >= 2.0 for r in rb)
    record(1, ok, f"curl rates {[round(r, 4) for r in ra]} (last >= 0.85), "
                  f"b rates {[round(r, 4) for r in rb]} (all >= 2.0)")
    assert ok


def test_criterion_02_mesh_sizes():
    ref = {4: 0.433012, 8: 0.216506, 12: 0.144337}
    got = {n: build_cube_mesh(n).h for n in ref}
    ok = all(np.floor(got[n] * 1e6) / 1e6 == pytest.approx(ref[n], abs=1e-12)
             and abs(got[n] - ref[n]) < 1e-6 for n in ref)
    record(2, ok, "h = " + ", ".join(f"{got[n]:.7f}" for n in ref))
    assert ok


def test_criterion_03_multiplier_vanishes():
    s = assemble(build_cube_mesh(4), manufactured_case().f)
    psi, lam, _ = solve_saddle(s)
    ratio = multiplier_b_norm(s, lam) / b_norm(s, psi)
    ok = ratio <= 1e-8
    record(3, ok, f"||lambda_h||_b / ||psi_h||_b = {ratio:.2e} (<= 1e-8)")
    assert ok


def test_criterion_04_complex_exactness():
    worst, details = 0.0, []
    ok = True
    for mesh in (build_cube_mesh(2), build_cube_mesh(3), two_prisms()):
        s = assemble(mesh)
        for E, G, D in ((s.E, s.G, s.D), (s.E_full, s.G_full, s.D_full)):
            eg = _maxabs(E @ G) / max(_maxabs(E) * _maxabs(G), 1e-300) if G.shape[1] else 0.0
            de = _maxabs(D @ E) / max(_maxabs(D) * _maxabs(E), 1e-300) if E.shape[1] else 0.0
            worst = max(worst, eg, de)
        nfv, nfu = s.numbering.n_free_v, s.numbering.n_free_u
        kfree = nfv - (_rank(s.E) if nfv else 0)
        kfull = s.E_full.shape[1] - _rank(s.E_full)
        ok &= kfree == nfu and kfull == _rank(s.G_full) == mesh.n_vertices - 1
        details.append(f"{mesh.name}: ker E {kfree} vs free U {nfu}")
    ok &= worst <= 1e-13
    record(4, ok, f"max scaled |EG|,|DE| = {worst:.1e}; " + "; ".join(details))
    assert ok


def test_criterion_05_patch_tests():
    rng = np.random.default_rng(20)
    makers = [hexahedron, prism, frustum]
    ea = eb = 0.0
    for i in range(20):
        cell = local_cell(makers[i % 3](rng), 0)
        lm = local_forms(cell)
        DW = w_poly_dof_matrix(cell)
        ea = max(ea, _rel(DW.T @ lm.A_W @ DW, grad_gram(cell)))
        DV = v_const_dof_matrix(cell)
        eb = max(eb, _rel(DV.T @ lm.B_V @ DV, cell.volume * np.eye(3)))
    ok = ea <= 1e-11 and eb <= 1e-12
    record(5, ok, f"A_W patch {ea:.1e} (<= 1e-11), B_V patch {eb:.1e} (<= 1e-12) on 20 cells")
    assert ok


def test_criterion_06_projector_suite():
    rng = np.random.default_rng(6)
    worst = 0.0
    for m in random_cells(seed=6, count=20):
        cell = local_cell(m, 0)
        pack = projectors(cell)
        DW, DV = w_poly_dof_matrix(cell), v_const_dof_matrix(cell)
        worst = max(worst, _rel(pack.pin_w @ DW, np.eye(12)), _rel(pack.p01_w @ DW, np.eye(12)))
        c = rng.standard_normal(3)
        G, _, _ = local_structure(cell)
        worst = max(worst, _rel(pack.p00_v @ (DV @ c), c), _rel(pack.p00_v @ (G @ (cell.X @ c)), c))
        coef = rng.standard_normal(12)
        dw = DW @ coef
        for j, (fd, fp) in enumerate(zip(cell.faces, pack.faces)):
            fb = cell.face_basis(j)
            lin = rng.standard_normal(3)
            worst = max(worst, _rel(face_pin_matrix(cell, j) @ (fb.eval(cell.X[fd.loop]) @ lin), lin))
            r = cell.face_rule(j, 4)
            wv = poly_eval(cell, coef, r.points)
            pn = cell.face_basis(j, 2).eval(r.points) @ (fp.p02_n @ dw)
            worst = max(worst, _rel(pn, wv @ fd.normal))
            pw = np.column_stack([fb.eval(r.points) @ (fp.p01_w @ dw)[3 * k:3 * k + 3] for k in range(3)])
            worst = max(worst, _rel(pw, wv))
            ct = fd.frame @ c
            worst = max(worst, _rel(fp.p01_vt @ (DV @ c), np.array([ct[0], 0, 0, ct[1], 0, 0])))
    ok = worst <= 1e-11
    record(6, ok, f"max relative reproduction error {worst:.1e} (<= 1e-11) on 20 cells")
    assert ok


def test_criterion_07_spd_and_solvers():
    case = manufactured_case()
    ok, details = True, []
    for n in (2, 3, 4):
        s = assemble(build_cube_mesh(n), case.f)
        S, F = schur_system(s)
        chol = cholesky_ok(S)
        x, rep = cg_solve(S, F, tol=1e-12)
        y, lam, _ = solve_saddle(s)
        d = x - y
        agree = b_norm(s, d) / b_norm(s, x)
        ok &= chol and rep.iterations <= 10 * len(F) and agree <= 1e-8
        details.append(f"n={n}: chol {chol}, cg {rep.iterations} it, diff {agree:.1e}")
    record(7, ok, "; ".join(details))
    assert ok


def test_criterion_08_commutativity():
    m = build_cube_mesh(2)
    case = manufactured_case()
    _, E, _ = global_structure(m)
    gap = np.abs(E @ interpolate_V(m, case.psi, case.curl_psi) - interpolate_W(m, case.curl_psi)).max()
    ok = gap <= 1e-10
    record(8, ok, f"max |E I_h psi - J_h curl psi| = {gap:.1e} (<= 1e-10)")
    assert ok


def test_criterion_09_divergence_free(study):
    vals = [r.div_residual / r.div_scale for r in study.rows]
    ok = all(v <= 1e-13 for v in vals)
    record(9, ok, "scaled max |D E psi_h| = " + ", ".join(f"{v:.1e}" for v in vals) + " (<= 1e-13)")
    assert ok


def test_criterion_10_voronoi():
    ACCEPTANCE_LINES.append("criterion 10: SKIP no Voronoi mesh sequence bundled")
    pytest.skip("no Voronoi mesh sequence bundled")
