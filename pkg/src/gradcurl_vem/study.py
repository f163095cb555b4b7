"""Solving, discrete error norms, convergence studies and structural verification."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sps

from .assembly import (
    assemble,
    interpolate_V,
    interpolate_W,
    saddle_system,
    schur_system,
)
from .linsolve import cg_solve, direct_solve
from .local import DOF_POINTS, LOAD_QUAD
from .manufactured import manufactured_case

CSV_COLUMNS = ["mesh", "h", "ndof", "ndof_with_faces", "err_b", "rate_b",
               "err_a1", "rate_a1", "iters", "seconds"]


@dataclass
class SolverConfig:
    method: str = "cg"
    tol: float = 1e-12
    maxiter: int | None = None
    quad_points: int = DOF_POINTS
    load_degree: int = LOAD_QUAD
    tangent_power: int = 1
    threads: int | None = None


def build_system(mesh, case=None, cfg=None):
    cfg = cfg or SolverConfig()
    case = case or manufactured_case()
    return assemble(mesh, case.f, nu=case.nu, tangent_power=cfg.tangent_power,
                    threads=cfg.threads, load_degree=cfg.load_degree)


def solve_schur(system, cfg=None):
    """Solve the SPD Schur system; returns (psi_free, SolveReport)."""
    cfg = cfg or SolverConfig()
    S, F = schur_system(system)
    if cfg.method == "cg":
        return cg_solve(S, F, tol=cfg.tol, maxiter=cfg.maxiter)
    if cfg.method == "direct":
        return direct_solve(S, F)
    raise ValueError(f"unknown solver '{cfg.method}'")


def solve_saddle(system):
    """Solve the full saddle system; returns (psi_free, lambda_free, SolveReport)."""
    K, rhs = saddle_system(system)
    x, rep = direct_solve(K, rhs, symmetric_indefinite=True)
    nv = system.numbering.n_free_v
    return x[:nv], x[nv:], rep


def b_norm(system, x_free):
    return math.sqrt(max(float(x_free @ (system.B_VV @ x_free)), 0.0))


def multiplier_b_norm(system, lam):
    """b_h-norm of the V field G lambda."""
    return b_norm(system, system.G @ lam)


def error_norms(system, psi_h_full, case=None, points=DOF_POINTS, interp=None):
    """(||e||_h, |curl e|_{1,h}) for e = I_h psi - psi_h on full V dof vectors."""
    case = case or manufactured_case()
    if interp is None:
        interp = interpolate_V(system.mesh, case.psi, case.curl_psi, points)
    e = interp - psi_h_full
    eb = float(e @ (system.B_full @ e))
    ea = float(e @ (system.A_full @ e))
    return math.sqrt(max(eb, 0.0)), math.sqrt(max(ea, 0.0))


def ndof_with_faces(mesh):
    return 4 * mesh.n_vertices + mesh.n_edges + mesh.n_faces


@dataclass
class StudyRow:
    mesh: str
    h: float
    ndof: int
    ndof_with_faces: int
    err_b: float
    rate_b: float | None
    err_a1: float
    rate_a1: float | None
    iters: int
    seconds: float
    div_residual: float = 0.0
    div_scale: float = 1.0


@dataclass
class StudyReport:
    rows: list = field(default_factory=list)
    error: str | None = None

    def rates(self, key):
        return [getattr(r, key) for r in self.rows[1:]]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                d = asdict(r)
                w.writerow(["" if d[c] is None else d[c] for c in CSV_COLUMNS])

    def to_json(self, path):
        payload = {"rows": [{c: asdict(r)[c] for c in CSV_COLUMNS} for r in self.rows]}
        if self.error:
            payload["error"] = self.error
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)

    def write(self, path):
        if str(path).lower().endswith(".json"):
            self.to_json(path)
        else:
            self.to_csv(path)


def _rate(e0, e1, h0, h1):
    if e0 <= 0 or e1 <= 0 or h0 == h1:
        return None
    return math.log(e0 / e1) / math.log(h0 / h1)


def run_mesh(mesh, case=None, cfg=None):
    """Assemble, solve and measure one mesh; returns (StudyRow, system, psi_h_full)."""
    cfg = cfg or SolverConfig()
    case = case or manufactured_case()
    t0 = time.perf_counter()
    system = build_system(mesh, case, cfg)
    x, rep = solve_schur(system, cfg)
    psi_h = system.expand_v(x)
    eb, ea = error_norms(system, psi_h, case, cfg.quad_points)
    div = system.D_full @ (system.E_full @ psi_h)
    scale = (abs(system.D_full).sum(axis=1).max() * abs(system.E_full).sum(axis=1).max()
             * max(np.abs(psi_h).max(), 1e-300))
    row = StudyRow(mesh.name, mesh.h, system.ndof, ndof_with_faces(mesh), eb, None, ea,
                   None, rep.iterations, time.perf_counter() - t0,
                   float(np.abs(div).max()), float(scale))
    return row, system, psi_h


def run_study(meshes, case=None, cfg=None, out=None):
    """Convergence study over a mesh sequence; rates from consecutive pairs."""
    if len(meshes) < 2:
        raise ValueError("a study needs at least two meshes")
    report = StudyReport()
    try:
        for mesh in meshes:
            row, _, _ = run_mesh(mesh, case, cfg)
            if report.rows:
                prev = report.rows[-1]
                row.rate_b = _rate(prev.err_b, row.err_b, prev.h, row.h)
                row.rate_a1 = _rate(prev.err_a1, row.err_a1, prev.h, row.h)
            report.rows.append(row)
    except Exception as exc:  # keep the partial report
        report.error = f"{type(exc).__name__}: {exc}"
        if out:
            report.write(out)
        raise
    if out:
        report.write(out)
    return report


# ---------------------------------------------------------------- structure
@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool


@dataclass
class StructureReport:
    mesh: str
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, value, limit, passed=None):
        ok = value <= limit if passed is None else passed
        self.checks.append(Check(name, float(value), float(limit), bool(ok)))

    def lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} (limit {c.limit:.3e})"
                for c in self.checks]


def _maxabs(M):
    M = sps.csr_matrix(M)
    return float(np.abs(M.data).max()) if M.nnz else 0.0


def _rank(M, rtol=1e-10):
    s = np.linalg.svd(M.toarray() if sps.issparse(M) else M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int((s > rtol * s[0]).sum())


def verify_structure(mesh, case=None, cfg=None, rank_limit=4000):
    """Exactness, commutativity and divergence checks on one mesh."""
    cfg = cfg or SolverConfig()
    case = case or manufactured_case()
    system = build_system(mesh, case, cfg)
    rep = StructureReport(mesh.name)
    E, G, D = system.E, system.G, system.D
    rep.add("max|E G| (free)", _maxabs(E @ G), 1e-13 * max(_maxabs(E) * _maxabs(G), 1e-300))
    rep.add("max|D E| (free)", _maxabs(D @ E), 1e-13 * max(_maxabs(D) * _maxabs(E), 1e-300))
    rep.add("max|E G| (full)", _maxabs(system.E_full @ system.G_full),
            1e-13 * _maxabs(system.E_full) * _maxabs(system.G_full))
    rep.add("max|D E| (full)", _maxabs(system.D_full @ system.E_full),
            1e-13 * _maxabs(system.D_full) * _maxabs(system.E_full))
    nfv, nfu = system.numbering.n_free_v, system.numbering.n_free_u
    if nfv <= rank_limit:
        kdim = nfv - (_rank(E) if nfv else 0)
        rep.add(f"dim ker E - free U ({kdim} vs {nfu})", abs(kdim - nfu), 0.0)
    # commutativity: E I_h v against J_h curl v
    lhs = system.E_full @ interpolate_V(mesh, case.psi, case.curl_psi, cfg.quad_points)
    rhs = interpolate_W(mesh, case.curl_psi, cfg.quad_points)
    rep.add("commutativity max|E I_h psi - J_h curl psi|", np.abs(lhs - rhs).max(), 1e-10)
    if nfv:
        x, _ = solve_schur(system, cfg)
        psi_h = system.expand_v(x)
        div = system.D_full @ (system.E_full @ psi_h)
        scale = (abs(system.D_full).sum(axis=1).max() * abs(system.E_full).sum(axis=1).max()
                 * max(np.abs(psi_h).max(), 1e-300))
        rep.add("max|D E psi_h|", np.abs(div).max(), 1e-13 * scale)
    return rep
