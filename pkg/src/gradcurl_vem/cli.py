"""Command-line interface: ``gradcurl-vem {run,study,verify,meshinfo}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .assembly import dump_matrix, schur_system
from .linsolve import NonConvergenceError, SingularMatrixError
from .local import DOF_POINTS, NumericalDegeneracyError
from .mesh import MeshParseError, MeshValidationError, check_regularity, load_mesh
from .study import SolverConfig, StudyReport, run_mesh, run_study, verify_structure
from .vtk import curl_cell_means, write_vtu

log = logging.getLogger("gradcurl_vem")


class UsageError(Exception):
    pass


def _add_solver_args(p):
    p.add_argument("--solver", choices=["cg", "direct"], default="cg")
    p.add_argument("--tol", type=float, default=1e-12, help="relative residual (CG)")
    p.add_argument("--maxiter", type=int, default=None, help="CG iterations (default 10*ndof)")
    p.add_argument("--quad", type=int, default=DOF_POINTS,
                   help="Gauss points per direction for DOF evaluation (default %(default)s)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for local matrices (env GRADCURL_THREADS)")
    p.add_argument("--stab-edge-power", type=int, default=1, choices=[1, 2],
                   help="h_f exponent of the edge tangential term in S2")


def build_parser():
    parser = argparse.ArgumentParser(prog="gradcurl-vem",
                                     description="Lowest-order grad-curl virtual element solver")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve on one mesh and report errors")
    p.add_argument("--mesh", required=True, help="mesh file or builtin:cube:<n>")
    p.add_argument("--out", help="CSV or JSON output path")
    p.add_argument("--dump-matrix", help="write the Schur matrix as 'row col value' text")
    p.add_argument("--vtk", help="write cell means of curl psi_h to a .vtu file")
    _add_solver_args(p)

    p = sub.add_parser("study", help="convergence study over a mesh sequence")
    p.add_argument("--meshes", required=True, help="comma-separated mesh specs")
    p.add_argument("--out", help="CSV or JSON output path")
    _add_solver_args(p)

    p = sub.add_parser("verify", help="structural checks on one mesh")
    p.add_argument("--mesh", required=True)
    _add_solver_args(p)

    p = sub.add_parser("meshinfo", help="mesh counts and regularity metrics")
    p.add_argument("--mesh", required=True)
    p.add_argument("--mu", type=float, default=0.2)
    return parser


def _config(args):
    if args.tol <= 0:
        raise UsageError("--tol must be positive")
    if args.maxiter is not None and args.maxiter < 1:
        raise UsageError("--maxiter must be positive")
    if args.quad < 1:
        raise UsageError("--quad must be positive")
    threads = args.threads
    if threads is None and os.environ.get("GRADCURL_THREADS"):
        threads = int(os.environ["GRADCURL_THREADS"])
    return SolverConfig(method=args.solver, tol=args.tol, maxiter=args.maxiter,
                        quad_points=args.quad, tangent_power=args.stab_edge_power,
                        threads=threads)


def _load(spec):
    try:
        return load_mesh(spec)
    except FileNotFoundError as exc:
        raise UsageError(f"mesh not found: {spec}") from exc
    except (MeshParseError, MeshValidationError) as exc:
        raise UsageError(f"bad mesh {spec}: {exc}") from exc


def _print_rows(rows):
    print(f"{'mesh':>10} {'h':>9} {'ndof':>7} {'err_b':>12} {'rate':>6} {'err_a1':>12} {'rate':>6} {'iters':>6}")
    for r in rows:
        rb = "" if r.rate_b is None else f"{r.rate_b:.4f}"
        ra = "" if r.rate_a1 is None else f"{r.rate_a1:.4f}"
        print(f"{r.mesh:>10} {r.h:9.6f} {r.ndof:7d} {r.err_b:12.6e} {rb:>6} {r.err_a1:12.6e} {ra:>6} {r.iters:6d}")


def cmd_run(args):
    cfg = _config(args)
    mesh = _load(args.mesh)
    row, system, psi_h = run_mesh(mesh, cfg=cfg)
    report = StudyReport([row])
    _print_rows(report.rows)
    if args.out:
        report.write(args.out)
    if args.dump_matrix:
        S, _ = schur_system(system)
        dump_matrix(S, args.dump_matrix)
    if args.vtk:
        write_vtu(mesh, args.vtk, {"curl_psi_h": curl_cell_means(system, psi_h)})
    return 0


def cmd_study(args):
    cfg = _config(args)
    specs = [s.strip() for s in args.meshes.split(",") if s.strip()]
    if len(specs) < 2:
        raise UsageError("--meshes needs at least two entries")
    meshes = [_load(s) for s in specs]
    report = run_study(meshes, cfg=cfg, out=args.out)
    _print_rows(report.rows)
    return 0


def cmd_verify(args):
    cfg = _config(args)
    mesh = _load(args.mesh)
    rep = verify_structure(mesh, cfg=cfg)
    for line in rep.lines():
        print(line)
    return 0 if rep.passed else 1


def cmd_meshinfo(args):
    mesh = _load(args.mesh)
    reg = check_regularity(mesh, args.mu)
    info = mesh.summary()
    info.update({
        "regularity_mu": args.mu,
        "regularity_pass": reg.passed,
        "min_edge_ratio": float(reg.min_edge_ratio.min()),
        "min_face_inradius_ratio": float(reg.min_face_inradius_ratio.min()),
        "min_kernel_ball_ratio": float(reg.kernel_ball_ratio.min()),
        "short_edges": reg.short_edges[:20],
        "thin_faces": reg.thin_faces[:20],
        "thin_cells": reg.thin_cells[:20],
    })
    print(json.dumps(info, indent=2))
    return 0


COMMANDS = {"run": cmd_run, "study": cmd_study, "verify": cmd_verify, "meshinfo": cmd_meshinfo}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NonConvergenceError, SingularMatrixError, NumericalDegeneracyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
