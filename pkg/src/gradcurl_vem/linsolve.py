"""Sparse symmetric solvers: Jacobi-preconditioned CG and direct factorization."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla


@dataclass
class SolveReport:
    method: str
    iterations: int = 0
    residual: float = 0.0
    seconds: float = 0.0
    history: list = field(default_factory=list, repr=False)


class NonConvergenceError(RuntimeError):
    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


class SingularMatrixError(RuntimeError):
    pass


def cg_solve(S, F, tol=1e-12, maxiter=None, x0=None, precond="jacobi", callback=None):
    """Preconditioned CG; stops when ||F - S x|| <= tol * ||F||.

    ``report.history`` holds the preconditioned residual norm sqrt(r.z) per step.
    ``callback(x)`` is called after every iteration.
    """
    t0 = time.perf_counter()
    S = sps.csr_matrix(S)
    F = np.asarray(F, dtype=float)
    n = len(F)
    if maxiter is None:
        maxiter = 10 * max(n, 1)
    if precond == "jacobi":
        d = S.diagonal()
        if np.any(d <= 0):
            raise ValueError("Jacobi preconditioner needs a positive diagonal")
        minv = 1.0 / d
    elif precond is None or precond == "none":
        minv = np.ones(n)
    else:
        raise ValueError(f"unknown preconditioner '{precond}'")
    rep = SolveReport("cg")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(F)
    if bnorm == 0.0:
        rep.seconds = time.perf_counter() - t0
        return np.zeros(n), rep
    r = F - S @ x
    z = minv * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    rep.history.append(np.sqrt(max(rz, 0.0)))
    it = 0
    while res > tol and it < maxiter:
        q = S @ p
        pq = p @ q
        if pq <= 0:
            raise NonConvergenceError("matrix is not positive definite", rep)
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        it += 1
        if it % 50 == 0:
            r = F - S @ x
        res = np.linalg.norm(r) / bnorm
        z = minv * r
        rz_new = r @ z
        rep.history.append(np.sqrt(max(rz_new, 0.0)))
        if callback is not None:
            callback(x)
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(F - S @ x) / bnorm
    rep.iterations, rep.residual = it, res
    rep.seconds = time.perf_counter() - t0
    if res > tol:
        raise NonConvergenceError(
            f"CG did not reach tol {tol:.1e} in {maxiter} iterations (residual {res:.2e})", rep)
    return x, rep


def direct_solve(M, rhs, symmetric_indefinite=False):
    """Sparse LU solve; returns (x, report). Raises SingularMatrixError on failure."""
    t0 = time.perf_counter()
    M = sps.csc_matrix(M)
    rhs = np.asarray(rhs, dtype=float)
    if M.shape[0] != M.shape[1] or M.shape[0] != len(rhs):
        raise ValueError("matrix must be square and match the right-hand side")
    try:
        lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A" if symmetric_indefinite else "COLAMD")
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from exc
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("factorization produced non-finite values")
    bn = np.linalg.norm(rhs)
    res = np.linalg.norm(M @ x - rhs) / (bn if bn > 0 else 1.0)
    if res > 1e-10:
        raise SingularMatrixError(f"direct solve residual {res:.2e} exceeds 1e-10")
    return x, SolveReport("direct-indefinite" if symmetric_indefinite else "direct", 1, res,
                          time.perf_counter() - t0)


def cholesky_ok(S):
    """True when a dense Cholesky factorization of S succeeds (SPD witness)."""
    try:
        np.linalg.cholesky(S.toarray() if sps.issparse(S) else np.asarray(S))
        return True
    except np.linalg.LinAlgError:
        return False
