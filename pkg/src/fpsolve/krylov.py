"""Preconditioned Krylov solves for the nonsymmetric scheme matrices.

The iteration itself is scipy's BiCGSTAB (GMRES as fallback); this module adds
Jacobi preconditioning, a check of the true residual ``||b - A x|| / ||b||``
and a small report of what happened.
"""

from __future__ import annotations

from dataclasses import dataclass

import warnings

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, ConvergenceError, SingularMatrixError

__all__ = ["SolveReport", "solve", "dense_inverse", "DENSE_LIMIT"]

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class SolveReport:
    converged: bool
    iterations: int
    residual: float
    method: str


def _relative_residual(A, x, b, bnorm):
    r = b - A @ x
    return float(np.linalg.norm(r) / bnorm)


def solve(A, b, x0=None, tol=1e-12, max_iter=None, method="bicgstab", precondition=True):
    """Solve ``A x = b``.

    Parameters
    ----------
    A : sparse matrix, shape (n, n)
    b : ndarray, shape (n,)
    x0 : ndarray, optional
        Initial guess; the previous time level is a good one.
    tol : float
        Target for the true relative residual.
    max_iter : int, optional
        Defaults to ``10 n``.
    method : {"bicgstab", "gmres", "direct"}
    precondition : bool
        Jacobi (diagonal) preconditioning for the Krylov methods.

    Returns
    -------
    x : ndarray
    report : SolveReport

    Raises
    ------
    ConvergenceError
        If the relative residual stays above ``tol``.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ConfigurationError("dimension mismatch between matrix and right-hand side")
    max_iter = 10 * n if max_iter is None else int(max_iter)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(True, 0, 0.0, method)

    if method == "direct":
        x = spla.spsolve(A.tocsc(), b)
        res = _relative_residual(A, x, b, bnorm)
        report = SolveReport(bool(res <= tol), 1, res, "direct")
        if not report.converged:
            raise ConvergenceError(f"direct solve residual {res:.3e} > {tol:.1e}", report)
        return x, report

    P = None
    if precondition:
        diag = A.diagonal()
        if np.any(diag == 0):
            raise SingularMatrixError("zero on the diagonal; Jacobi preconditioner undefined")
        P = spla.LinearOperator((n, n), matvec=lambda r: r / diag, dtype=float)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()

    counter = [0]

    def count(_):
        counter[0] += 1

    # the Krylov tolerance is on the preconditioned recurrence; aim a little
    # lower and confirm with the true residual afterwards
    inner = tol * 0.1
    tried = ["bicgstab", "gmres"] if method == "bicgstab" else [method]
    res = np.inf
    for name in tried:
        if name == "bicgstab":
            x, _ = spla.bicgstab(A, b, x0=x, rtol=inner, atol=0.0, maxiter=max_iter, M=P, callback=count)
        elif name == "gmres":
            x, _ = spla.gmres(
                A, b, x0=x, rtol=inner, atol=0.0, restart=min(n, 50), maxiter=max_iter, M=P,
                callback=count, callback_type="pr_norm",
            )
        else:
            raise ConfigurationError(f"unknown method {method!r}")
        res = _relative_residual(A, x, b, bnorm)
        if res <= tol:
            return x, SolveReport(True, counter[0], res, name)
        if not np.all(np.isfinite(x)):
            x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    report = SolveReport(False, counter[0], res, tried[-1])
    raise ConvergenceError(f"Krylov solve stopped at relative residual {res:.3e} > {tol:.1e}", report)


def dense_inverse(A, limit=DENSE_LIMIT):
    """Dense inverse of a small matrix, for diagnostics only."""
    n = A.shape[0]
    if n > limit:
        raise ConfigurationError(f"dense inverse refused for n={n} > {limit}")
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu, piv = la.lu_factor(dense, check_finite=True)
    except (la.LinAlgError, ValueError) as exc:
        raise SingularMatrixError(str(exc)) from exc
    if np.any(np.abs(np.diag(lu)) <= np.finfo(float).eps * np.abs(dense).max() * n):
        raise SingularMatrixError("matrix is numerically singular")
    return la.lu_solve((lu, piv), np.eye(n))
