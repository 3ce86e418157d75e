"""Preconditioned conjugate gradients and a dense Cholesky oracle."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .system import SparseSystem

__all__ = ["SolveReport", "ConvergenceError", "cg_solve", "dense_solve", "default_max_iter"]

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, report: "SolveReport"):
        super().__init__(message)
        self.report = report


@dataclass
class SolveReport:
    iterations: int
    residual: float
    seconds: float
    converged: bool = True
    history: list[float] = field(default_factory=list, repr=False)
    # value of 0.5 x^T A x - b^T x per iteration; CG makes it non-increasing
    energy: list[float] = field(default_factory=list, repr=False)


def default_max_iter(n: int) -> int:
    return int(20 * math.sqrt(max(n, 1)) + 200)


def _operator(system_or_matrix):
    if isinstance(system_or_matrix, SparseSystem):
        return system_or_matrix.A, system_or_matrix.rhs
    raise TypeError("expected a SparseSystem")


def cg_solve(A, b=None, tol: float = 1e-12, max_iter: int | None = None, precond: str | None = "jacobi",
             x0: np.ndarray | None = None, raise_on_failure: bool = True) -> tuple[np.ndarray, SolveReport]:
    """Solve ``A x = b`` for SPD ``A`` to ``||b - A x|| <= tol ||b||``.

    ``A`` may be a :class:`SparseSystem` (then ``b`` is taken from it), a
    scipy sparse matrix or a dense array.
    """
    if isinstance(A, SparseSystem):
        A, b = _operator(A)
    if b is None:
        raise ValueError("right-hand side missing")
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    b = np.asarray(b, dtype=float)
    n = b.size
    max_iter = default_max_iter(n) if max_iter is None else max_iter
    start = time.perf_counter()

    bnorm = float(np.linalg.norm(b))
    if n == 0 or bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, time.perf_counter() - start)

    if precond in (None, "none"):
        inv_diag = None
    elif precond == "jacobi":
        diag = A.diagonal() if hasattr(A, "diagonal") else np.diag(A)
        if np.any(diag <= 0):
            raise ValueError("matrix has a non-positive diagonal entry; not SPD")
        inv_diag = 1.0 / diag
    else:
        raise ValueError(f"unknown preconditioner {precond!r}")

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = r if inv_diag is None else inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    history = [float(np.linalg.norm(r)) / bnorm]
    energy = [float(0.5 * x @ (A @ x) - b @ x)]
    it = 0
    while history[-1] > tol and it < max_iter:
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise ValueError(f"non-positive curvature p^T A p = {pAp:.3e} at iteration {it}; matrix not SPD")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = r if inv_diag is None else inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        history.append(float(np.linalg.norm(r)) / bnorm)
        # 0.5 x^T A x - b^T x = -0.5 (b + r)^T x
        energy.append(float(-0.5 * (b + r) @ x))

    true_res = float(np.linalg.norm(b - A @ x)) / bnorm
    report = SolveReport(it, true_res, time.perf_counter() - start, history[-1] <= tol, history, energy)
    log.debug("cg: %d iterations, residual %.3e", it, true_res)
    if not report.converged and raise_on_failure:
        tail = ", ".join(f"{v:.2e}" for v in history[-5:])
        raise ConvergenceError(
            f"CG did not reach tol={tol:g} in {max_iter} iterations (residual history tail: {tail})", report
        )
    return x, report


def dense_solve(A, b=None) -> np.ndarray:
    """Cholesky solve; a failed factorisation means the matrix is not SPD."""
    if isinstance(A, SparseSystem):
        A, b = _operator(A)
    if hasattr(A, "toarray"):
        A = A.toarray()
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.size == 0:
        return np.zeros(0)
    if b.size > 5000:
        raise ValueError(f"dense_solve is an oracle for small systems (N <= 5000), got N={b.size}")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"Cholesky failed, matrix is not SPD: {exc}") from None
    return scipy.linalg.cho_solve(factor, b)
