"""Conjugate gradient for the symmetric positive definite pressure systems."""

from __future__ import annotations

import numpy as np


class SolverFailure(RuntimeError):
    """CG did not reach the requested residual within the iteration cap."""

    def __init__(self, iterations: int, rel_residual: float):
        self.iterations = iterations
        self.rel_residual = rel_residual
        super().__init__(
            f"CG stalled after {iterations} iterations, relative residual "
            f"{rel_residual:.3e}")


def cg(matvec, b: np.ndarray, *, precond=None, x0: np.ndarray | None = None,
       rtol: float = 1e-8, maxiter: int | None = None) -> np.ndarray:
    """Preconditioned conjugate gradient on a flat SPD system.

    matvec maps a flat vector to A @ v; precond applies an approximate
    inverse (Jacobi by default when None). Convergence is measured as
    ||b - A x|| / ||b||.
    """
    b = np.asarray(b, dtype=float).ravel()
    n = b.size
    if maxiter is None:
        maxiter = 20 * n
    if precond is None:
        precond = lambda r: r

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).ravel()
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(n)

    r = b - matvec(x)
    z = precond(r)
    p = z.copy()
    rz = float(r @ z)
    for it in range(maxiter):
        if np.linalg.norm(r) <= rtol * b_norm:
            return x
        Ap = matvec(p)
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = precond(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    rel = float(np.linalg.norm(b - matvec(x))) / b_norm
    if rel <= rtol:
        return x
    raise SolverFailure(maxiter, rel)
