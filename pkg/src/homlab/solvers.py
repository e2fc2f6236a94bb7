"""Krylov iterations shared by the periodic-cell and half-space solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse.linalg as spla


class ConvergenceError(RuntimeError):
    """Raised when an iteration stalls before reaching its tolerance.

    The residual history is attached so callers can report it.
    """

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


@dataclass
class KrylovInfo:
    iterations: int
    residual: float
    history: list[float] = field(default_factory=list)
    method: str = "pcg"


def pcg(
    apply_A: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    apply_M: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    rtol: float = 1e-10,
    maxiter: int = 1000,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    x0: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, KrylovInfo]:
    """Preconditioned conjugate gradients on arrays of any shape.

    ``project`` is applied to the iterate and residual after every step; it
    removes a known null space (constants on the torus).  The stopping test is
    ``|b - A x| <= rtol |b|``.
    """
    if project is None:
        def project(v):
            return v
    if apply_M is None:
        def apply_M(v):
            return v

    b = project(np.asarray(b, dtype=float))
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else project(np.array(x0, dtype=float))
    if bnorm == 0.0:
        return np.zeros_like(b), KrylovInfo(0, 0.0, [0.0])

    r = project(b - apply_A(x))
    z = project(apply_M(r))
    p = z.copy()
    rz = np.vdot(r, z).real
    history = [np.linalg.norm(r) / bnorm]
    for it in range(1, maxiter + 1):
        if history[-1] <= rtol:
            return x, KrylovInfo(it - 1, history[-1], history)
        Ap = apply_A(p)
        pAp = np.vdot(p, Ap).real
        if pAp <= 0.0:
            raise ConvergenceError("operator is not positive definite on the search space", history)
        alpha = rz / pAp
        x = project(x + alpha * p)
        r = project(r - alpha * Ap)
        history.append(np.linalg.norm(r) / bnorm)
        z = project(apply_M(r))
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
    if history[-1] <= rtol:
        return x, KrylovInfo(maxiter, history[-1], history)
    raise ConvergenceError(
        f"pcg stalled at relative residual {history[-1]:.3e} after {maxiter} iterations", history
    )


def gmres(
    apply_A: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    apply_M: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    rtol: float = 1e-10,
    maxiter: int = 1000,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    restart: int = 60,
) -> tuple[np.ndarray, KrylovInfo]:
    """Right-preconditioned restarted GMRES for nonsymmetric operators."""
    shape = np.shape(b)
    n = int(np.prod(shape))
    if project is None:
        def project(v):
            return v
    b = project(np.asarray(b, dtype=float))
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(shape), KrylovInfo(0, 0.0, [0.0], "gmres")

    A = spla.LinearOperator((n, n), matvec=lambda v: project(apply_A(v.reshape(shape))).ravel())
    M = None
    if apply_M is not None:
        M = spla.LinearOperator((n, n), matvec=lambda v: project(apply_M(v.reshape(shape))).ravel())
    history: list[float] = []
    x, code = spla.gmres(
        A, b.ravel(), M=M, rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter,
        callback=lambda res: history.append(float(res)), callback_type="pr_norm",
    )
    x = project(x.reshape(shape))
    res = np.linalg.norm(b - project(apply_A(x))) / bnorm
    history.append(res)
    if code != 0 and res > rtol * 10:
        raise ConvergenceError(f"gmres stalled at relative residual {res:.3e}", history)
    return x, KrylovInfo(len(history), res, history, "gmres")
