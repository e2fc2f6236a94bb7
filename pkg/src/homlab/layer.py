"""Half-space boundary-layer problems on ``T^d x (0, T)``.

The lifted system for ``V(theta, t)`` is discretized in energy form.  Gradients
live on half levels ``t_{k+1/2}``:

    G = ( N^T (grad_c V_k + grad_c V_{k+1}) / 2 ,  (V_{k+1} - V_k) / h_t )

with ``grad_c`` the periodic centered difference in ``theta``, and the
coefficient ``B = M^T A(theta - t n) M`` is sampled at the half levels.  The
Dirichlet level ``V_0 = F`` is fixed; the top level carries the natural
(conormal) condition, which is the variational form of ``dV/dt = 0``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .cell import CoefficientField
from .solvers import ConvergenceError, KrylovInfo, gmres, pcg

SLOW_DECAY_KAPPA = 1e-3
POINTS_PER_UNIT_T = 25.6
T_MIN, T_MAX = 5.0, 40.0


# ---------------------------------------------------------------------------
# frames


@dataclass(frozen=True)
class TangentFrame:
    n: np.ndarray
    M: np.ndarray

    @property
    def N(self) -> np.ndarray:
        return self.M[:, :-1]

    @property
    def d(self) -> int:
        return self.n.size

    def check(self, tol: float = 1e-12) -> bool:
        d = self.d
        ok = np.allclose(self.M.T @ self.M, np.eye(d), atol=tol, rtol=0)
        ok &= np.allclose(self.N @ self.N.T + np.outer(self.n, self.n), np.eye(d), atol=tol, rtol=0)
        return bool(ok)


def tangent_frame(n) -> TangentFrame:
    """Orthogonal ``M`` with last column ``-n``; in 2D the tangent column is ``(-n2, n1)``."""
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("normal must be a unit vector")
    d = n.size
    if d == 2:
        M = np.array([[-n[1], -n[0]], [n[0], -n[1]]])
    else:
        # Householder reflection taking e_d to -n; its first d-1 columns span n-perp
        e = np.zeros(d)
        e[-1] = 1.0
        v = e + n
        if np.linalg.norm(v) < 1e-12:
            H = np.eye(d)
        else:
            H = np.eye(d) - 2.0 * np.outer(v, v) / (v @ v)
        M = H.copy()
        M[:, -1] = -n
    return TangentFrame(n, M)


# ---------------------------------------------------------------------------
# problem and solution


def default_height(kappa: Optional[float]) -> float:
    if kappa is None or kappa <= 0:
        return T_MAX
    return float(np.clip(5.0 / kappa, T_MIN, T_MAX))


@dataclass
class LayerProblem:
    """Layer problem with Dirichlet data ``F`` at ``t = 0``.

    Parameters
    ----------
    field : CoefficientField
        Coefficient ``A`` (pass the adjoint field for adjoint layers).
    normal : array_like
        Unit normal ``n``.
    data : callable or ndarray
        ``F(theta) -> (..., m)`` or node values of shape ``(m, *grid)``.
    shape : tuple
        Nodes per torus axis; an axis of size 1 means ``V`` is constant along it.
    T, n_t : float, int
        Height and number of t intervals (defaults from ``kappa``).
    """

    field: CoefficientField
    normal: np.ndarray
    data: object
    shape: tuple = (64, 64)
    T: Optional[float] = None
    n_t: Optional[int] = None
    kappa: Optional[float] = None
    rtol: float = 1e-10
    maxiter: int = 2000

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=float)
        if self.normal.size != self.field.d or len(self.shape) != self.field.d:
            raise ValueError("dimension mismatch between field, normal and grid")
        if self.T is None:
            self.T = default_height(self.kappa)
        if self.T <= 0:
            raise ValueError("height T must be positive")
        if self.n_t is None:
            self.n_t = int(math.ceil(POINTS_PER_UNIT_T * self.T))

    @property
    def frame(self) -> TangentFrame:
        return tangent_frame(self.normal)

    @property
    def h_t(self) -> float:
        return self.T / self.n_t

    @property
    def spacing(self) -> tuple:
        return tuple(1.0 / s for s in self.shape)

    def theta_nodes(self) -> np.ndarray:
        axes = [np.arange(s) / s for s in self.shape]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def boundary_values(self) -> np.ndarray:
        m = self.field.m
        if callable(self.data):
            vals = np.asarray(self.data(self.theta_nodes()), dtype=float)
            vals = np.broadcast_to(vals.reshape(tuple(self.shape) + (-1,)), tuple(self.shape) + (m,))
            return np.moveaxis(vals, -1, 0).copy()
        vals = np.asarray(self.data, dtype=float)
        return np.broadcast_to(vals.reshape((m,) + tuple(self.shape)), (m,) + tuple(self.shape)).copy()


@dataclass
class LayerSolution:
    problem: LayerProblem
    V: np.ndarray  # (m, *shape, n_t + 1) including the Dirichlet level
    V_inf: np.ndarray
    dtV0: np.ndarray  # (m, *shape)
    flux0: np.ndarray  # conormal flux at t = 0
    decay: np.ndarray
    residual: float
    info: Optional[KrylovInfo] = None
    slow_decay: bool = False

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.V.shape[-1]) * self.problem.h_t

    def decay_is_monotone(self, start: float = 1.0, slack: float = 0.05) -> bool:
        d = self.decay[self.t >= start]
        if d.size < 2:
            return True
        running = np.minimum.accumulate(d)
        return bool(np.all(d <= (1 + slack) * running + 1e-14))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "decay"])
            for t, v in zip(self.t, self.decay):
                w.writerow([f"{t:.10g}", f"{v:.17g}"])

    def trace_to_csv(self, path) -> None:
        m = self.dtV0.shape[0]
        idx = np.indices(self.dtV0.shape[1:]).reshape(self.dtV0.ndim - 1, -1).T
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"i{k + 1}" for k in range(idx.shape[1])] + [f"dtV_{a + 1}" for a in range(m)])
            vals = self.dtV0.reshape(m, -1).T
            for row, v in zip(idx, vals):
                w.writerow(list(row) + [f"{x:.17g}" for x in v])


class _LayerOperator:
    def __init__(self, problem: LayerProblem):
        self.p = problem
        f = problem.field
        self.d, self.m = f.d, f.m
        self.shape = tuple(problem.shape)
        self.nt = problem.n_t
        self.ht = problem.h_t
        frame = problem.frame
        self.M = frame.M
        self.Nmat = frame.N
        theta = problem.theta_nodes()
        t_half = (np.arange(self.nt) + 0.5) * self.ht
        if f.constant:
            a = f(np.zeros((1, self.d)))[0]
            self.B = np.einsum("ki,klab,lj->ijab", self.M, a, self.M)
            self.B = self.B.reshape(self.B.shape + (1,) * (self.d + 1))
            self.Bbar = self.B.reshape(self.B.shape[:4])
            self.symmetric = np.allclose(a, a.swapaxes(0, 1).swapaxes(2, 3))
        else:
            pts = theta[..., None, :] - t_half[:, None] * problem.normal
            a = f(np.mod(pts, 1.0))  # (*shape, nt, d, d, m, m)
            a = np.moveaxis(a, tuple(range(self.d + 1)), tuple(range(4, 5 + self.d)))
            self.B = np.einsum("ki,kl...,lj->ij...", self.M, a, self.M)
            self.symmetric = bool(np.allclose(a, a.swapaxes(0, 1).swapaxes(2, 3), rtol=0, atol=1e-14))
            # the preconditioner uses the torus mean of A
            abar = f.mean()
            self.Bbar = np.einsum("ki,klab,lj->ijab", self.M, abar, self.M)
        self._setup_preconditioner()

    # -- discrete gradient and its transpose ------------------------------
    def _grad_c(self, U):
        out = []
        for ax, n in enumerate(self.shape):
            axis = 1 + ax
            if n < 3:
                out.append(np.zeros_like(U))
            else:
                out.append((np.roll(U, -1, axis) - np.roll(U, 1, axis)) * (0.5 * n))
        return np.stack(out)

    def _div_c(self, Y):
        # Y: (d, m, *shape, ...); returns sum_k d_k Y_k
        total = np.zeros(Y.shape[1:])
        for ax, n in enumerate(self.shape):
            if n >= 3:
                axis = 1 + ax
                total += (np.roll(Y[ax], -1, axis) - np.roll(Y[ax], 1, axis)) * (0.5 * n)
        return total

    def gradient(self, U):
        """Half-level gradient ``(d, m, *shape, nt)`` of the full level array ``U``."""
        Gc = self._grad_c(U)
        mid = 0.5 * (Gc[..., :-1] + Gc[..., 1:])
        tan = np.einsum("ka,k...->a...", self.Nmat, mid)
        dt = (U[..., 1:] - U[..., :-1]) / self.ht
        return np.concatenate([tan, dt[None]], axis=0)

    def flux(self, G):
        d, m = self.d, self.m
        Q = np.zeros(G.shape)
        for i in range(d):
            for j in range(d):
                if m == 1:
                    Q[i, 0] += self.B[i, j, 0, 0] * G[j, 0]
                else:
                    Q[i] += np.einsum("ab...,b...->a...", self.B[i, j], G[j])
        return Q

    def residual_rows(self, U):
        """Energy gradient on every level ``0..nt`` (scaled by ``h_t``)."""
        Q = self.flux(self.gradient(U))
        qt = Q[-1]
        Y = np.einsum("ka,a...->k...", self.Nmat, Q[:-1])
        divY = self._div_c(Y)
        R = np.zeros(U.shape)
        R[..., 1:] += qt
        R[..., :-1] -= qt
        R[..., 1:] -= 0.5 * self.ht * divY
        R[..., :-1] -= 0.5 * self.ht * divY
        return R

    def apply(self, x):
        U = np.concatenate([np.zeros(x.shape[:-1] + (1,)), x], axis=-1)
        return self.residual_rows(U)[..., 1:]

    # -- constant-coefficient preconditioner --------------------------------
    def _setup_preconditioner(self):
        d, m, nt, ht = self.d, self.m, self.nt, self.ht
        s = []
        for n in self.shape:
            k = np.fft.fftfreq(n, d=1.0 / n)
            s.append(np.sin(2 * np.pi * k / n) * n if n >= 3 else np.zeros(n))
        S = np.stack(np.meshgrid(*s, indexing="ij"), axis=-1)  # (*shape, d)
        sigma = S @ self.Nmat  # (*shape, d-1)
        nmodes = int(np.prod(self.shape))
        sigma = sigma.reshape(nmodes, d - 1)
        # P maps (V_k, V_{k+1}) to the half-level gradient; blocks of size m
        P = np.zeros((nmodes, d, 2), dtype=complex)
        P[:, :-1, 0] = 0.5j * sigma
        P[:, :-1, 1] = 0.5j * sigma
        P[:, -1, 0] = -1.0 / ht
        P[:, -1, 1] = 1.0 / ht
        # E[q, r, a, b] = ht * sum_ij conj(P[i, q]) Bbar[i, j, a, b] P[j, r]
        E = ht * np.einsum("niq,ijab,njr->nqarb", np.conj(P), self.Bbar, P)
        E = E.reshape(nmodes, 2 * m, 2 * m)
        E00, E01 = E[:, :m, :m], E[:, :m, m:]
        E10, E11 = E[:, m:, :m], E[:, m:, m:]
        inv = np.empty((nmodes, nt, m, m), dtype=complex)
        G = np.empty((nmodes, nt, m, m), dtype=complex)
        Dprev_G = None
        for k in range(nt):
            Dk = E11 + E00 if k < nt - 1 else E11.copy()
            if k > 0:
                Dk = Dk - E10 @ Dprev_G
            ik = 1.0 / Dk if m == 1 else np.linalg.inv(Dk)
            inv[:, k] = ik
            G[:, k] = ik @ E01
            Dprev_G = G[:, k]
        self._pc = (inv, G, E10)

    def precondition(self, r):
        inv, G, E10 = self._pc
        m, nt = self.m, self.nt
        axes = tuple(range(1, 1 + self.d))
        rh = np.fft.fftn(r, axes=axes)
        rh = np.moveaxis(rh.reshape(m, -1, nt), 0, -1)  # (modes, nt, m)
        y = np.empty_like(rh)
        if m == 1:
            inv1, G1, E1 = inv[..., 0, 0], G[..., 0, 0], E10[:, 0, 0]
            r1, y1 = rh[..., 0], y[..., 0]
            y1[:, 0] = inv1[:, 0] * r1[:, 0]
            for k in range(1, nt):
                y1[:, k] = inv1[:, k] * (r1[:, k] - E1 * y1[:, k - 1])
            for k in range(nt - 2, -1, -1):
                y1[:, k] -= G1[:, k] * y1[:, k + 1]
        else:
            prev = None
            for k in range(nt):
                rk = rh[:, k]
                if prev is not None:
                    rk = rk - np.einsum("nab,nb->na", E10, prev)
                y[:, k] = np.einsum("nab,nb->na", inv[:, k], rk)
                prev = y[:, k]
            for k in range(nt - 2, -1, -1):
                y[:, k] -= np.einsum("nab,nb->na", G[:, k], y[:, k + 1])
        z = np.moveaxis(y, -1, 0).reshape((m,) + self.shape + (nt,))
        return np.fft.ifftn(z, axes=axes).real


def solve_layer(problem: LayerProblem, x0=None) -> LayerSolution:
    op = _LayerOperator(problem)
    F = problem.boundary_values()
    m, nt = problem.field.m, problem.n_t
    U0 = np.concatenate([F[..., None], np.zeros(F.shape + (nt,))], axis=-1)
    b = -op.residual_rows(U0)[..., 1:]
    solver = pcg if op.symmetric else gmres
    if np.linalg.norm(b) == 0.0:
        x, info = np.zeros_like(b), KrylovInfo(0, 0.0, [0.0], "pcg")
    else:
        x, info = solver(op.apply, b, op.precondition, rtol=problem.rtol, maxiter=problem.maxiter)
    U = np.concatenate([F[..., None], x], axis=-1)
    R = op.residual_rows(U)
    res = float(np.linalg.norm(R[..., 1:]) / max(np.linalg.norm(b), 1e-300))
    # variational flux recovery at t = 0
    flux0 = -R[..., 0]
    B0 = _boundary_B(problem, op)
    tan0 = np.einsum("ka,k...->a...", op.Nmat, op._grad_c(F))  # (d-1, m, *shape)
    d = problem.field.d
    Btt = B0[d - 1, d - 1]  # (m, m, *shape)
    rhs = flux0 - np.einsum("iab...,ib...->a...", B0[d - 1, :d - 1], tan0)
    dtV0 = _solve_small(Btt, rhs)
    axes = tuple(range(1, 1 + d))
    V_inf = U[..., -1].mean(axis=axes)
    dev = U - V_inf.reshape((m,) + (1,) * (d + 1))
    decay = np.sqrt(np.mean(np.sum(dev ** 2, axis=0), axis=tuple(range(d))))
    slow = problem.kappa is not None and problem.kappa < SLOW_DECAY_KAPPA
    return LayerSolution(problem, U, V_inf, dtV0, flux0, decay, res, info, bool(slow))


def _boundary_B(problem: LayerProblem, op: _LayerOperator) -> np.ndarray:
    f = problem.field
    M = op.M
    if f.constant:
        return op.B[..., 0]
    a = f(problem.theta_nodes())
    a = np.moveaxis(a, tuple(range(f.d)), tuple(range(4, 4 + f.d)))
    return np.einsum("ki,kl...,lj->ij...", M, a, M)


def _solve_small(Bmat, rhs):
    """Solve ``Bmat[a, b, ...] x[b, ...] = rhs[a, ...]`` pointwise."""
    m = Bmat.shape[0]
    if m == 1:
        return rhs / Bmat[0, 0]
    Bm = np.moveaxis(Bmat, (0, 1), (-2, -1))
    r = np.moveaxis(rhs, 0, -1)[..., None]
    x = np.linalg.solve(np.broadcast_to(Bm, r.shape[:-2] + (m, m)), r)[..., 0]
    return np.moveaxis(x, -1, 0)


def validate_height(problem: LayerProblem) -> dict:
    """Re-solve with doubled height; report the change of ``V_inf`` against the tail norm."""
    base = solve_layer(problem)
    doubled = LayerProblem(problem.field, problem.normal, problem.data, problem.shape,
                           2 * problem.T, 2 * problem.n_t, problem.kappa, problem.rtol, problem.maxiter)
    other = solve_layer(doubled)
    change = float(np.max(np.abs(other.V_inf - base.V_inf)))
    return {"V_inf": base.V_inf, "V_inf_doubled": other.V_inf, "change": change,
            "tail": float(base.decay[-1]), "ok": change <= max(base.decay[-1], 1e-12)}


# ---------------------------------------------------------------------------
# extension across t = 0


@dataclass(frozen=True)
class ExtensionWeights:
    k: int
    weights: tuple

    def check(self) -> bool:
        return all(sum(Fraction(-j) ** i * w for j, w in enumerate(self.weights, start=1)) == 1
                   for i in range(self.k + 1))

    def as_floats(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])


def extension_weights(k: int) -> ExtensionWeights:
    """Exact solution of ``sum_j (-j)^i lambda_j = 1`` for ``i = 0..k``."""
    if k < 0:
        raise ValueError("order must be nonnegative")
    n = k + 1
    A = [[Fraction(-j) ** i for j in range(1, n + 1)] + [Fraction(1)] for i in range(n)]
    for c in range(n):
        piv = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c] / A[c][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return ExtensionWeights(k, tuple(A[i][n] / A[i][i] for i in range(n)))


@dataclass
class ExtendedLayer:
    """``V`` on levels ``-K..n_t`` (``K`` reflected levels below ``t = 0``)."""

    solution: LayerSolution
    weights: ExtensionWeights
    values: np.ndarray  # (m, *shape, K + n_t + 1)
    n_below: int

    @property
    def h_t(self) -> float:
        return self.solution.problem.h_t

    @property
    def t(self) -> np.ndarray:
        return (np.arange(self.values.shape[-1]) - self.n_below) * self.h_t

    def sample(self, theta, t) -> np.ndarray:
        """Periodic multilinear interpolation at ``theta (..., d)`` and heights ``t (...)``; returns ``(..., m)``."""
        theta = np.asarray(theta, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = self.values.shape[1:-1]
        d = len(shape)
        tpos = t / self.h_t + self.n_below
        if np.any(tpos < -1e-9) or np.any(tpos > self.values.shape[-1] - 1 + 1e-9):
            raise ValueError("query lies outside the extended slab")
        tpos = np.clip(tpos, 0, self.values.shape[-1] - 1)
        k0 = np.minimum(np.floor(tpos).astype(int), self.values.shape[-1] - 2)
        wt = tpos - k0
        idx, wts = [], []
        for ax, n in enumerate(shape):
            x = np.mod(theta[..., ax], 1.0) * n
            i0 = np.floor(x).astype(int) % n
            idx.append((i0, (i0 + 1) % n))
            wts.append(x - np.floor(x))
        out = 0.0
        for corner in range(2 ** d):
            w = np.ones_like(wt)
            ind = []
            for ax in range(d):
                bit = (corner >> ax) & 1
                ind.append(idx[ax][bit])
                w = w * (wts[ax] if bit else 1 - wts[ax])
            lo = self.values[(slice(None),) + tuple(ind) + (k0,)]
            hi = self.values[(slice(None),) + tuple(ind) + (k0 + 1,)]
            out = out + w * ((1 - wt) * lo + wt * hi)
        return np.moveaxis(out, 0, -1)


def extend_solution(solution: LayerSolution, weights: Optional[ExtensionWeights] = None,
                    depth: Optional[float] = None) -> ExtendedLayer:
    """``V(theta, -tau) = sum_j lambda_j V(theta, j tau)`` on grid levels below zero."""
    weights = extension_weights(2) if weights is None else weights
    p = solution.problem
    K1 = len(weights.weights)
    depth = p.T / K1 if depth is None else depth
    n_below = int(math.floor(depth / p.h_t + 1e-9))
    if K1 * n_below > p.n_t:
        raise ValueError("reflection depth exceeds the solved slab")
    lam = weights.as_floats()
    V = solution.V
    below = np.zeros(V.shape[:-1] + (n_below,))
    for kk in range(1, n_below + 1):
        below[..., n_below - kk] = sum(l * V[..., j * kk] for j, l in enumerate(lam, start=1))
    return ExtendedLayer(solution, weights, np.concatenate([below, V], axis=-1), n_below)


def extend_polynomial_check(coeffs: Sequence[float], k: int, ts: Sequence[float]) -> float:
    """Max deviation of the reflected polynomial from the polynomial itself at negative ``ts``."""
    lam = extension_weights(k).as_floats()
    poly = np.polynomial.Polynomial(coeffs)
    ts = np.asarray(ts, dtype=float)
    ext = sum(l * poly(-j * ts) for j, l in enumerate(lam, start=1))
    return float(np.max(np.abs(ext - poly(ts))))


@dataclass
class PhysicalLayer:
    """``x -> amplitude * V((x - ((x - x0).n0) n0)/eps, -((x - x0).n0)/eps)``."""

    extended: ExtendedLayer
    x0: np.ndarray
    normal: np.ndarray
    eps: float
    amplitude: float

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        depth = (x - self.x0) @ self.normal
        theta = (x - depth[..., None] * self.normal) / self.eps
        t = -depth / self.eps
        return self.amplitude * self.extended.sample(theta, t)


def physical_layer(extended: ExtendedLayer, x0, eps: float, amplitude: Optional[float] = None) -> PhysicalLayer:
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = extended.solution.problem.normal
    return PhysicalLayer(extended, np.asarray(x0, dtype=float), n, eps,
                         eps if amplitude is None else amplitude)


__all__ = [
    "TangentFrame", "LayerProblem", "LayerSolution", "ExtensionWeights", "ExtendedLayer",
    "PhysicalLayer", "tangent_frame", "solve_layer", "extension_weights", "extend_solution",
    "physical_layer", "default_height", "validate_height", "extend_polynomial_check",
]
