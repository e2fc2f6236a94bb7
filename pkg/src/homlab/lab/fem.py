"""Conforming P1 finite elements for scalar Dirichlet problems ``-div(A grad u) = 0``."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from matplotlib.tri import LinearTriInterpolator, Triangulation
from scipy.spatial import cKDTree

from ..cell import CoefficientField, HomogenizedTensor
from ..solvers import ConvergenceError
from .mesh import MeshedDomain

# degree-5 seven-point rule on the reference triangle (barycentric points, weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
QUAD_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
QUAD_W = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)

MAX_PRINCIPLE_SLACK = 1.05


class UnderResolvedError(ValueError):
    pass


@dataclass
class SolveResult:
    u: np.ndarray
    mesh: MeshedDomain
    residual: float
    iterations: int
    data_max: float
    timings: dict = field(default_factory=dict)

    @property
    def linf(self) -> float:
        return float(np.max(np.abs(self.u)))

    @property
    def l2(self) -> float:
        return float(np.sqrt(self.u @ (mass_matrix(self.mesh) @ self.u)))

    def max_principle_ok(self, slack: float = MAX_PRINCIPLE_SLACK) -> bool:
        return self.linf <= slack * self.data_max + 1e-12

    def with_values(self, u: np.ndarray) -> "SolveResult":
        return SolveResult(np.asarray(u, dtype=float), self.mesh, 0.0, 0, float(np.max(np.abs(u))))


def gradients(mesh: MeshedDomain):
    """Barycentric gradients ``(n_tri, 3, 2)`` and element areas."""
    p = mesh.points[mesh.triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    inv = np.empty((p.shape[0], 2, 2))
    inv[:, 0, 0], inv[:, 0, 1] = e2[:, 1] / det, -e2[:, 0] / det
    inv[:, 1, 0], inv[:, 1, 1] = -e1[:, 1] / det, e1[:, 0] / det
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    G = np.einsum("kr,trc->tkc", ref, inv)
    return G, 0.5 * det


def quadrature_points(mesh: MeshedDomain) -> np.ndarray:
    """Physical quadrature points ``(n_tri, 7, 2)``."""
    return np.einsum("qk,tkc->tqc", QUAD_BARY, mesh.points[mesh.triangles])


def element_coefficients(mesh: MeshedDomain, coefficient, eps: Optional[float] = None) -> np.ndarray:
    """Element averages ``(n_tri, 2, 2)`` of ``A(x/eps)`` (or of a constant matrix)."""
    if isinstance(coefficient, HomogenizedTensor):
        coefficient = coefficient.matrix()
    if isinstance(coefficient, CoefficientField):
        if coefficient.m != 1:
            raise ValueError("the finite element path is scalar")
        if coefficient.constant:
            a = coefficient(np.zeros((1, 2)))[0, :, :, 0, 0]
            return np.broadcast_to(a, (mesh.n_triangles, 2, 2))
        if eps is None:
            raise ValueError("an oscillating coefficient needs eps")
        xq = quadrature_points(mesh) / eps
        a = coefficient(np.mod(xq, 1.0))[..., 0, 0]
        return np.einsum("q,tqij->tij", QUAD_W, a)
    a = np.asarray(coefficient, dtype=float)
    if a.shape == ():
        a = a * np.eye(2)
    return np.broadcast_to(a, (mesh.n_triangles, 2, 2))


def stiffness_matrix(mesh: MeshedDomain, a_elem: np.ndarray) -> sp.csr_matrix:
    G, area = gradients(mesh)
    K = np.einsum("t,tkc,tcd,tld->tkl", area, G, a_elem, G)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_nodes
    return sp.csr_matrix((K.ravel(), (rows, cols)), shape=(n, n))


_MASS_CACHE: dict = {}


def mass_matrix(mesh: MeshedDomain) -> sp.csr_matrix:
    key = id(mesh)
    hit = _MASS_CACHE.get(key)
    if hit is not None and hit[0] is mesh:
        return hit[1]
    _, area = gradients(mesh)
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    M = area[:, None, None] * local
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_nodes
    out = sp.csr_matrix((M.ravel(), (rows, cols)), shape=(n, n))
    _MASS_CACHE.clear()
    _MASS_CACHE[key] = (mesh, out)
    return out


def boundary_values(mesh: MeshedDomain, g) -> np.ndarray:
    """Values at boundary vertices from an array, ``g(x)``, or ``g(x, u)`` (curve parameter)."""
    if callable(g):
        x = mesh.points[mesh.boundary_nodes]
        try:
            return np.asarray(g(x, mesh.boundary_u), dtype=float).reshape(-1)
        except TypeError:
            return np.asarray(g(x), dtype=float).reshape(-1)
    vals = np.asarray(g, dtype=float)
    if vals.shape == ():
        return np.full(mesh.boundary_nodes.size, float(vals))
    if vals.shape != (mesh.boundary_nodes.size,):
        raise ValueError("boundary array does not match the boundary vertices")
    return vals


def solve_dirichlet(mesh: MeshedDomain, coefficient, g, eps: Optional[float] = None,
                    oscillating_data: bool = False, rtol: float = 1e-9, maxiter: int = 2000) -> SolveResult:
    """P1 solution with nodal Dirichlet data.

    Parameters
    ----------
    coefficient : CoefficientField, HomogenizedTensor, array or scalar
        ``CoefficientField`` instances are evaluated at ``x/eps``.
    g : array, callable
        Boundary data (see :func:`boundary_values`).
    eps : float, optional
        Oscillation scale; the band size must then satisfy ``band_h <= eps/8`` and,
        for an oscillating coefficient, the interior size too.
    """
    oscillating_coeff = isinstance(coefficient, CoefficientField) and not coefficient.constant
    if eps is not None and (oscillating_coeff or oscillating_data):
        need = eps / 8
        if mesh.band_h > need * (1 + 1e-9):
            raise UnderResolvedError(f"boundary band size {mesh.band_h:.4g} exceeds eps/8 = {need:.4g}")
        if oscillating_coeff and mesh.h > need * (1 + 1e-9):
            raise UnderResolvedError(f"mesh size {mesh.h:.4g} exceeds eps/8 = {need:.4g} for an oscillating coefficient")
    t0 = time.perf_counter()
    K = stiffness_matrix(mesh, element_coefficients(mesh, coefficient, eps))
    gb = boundary_values(mesh, g)
    n = mesh.n_nodes
    u = np.zeros(n)
    u[mesh.boundary_nodes] = gb
    inner = mesh.interior_nodes()
    Kii = K[inner][:, inner].tocsr()
    rhs = -(K[inner] @ u)
    t1 = time.perf_counter()
    iters = 0
    res = 0.0
    if inner.size:
        ml = pyamg.smoothed_aggregation_solver(Kii, symmetry="hermitian" if _is_symmetric(Kii) else "nonsymmetric")
        M = ml.aspreconditioner()
        count = [0]

        def cb(_):
            count[0] += 1

        bnorm = np.linalg.norm(rhs)
        if bnorm == 0.0:
            x = np.zeros(inner.size)
        elif _is_symmetric(Kii):
            x, flag = spla.cg(Kii, rhs, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
        else:
            x, flag = spla.gmres(Kii, rhs, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=cb,
                                 callback_type="legacy")
        u[inner] = x
        iters = count[0]
        res = float(np.linalg.norm(Kii @ x - rhs) / bnorm) if bnorm else 0.0
        if res > 10 * rtol:
            raise ConvergenceError(f"P1 solve stalled at relative residual {res:.3e}", [res])
    t2 = time.perf_counter()
    return SolveResult(u, mesh, res, iters, float(np.max(np.abs(gb))) if gb.size else 0.0,
                       {"assemble": t1 - t0, "solve": t2 - t1})


def _is_symmetric(A: sp.csr_matrix) -> bool:
    d = A - A.T
    return d.nnz == 0 or float(abs(d).max()) <= 1e-12 * float(abs(A).max())


def interpolate(result: SolveResult, x: np.ndarray) -> np.ndarray:
    """Evaluate a P1 solution at points ``x``.

    Points just outside the polygon (between a boundary edge and the curve)
    take the value at their projection onto the nearest boundary edge.
    """
    m = result.mesh
    tri = Triangulation(m.points[:, 0], m.points[:, 1], m.triangles)
    vals = LinearTriInterpolator(tri, result.u)(x[:, 0], x[:, 1])
    out = np.ma.filled(vals.astype(float), np.nan)
    miss = np.isnan(out)
    if miss.any():
        out[miss] = _edge_projection_values(result, x[miss])
    return out


def _edge_projection_values(result: SolveResult, x: np.ndarray) -> np.ndarray:
    # boundary vertices are stored in order along the curve
    m = result.mesh
    bn = m.boundary_nodes
    nb = bn.size
    _, near = cKDTree(m.points[bn]).query(x)
    best = np.full(x.shape[0], np.inf)
    out = np.empty(x.shape[0])
    for shift in (-1, 0):
        i0 = bn[(near + shift) % nb]
        i1 = bn[(near + shift + 1) % nb]
        a, b = m.points[i0], m.points[i1]
        e = b - a
        lam = np.clip(np.sum((x - a) * e, axis=1) / np.sum(e * e, axis=1), 0.0, 1.0)
        dist = np.linalg.norm(a + lam[:, None] * e - x, axis=1)
        take = dist < best
        best[take] = dist[take]
        out[take] = ((1 - lam) * result.u[i0] + lam * result.u[i1])[take]
    return out


def _same_mesh(a: MeshedDomain, b: MeshedDomain) -> bool:
    return a is b or (a.points.shape == b.points.shape and np.array_equal(a.points, b.points)
                      and np.array_equal(a.triangles, b.triangles))


def l2_error(a: SolveResult, b: SolveResult, method: str = "auto") -> float:
    """``||u_a - u_b||_{L^2}``.

    ``method="auto"`` uses the mass matrix on a shared mesh and otherwise
    quadrature on the finer mesh with the coarser solution interpolated.
    """
    if method not in ("auto", "mass", "quadrature"):
        raise ValueError("method must be auto, mass or quadrature")
    shared = _same_mesh(a.mesh, b.mesh)
    if method == "mass" and not shared:
        raise ValueError("the mass-matrix norm needs both results on one mesh")
    if shared and method != "quadrature":
        e = a.u - b.u
        return float(np.sqrt(max(e @ (mass_matrix(a.mesh) @ e), 0.0)))
    fine, coarse = (a, b) if a.mesh.n_triangles >= b.mesh.n_triangles else (b, a)
    area_gap = abs(fine.mesh.area() - coarse.mesh.area()) / fine.mesh.area()
    if area_gap > 0.05:
        raise ValueError(f"meshes cover different domains (relative area gap {area_gap:.3g})")
    xq = quadrature_points(fine.mesh)
    _, area = gradients(fine.mesh)
    uf = np.einsum("qk,tk->tq", QUAD_BARY, fine.u[fine.mesh.triangles])
    uc = interpolate(coarse, xq.reshape(-1, 2)).reshape(uf.shape)
    err2 = np.sum(area * np.einsum("q,tq->t", QUAD_W, (uf - uc) ** 2))
    return float(np.sqrt(err2))


def gradient_field(result: SolveResult) -> np.ndarray:
    """Element-wise constant gradient ``(n_tri, 2)``."""
    G, _ = gradients(result.mesh)
    return np.einsum("tkc,tk->tc", G, result.u[result.mesh.triangles])


__all__ = [
    "SolveResult", "UnderResolvedError", "solve_dirichlet", "l2_error", "mass_matrix", "stiffness_matrix",
    "element_coefficients", "interpolate", "gradient_field", "boundary_values", "quadrature_points",
]
