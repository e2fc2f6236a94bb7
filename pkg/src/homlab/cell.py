"""Periodic cell problems, homogenized tensors and adjoint coefficient fields.

Coefficients are tensors ``a[..., i, j, alpha, beta]`` sampled on the nodes of a
periodic grid.  The cell operator is discretized in energy form: gradients live
at cell centres (forward difference along one axis, averaged over the others)
and the coefficient at a cell centre is the mean of its ``2**d`` corner values.
The homogenized tensor is the cell-centre (midpoint) average of
``A (I + grad chi)``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .solvers import ConvergenceError, KrylovInfo, gmres, pcg

Sampler = Callable[[np.ndarray], np.ndarray]


class EllipticityError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform node grid on the unit torus."""

    d: int
    N: int

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError("periodic grids are 2- or 3-dimensional")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two and at least 8")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N ** self.d

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(N, ..., N, d)``."""
        axes = [np.arange(self.N) * self.h] * self.d
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def cell_centres(self) -> np.ndarray:
        return self.nodes() + 0.5 * self.h


@dataclass(frozen=True)
class CoefficientField:
    """Periodic coefficient tensor ``y -> a_ij^{ab}(y)``.

    ``sampler`` maps points of shape ``(..., d)`` to ``(..., d, d, m, m)``.
    """

    d: int
    m: int
    sampler: Sampler
    ellipticity: float
    constant: bool = False
    scalar: bool = False
    laminate_axis: Optional[int] = None
    name: str = "custom"

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.asarray(self.sampler(y), dtype=float)
        return np.broadcast_to(out, y.shape[:-1] + (self.d, self.d, self.m, self.m))

    def mean(self, grid: Optional["PeriodicGrid"] = None) -> np.ndarray:
        grid = grid or PeriodicGrid(self.d, 64)
        return self(grid.nodes()).reshape(-1, self.d, self.d, self.m, self.m).mean(axis=0)

    def is_symmetric(self, grid: Optional["PeriodicGrid"] = None, tol: float = 1e-14) -> bool:
        grid = grid or PeriodicGrid(self.d, 16)
        a = self(grid.nodes())
        return bool(np.max(np.abs(a - _adjoint_tensor(a)), initial=0.0) <= tol)


def block_matrix(a: np.ndarray) -> np.ndarray:
    """Flatten ``(..., d, d, m, m)`` into ``(..., d*m, d*m)`` with index ``i*m + alpha``."""
    d, m = a.shape[-3], a.shape[-1]
    a = np.moveaxis(a, -3, -2)  # (..., i, alpha, j, beta)
    return a.reshape(a.shape[:-4] + (d * m, d * m))


def _adjoint_tensor(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.swapaxes(a, -4, -3), -2, -1)


def check_ellipticity(field: CoefficientField, grid: Optional[PeriodicGrid] = None,
                      lam: Optional[float] = None) -> float:
    """Verify the Legendre ellipticity bounds on the grid nodes.

    Returns the best constant observed; raises :class:`EllipticityError` if it
    falls below ``lam`` (the field's declared constant by default).
    """
    lam = field.ellipticity if lam is None else lam
    grid = grid or PeriodicGrid(field.d, 32)
    observed = _ellipticity_of(block_matrix(field(grid.nodes())))
    if observed < lam * (1 - 1e-12):
        raise EllipticityError(
            f"field {field.name!r}: ellipticity {observed:.4g} below declared {lam:.4g}"
        )
    return observed


def _ellipticity_of(mats: np.ndarray) -> float:
    sym = 0.5 * (mats + np.swapaxes(mats, -1, -2))
    eig = np.linalg.eigvalsh(sym.reshape((-1,) + sym.shape[-2:]))
    lo, hi = eig.min(), eig.max()
    if lo <= 0:
        return 0.0
    return float(min(lo, 1.0 / hi))


def check_periodicity(field: CoefficientField, n_points: int = 64, seed: int = 0,
                      tol: float = 1e-12) -> None:
    rng = np.random.default_rng(seed)
    y = rng.uniform(-1, 1, size=(n_points, field.d))
    base = field(y)
    for k in range(field.d):
        shifted = field(y + np.eye(field.d)[k])
        if np.max(np.abs(shifted - base)) > tol:
            raise ValueError(f"field {field.name!r} is not 1-periodic along axis {k}")


# ---------------------------------------------------------------------------
# presets


def constant_field(matrix, m: int = 1, name: str = "constant") -> CoefficientField:
    """Constant field; ``matrix`` is ``(d, d)`` for scalar problems or ``(d, d, m, m)``."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim == 2:
        a = a[:, :, None, None] * np.eye(m)[None, None]
    d = a.shape[0]
    lam = _ellipticity_of(block_matrix(a)[None])
    scalar = a.shape[-1] == 1 and np.allclose(a[:, :, 0, 0], a[0, 0, 0, 0] * np.eye(d))
    return CoefficientField(d, a.shape[-1], lambda y: a, lam, constant=True,
                            scalar=bool(scalar), name=name)


def laminate_field(a0: float = 2.0, amplitude: float = 1.0, axis: int = 0, d: int = 2,
                   name: str = "laminate") -> CoefficientField:
    """Scalar laminate ``a(y) = a0 + amplitude * sin(2 pi y_axis)`` times the identity."""
    if abs(amplitude) >= a0:
        raise EllipticityError("laminate must stay positive")
    lam = min(a0 - abs(amplitude), 1.0 / (a0 + abs(amplitude)))
    eye = np.eye(d)[:, :, None, None]

    def sampler(y):
        a = a0 + amplitude * np.sin(2 * np.pi * y[..., axis])
        return a[..., None, None, None, None] * eye

    return CoefficientField(d, 1, sampler, lam, scalar=True, laminate_axis=axis, name=name)


def trig_field(modes, amplitudes, base=2.0, d: int = 2, name: str = "trig") -> CoefficientField:
    """``a(y) = base + sum_k amp_k cos(2 pi k.y)``; ``base`` is a scalar or a ``(d, d)`` matrix."""
    modes = np.atleast_2d(np.asarray(modes, dtype=float))
    amps = np.asarray(amplitudes, dtype=float).ravel()
    base_m = np.asarray(base, dtype=float)
    if base_m.ndim == 0:
        base_m = base_m * np.eye(d)
    lo = np.linalg.eigvalsh(0.5 * (base_m + base_m.T)).min() - np.abs(amps).sum()
    hi = np.linalg.eigvalsh(0.5 * (base_m + base_m.T)).max() + np.abs(amps).sum()
    if lo <= 0:
        raise EllipticityError("trig field loses ellipticity")
    lam = min(lo, 1.0 / hi)
    eye = np.eye(d)

    def sampler(y):
        osc = np.cos(2 * np.pi * np.tensordot(y, modes.T, axes=1)) @ amps
        a = base_m + osc[..., None, None] * eye
        return a[..., None, None]

    laminate_axis = None
    support = np.flatnonzero(np.any(modes != 0, axis=0))
    if support.size == 1 and np.allclose(base_m, np.diag(np.diag(base_m))):
        laminate_axis = int(support[0])
    scalar = bool(np.allclose(base_m, base_m[0, 0] * eye))
    return CoefficientField(d, 1, sampler, lam, scalar=scalar, laminate_axis=laminate_axis,
                            name=name)


def adjoint_field(field: CoefficientField) -> CoefficientField:
    """Field with ``a*_ij^{ab} = a_ji^{ba}``; applying it twice returns the original samples."""
    inner = field.sampler

    def sampler(y):
        return _adjoint_tensor(np.broadcast_to(
            inner(y), np.shape(y)[:-1] + (field.d, field.d, field.m, field.m)))

    return CoefficientField(field.d, field.m, sampler, field.ellipticity, field.constant,
                            field.scalar, field.laminate_axis, field.name + "*")


# ---------------------------------------------------------------------------
# discrete operators


def _avg_forward(v, axis):
    return 0.5 * (v + np.roll(v, -1, axis=axis))


def _avg_backward(v, axis):
    return 0.5 * (v + np.roll(v, 1, axis=axis))


def cell_gradient(u: np.ndarray, d: int, h: float) -> np.ndarray:
    """Gradient at cell centres.  ``u`` has shape ``(m, N, ..., N)``; result ``(d, m, ...)``."""
    out = []
    for k in range(d):
        g = (np.roll(u, -1, axis=1 + k) - u) / h
        for ell in range(d):
            if ell != k:
                g = _avg_forward(g, 1 + ell)
        out.append(g)
    return np.stack(out)


def cell_gradient_T(q: np.ndarray, d: int, h: float) -> np.ndarray:
    """Transpose of :func:`cell_gradient`: maps ``(d, m, ...)`` back to ``(m, ...)``."""
    total = np.zeros(q.shape[1:])
    for k in range(d):
        g = q[k]
        for ell in range(d):
            if ell != k:
                g = _avg_backward(g, 1 + ell)
        total += (np.roll(g, 1, axis=1 + k) - g) / h
    return total


def cell_coefficients(field: CoefficientField, grid: PeriodicGrid) -> np.ndarray:
    """Corner-averaged coefficients at cell centres, shape ``(d, d, m, m, N, ..., N)``."""
    a = np.broadcast_to(field(grid.nodes()), grid.shape + (field.d,) * 2 + (field.m,) * 2)
    a = np.moveaxis(np.array(a), tuple(range(grid.d)), tuple(range(4, 4 + grid.d)))
    for ell in range(grid.d):
        a = _avg_forward(a, 4 + ell)
    return a


def _flux(a_c: np.ndarray, g: np.ndarray) -> np.ndarray:
    # q[i, alpha] = a[i, j, alpha, beta] g[j, beta]
    return np.einsum("ijab...,jb...->ia...", a_c, g)


class _CellOperator:
    def __init__(self, a_c: np.ndarray, grid: PeriodicGrid):
        self.a_c = a_c
        self.grid = grid
        self.d = grid.d
        self.m = a_c.shape[2]
        abar = a_c.reshape(a_c.shape[:4] + (-1,)).mean(axis=-1)
        self._symbol_inv = self._mean_symbol_inverse(abar)

    def apply(self, u):
        g = cell_gradient(u, self.d, self.grid.h)
        return cell_gradient_T(_flux(self.a_c, g), self.d, self.grid.h)

    def _mean_symbol_inverse(self, abar):
        N, d, h = self.grid.N, self.d, self.grid.h
        w = 2 * np.pi * np.fft.fftfreq(N, d=1.0 / N) / N
        W = np.meshgrid(*([w] * d), indexing="ij")
        D = []
        for k in range(d):
            s = (np.exp(1j * W[k]) - 1) / h
            for ell in range(d):
                if ell != k:
                    s = s * 0.5 * (1 + np.exp(1j * W[ell]))
            D.append(s)
        D = np.stack(D)  # (d, N, ..., N)
        sym = np.einsum("i...,ijab,j...->...ab", np.conj(D), abar, D)
        mag = np.sum(np.abs(D) ** 2, axis=0)
        null = mag < 1e-10 * mag.max()
        sym[null] = np.eye(self.m)
        inv = np.linalg.inv(sym)
        inv[null] = 0.0
        return inv

    def precondition(self, r):
        axes = tuple(range(1, 1 + self.d))
        rh = np.fft.fftn(r, axes=axes)
        zh = np.einsum("...ab,b...->a...", self._symbol_inv, rh)
        return np.fft.ifftn(zh, axes=axes).real


def _project_mean(u):
    axes = tuple(range(1, u.ndim))
    return u - u.mean(axis=axes, keepdims=True)


@dataclass
class CorrectorSet:
    """Correctors ``chi[j, beta]`` of shape ``(d, m, m, N, ..., N)`` (last ``m`` is the component)."""

    chi: np.ndarray
    grid: PeriodicGrid
    residuals: np.ndarray
    field_name: str = ""
    info: dict = field(default_factory=dict)

    def component(self, j: int, beta: int = 0) -> np.ndarray:
        return self.chi[j, beta]

    def gradient(self) -> np.ndarray:
        """Cell-centre gradients, shape ``(d, m, d, m, N, ...)`` = ``[j, beta, k, gamma]``."""
        d, m = self.chi.shape[:2]
        out = np.empty((d, m, d, m) + self.grid.shape)
        for j in range(d):
            for b in range(m):
                out[j, b] = cell_gradient(self.chi[j, b], self.grid.d, self.grid.h)
        return out

    def to_csv(self, path) -> None:
        d, m = self.chi.shape[:2]
        idx = np.indices(self.grid.shape).reshape(self.grid.d, -1).T
        cols = [f"i{k + 1}" for k in range(self.grid.d)]
        vals = []
        for j, b, a in itertools.product(range(d), range(m), range(m)):
            cols.append(f"chi_j{j + 1}_b{b + 1}_c{a + 1}")
            vals.append(self.chi[j, b, a].ravel())
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row, v in zip(idx, np.array(vals).T):
                w.writerow(list(row) + [f"{x:.17g}" for x in v])


def solve_corrector(field: CoefficientField, grid: PeriodicGrid, j: int, beta: int = 0,
                    rtol: float = 1e-10, maxiter: Optional[int] = None,
                    _op: Optional[_CellOperator] = None) -> tuple[np.ndarray, KrylovInfo]:
    """Solve the cell problem for ``chi_j^beta``; returns ``(m, N, ..., N)`` values and solver info."""
    if grid.d != field.d:
        raise ValueError("grid dimension does not match the coefficient field")
    if _op is None:
        check_ellipticity(field, grid)
        _op = _CellOperator(cell_coefficients(field, grid), grid)
    # right-hand side -D^T (A e_j e^beta)
    q = _op.a_c[:, j, :, beta]
    rhs = -cell_gradient_T(q, grid.d, grid.h)
    maxiter = maxiter or 10 * grid.N ** 2
    symmetric = np.allclose(_op.a_c, _op.a_c.swapaxes(0, 1).swapaxes(2, 3), rtol=0, atol=1e-14)
    solver = pcg if symmetric else gmres
    u, info = solver(_op.apply, rhs, _op.precondition, rtol=rtol, maxiter=maxiter,
                     project=_project_mean)
    return _project_mean(u), info


def solve_correctors(field: CoefficientField, grid: PeriodicGrid, rtol: float = 1e-10,
                     maxiter: Optional[int] = None) -> CorrectorSet:
    check_ellipticity(field, grid)
    op = _CellOperator(cell_coefficients(field, grid), grid)
    d, m = field.d, field.m
    chi = np.zeros((d, m, m) + grid.shape)
    res = np.zeros((d, m))
    iters = {}
    for j in range(d):
        for b in range(m):
            if field.constant:
                continue
            u, info = solve_corrector(field, grid, j, b, rtol, maxiter, _op=op)
            chi[j, b] = u
            res[j, b] = info.residual
            iters[(j, b)] = info.iterations
    return CorrectorSet(chi, grid, res, field.name, {"iterations": iters})


@dataclass(frozen=True)
class HomogenizedTensor:
    """Constant effective tensor ``ahat[i, j, alpha, beta]``."""

    ahat: np.ndarray

    @property
    def d(self) -> int:
        return self.ahat.shape[0]

    @property
    def m(self) -> int:
        return self.ahat.shape[-1]

    @property
    def ellipticity(self) -> float:
        return _ellipticity_of(block_matrix(self.ahat)[None])

    def adjoint(self) -> "HomogenizedTensor":
        return HomogenizedTensor(_adjoint_tensor(self.ahat))

    def matrix(self) -> np.ndarray:
        """``(d, d)`` matrix for scalar problems."""
        if self.m != 1:
            raise ValueError("matrix() is only defined for m = 1")
        return self.ahat[:, :, 0, 0]

    def normal_inverse(self, n) -> np.ndarray:
        """``h(y)``: inverse of the ``m x m`` matrix ``ahat_ij n_i n_j``."""
        n = np.asarray(n, dtype=float)
        ann = np.einsum("i,ijab,j->ab", n, self.ahat, n)
        if abs(np.linalg.det(ann)) < 1e-14:
            raise np.linalg.LinAlgError("normal-normal block of the homogenized tensor is singular")
        return np.linalg.inv(ann)


def homogenized_tensor(field: CoefficientField, correctors: CorrectorSet) -> HomogenizedTensor:
    grid = correctors.grid
    if grid.d != field.d or correctors.chi.shape[:2] != (field.d, field.m):
        raise ValueError("correctors do not match the coefficient field")
    a_c = cell_coefficients(field, grid)
    d, m = field.d, field.m
    ahat = np.empty((d, d, m, m))
    for j in range(d):
        for b in range(m):
            g = cell_gradient(correctors.chi[j, b], d, grid.h)  # (k, gamma, ...)
            # a_ij^{ab} + a_ik^{ag} d_k chi_j^{gb}
            flux = a_c[:, j, :, b] + np.einsum("ikag...,kg...->ia...", a_c, g)
            ahat[:, j, :, b] = flux.reshape(d, m, -1).mean(axis=-1)
    return HomogenizedTensor(ahat)


def homogenize(field: CoefficientField, N: int = 64, rtol: float = 1e-10):
    """Correctors and effective tensor in one call."""
    grid = PeriodicGrid(field.d, N)
    chi = solve_correctors(field, grid, rtol=rtol)
    return chi, homogenized_tensor(field, chi)


__all__ = [
    "PeriodicGrid", "CoefficientField", "CorrectorSet", "HomogenizedTensor",
    "EllipticityError", "ConvergenceError", "constant_field", "laminate_field", "trig_field",
    "adjoint_field", "solve_corrector", "solve_correctors", "homogenized_tensor", "homogenize",
    "check_ellipticity", "check_periodicity", "block_matrix", "cell_gradient",
    "cell_coefficients",
]
