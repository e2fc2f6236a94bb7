"""End-to-end convergence experiments and their rate fits."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..cell import (CoefficientField, PeriodicGrid, adjoint_field, homogenized_tensor,
                    solve_correctors)
from ..layer import LayerProblem, default_height, extend_solution, physical_layer, solve_layer
from ..diophantine import default_mu, kappa_many
from ..pipeline import OscillatingData, _reduced_kappa, homogenized_data, rate_exponents, sample_count
from .fem import SolveResult, gradient_field, gradients, l2_error, solve_dirichlet
from .mesh import DomainSpec, mesh

DEFAULT_EPS = (1 / 8, 1 / 12, 1 / 16, 1 / 24, 1 / 32)


# ---------------------------------------------------------------------------
# fits and reports


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual: float


def rate_fit(eps: Sequence[float], errors: Sequence[float]) -> RateFit:
    """Least squares of ``log err = slope log eps + intercept``; ``residual`` is the RMS misfit."""
    eps = np.asarray(eps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if eps.size < 3:
        raise ValueError("a rate fit needs at least three points")
    if np.any(errors <= 0) or np.any(eps <= 0):
        raise ValueError("errors and eps must be positive")
    X = np.stack([np.log(eps), np.ones_like(eps)], axis=1)
    coef, *_ = np.linalg.lstsq(X, np.log(errors), rcond=None)
    res = np.log(errors) - X @ coef
    return RateFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res ** 2))))


@dataclass
class RateReport:
    label: str
    eps: np.ndarray
    errors: np.ndarray
    h: np.ndarray
    iterations: np.ndarray
    predicted: Optional[float] = None
    provenance: str = ""
    timings: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if np.any(np.diff(self.eps) >= 0):
            raise ValueError("eps must be strictly decreasing")
        if np.any(self.errors <= 0):
            raise ValueError("errors must be positive")

    @property
    def fit(self) -> RateFit:
        return rate_fit(self.eps, self.errors)

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "l2_error", "h", "solver_iters"])
            for e, err, h, it in zip(self.eps, self.errors, self.h, self.iterations):
                w.writerow([f"{e:.10g}", f"{err:.10g}", f"{h:.10g}", int(it)])

    def to_dat(self, path) -> None:
        """Whitespace table for gnuplot: ``log(eps) log(err)``."""
        with open(path, "w") as fh:
            fh.write(f"# {self.label}: slope {self.fit.slope:.4f}\n# eps l2_error log_eps log_err\n")
            for e, err in zip(self.eps, self.errors):
                fh.write(f"{e:.10g} {err:.10g} {math.log(e):.10g} {math.log(err):.10g}\n")

    def as_dict(self) -> dict:
        f = self.fit
        return {"label": self.label, "eps": self.eps.tolist(), "l2_error": self.errors.tolist(),
                "h": np.asarray(self.h).tolist(), "solver_iters": np.asarray(self.iterations).tolist(),
                "slope": f.slope, "intercept": f.intercept, "fit_residual": f.residual,
                "predicted": self.predicted, "provenance": self.provenance,
                "strictly_decreasing": self.strictly_decreasing, "timings": self.timings} | self.extra

    def summary(self) -> str:
        f = self.fit
        lines = [f"{self.label}: slope {f.slope:.4f} (fit residual {f.residual:.3g}), predicted {self.predicted}"]
        for e, err, it in zip(self.eps, self.errors, self.iterations):
            lines.append(f"  eps={e:.5f}  l2_error={err:.6e}  iters={int(it)}")
        return "\n".join(lines)


def _boundary(domain):
    return domain.boundary() if isinstance(domain, DomainSpec) else domain


def _finite_type(domain) -> int:
    return domain.finite_type if isinstance(domain, DomainSpec) else 2


def _data_on(f: OscillatingData, eps: float) -> Callable:
    return lambda x: f(x, x / eps)[..., 0]


def theta_mean(f: OscillatingData, N: int = 64) -> Callable:
    """``x -> mean over the torus of f(x, .)`` by the periodic rectangle rule."""
    theta = PeriodicGrid(2, N).nodes().reshape(-1, 2)

    def g(x):
        x = np.atleast_2d(x)
        return np.array([f(xi, theta)[..., 0].mean() for xi in x])

    return g


def periodic_interpolator(values: np.ndarray) -> Callable:
    """Bilinear periodic interpolation of node values ``(N1, N2)`` at ``y (..., 2)``."""
    values = np.asarray(values, dtype=float)
    n1, n2 = values.shape

    def sample(y):
        y = np.asarray(y, dtype=float)
        a = np.mod(y[..., 0], 1.0) * n1
        b = np.mod(y[..., 1], 1.0) * n2
        i, j = np.floor(a).astype(int), np.floor(b).astype(int)
        fa, fb = a - i, b - j
        i0, i1, j0, j1 = i % n1, (i + 1) % n1, j % n2, (j + 1) % n2
        return ((1 - fa) * (1 - fb) * values[i0, j0] + fa * (1 - fb) * values[i1, j0]
                + (1 - fa) * fb * values[i0, j1] + fa * fb * values[i1, j1])

    return sample


# ---------------------------------------------------------------------------
# experiments


def constant_coeff_experiment(domain, A0, f: OscillatingData, eps_list: Sequence[float] = DEFAULT_EPS,
                              h: float = 0.05, band_factor: float = 8.0, N: int = 64,
                              progress: Optional[Callable] = None) -> RateReport:
    """Constant ``A0`` with data ``f(x, x/eps)`` against the problem with the torus mean of ``f``.

    Both problems are solved on the same graded mesh (band size ``eps/band_factor``);
    the limit problem is smooth, so sharing the mesh adds only ``O(h^2)``.
    """
    boundary = _boundary(domain)
    k = _finite_type(domain)
    A0 = np.asarray(A0, dtype=float) * (np.eye(2) if np.ndim(A0) == 0 else 1.0)
    fbar = theta_mean(f, N)
    eps_list = sorted(eps_list, reverse=True)
    errors, hs, iters, times = [], [], [], []
    for eps in eps_list:
        t0 = time.perf_counter()
        m = mesh(boundary, h, band_h=eps / band_factor)
        ue = solve_dirichlet(m, A0, _data_on(f, eps), eps=eps, oscillating_data=True)
        u0 = solve_dirichlet(m, A0, fbar)
        err = l2_error(ue, u0)
        errors.append(err)
        hs.append(m.band_h)
        iters.append(ue.iterations)
        times.append(time.perf_counter() - t0)
        if progress:
            progress(eps, err)
    return RateReport(f"constant-coefficient {boundary.name}", eps_list, errors, hs, iters,
                      predicted=1.0 / (2 * k), provenance=f"constant coefficients on a type-{k} domain: eps^(1/(2k))",
                      timings={"per_eps": times})


def oscillating_coeff_experiment(domain, field: CoefficientField, f: OscillatingData,
                                 eps_list: Sequence[float] = DEFAULT_EPS, N: int = 64, h_factor: float = 8.0,
                                 n_samples: Optional[int] = None, progress: Optional[Callable] = None) -> RateReport:
    """``A(x/eps)`` with data ``f(x, x/eps)`` against ``ahat`` with the homogenized data.

    The limit problem is solved once on a reference mesh of size ``min(eps)/h_factor``.
    """
    boundary = _boundary(domain)
    k = _finite_type(domain)
    eps_list = sorted(eps_list, reverse=True)
    t0 = time.perf_counter()
    n_samples = n_samples or sample_count(boundary, min(eps_list))
    hd = homogenized_data(boundary, field, f, n_samples=n_samples, N=N)
    t_fbar = time.perf_counter() - t0
    ref = mesh(boundary, min(eps_list) / h_factor)
    u0 = solve_dirichlet(ref, hd.ahat.matrix(), lambda x, u: hd.at_parameter(u)[:, 0])
    errors, hs, iters, times = [], [], [], []
    for eps in eps_list:
        t1 = time.perf_counter()
        m = ref if math.isclose(eps / h_factor, ref.h) else mesh(boundary, eps / h_factor)
        ue = solve_dirichlet(m, field, _data_on(f, eps), eps=eps, oscillating_data=True)
        err = l2_error(ue, u0)
        errors.append(err)
        hs.append(m.h)
        iters.append(ue.iterations)
        times.append(time.perf_counter() - t1)
        if progress:
            progress(eps, err)
    rates = rate_exponents(2, k=k)
    return RateReport(f"oscillating-coefficient {boundary.name}", eps_list, errors, hs, iters,
                      predicted=float(rates.l2_exponent),
                      provenance=f"alpha*/2 with gamma = {rates.gamma} (type {k}, d = 2)",
                      timings={"fbar": t_fbar, "per_eps": times},
                      extra={"fbar_flagged": int(hd.flags.sum()), "fbar_samples": int(hd.u.size),
                             "ahat": hd.ahat.matrix().tolist()})


@dataclass
class LayerCheckReport:
    eps: float
    sigma: float
    radii: np.ndarray
    sup_grad: np.ndarray
    bound: np.ndarray
    constant: float
    x0: np.ndarray

    def rows(self):
        return list(zip(self.radii, self.sup_grad, self.bound, self.sup_grad / self.bound))

    def summary(self) -> str:
        lines = [f"eps={self.eps:.5f} sigma={self.sigma} fitted C={self.constant:.4g}"]
        for r, s, b, q in self.rows():
            lines.append(f"  r={r:.4f}  sup|grad w|={s:.4e}  bound={b:.4e}  ratio={q:.3f}")
        return "\n".join(lines)


def layer_expansion_check(domain, field: CoefficientField, u0: float, eps: float, sigma: float = 0.5,
                          j: int = 0, N: int = 64, h_factor: float = 8.0) -> LayerCheckReport:
    """``sup |grad (u*_eps - vbar*_eps)|`` on half-balls ``B(x0, r)`` for ``r = eps, 2 eps, ..., sqrt(eps)``.

    ``u*_eps`` solves the adjoint problem with data ``-eps chi*_j(x/eps)``; ``vbar*_eps`` is
    the physical boundary layer at ``x0`` (the curve point with parameter ``u0``).
    """
    boundary = _boundary(domain)
    x0 = boundary.point(u0)
    n0 = boundary.normal(u0)
    adj = adjoint_field(field)
    grid = PeriodicGrid(2, N)
    chi = solve_correctors(adj, grid).chi[j, 0, 0]  # (N, N)
    chi_at = periodic_interpolator(chi)
    m = mesh(boundary, eps / h_factor)
    ue = solve_dirichlet(m, adj, lambda x: -eps * chi_at(x / eps), eps=eps, oscillating_data=True)

    r_max = math.sqrt(eps)
    if field.laminate_axis is not None:
        shape = tuple(N if ax == field.laminate_axis else 1 for ax in range(2))
        data = -chi[:, :1] if field.laminate_axis == 0 else -chi[:1, :]
    else:
        shape, data = (N, N), -chi
    kap = float(kappa_many(n0[None], default_mu(2, 1), 1000)[0])
    T = max(default_height(_reduced_kappa(field, n0, kap)), 1.2 * (r_max + 2 * m.h) / eps)
    sol = solve_layer(LayerProblem(adj, n0, data[None], shape=shape, T=T))
    vbar = physical_layer(extend_solution(sol), x0, eps)

    near = np.linalg.norm(m.points - x0, axis=1) <= r_max + 2 * m.h
    w = np.zeros(m.n_nodes)
    w[near] = ue.u[near] - vbar(m.points[near])[:, 0]
    G, _ = gradients(m)
    grad = np.einsum("tkc,tk->tc", G, w[m.triangles])
    vdist = np.linalg.norm(m.points[m.triangles] - x0, axis=2).max(axis=1)
    n_r = max(1, int(math.floor(r_max / eps + 1e-9)))
    radii = eps * np.arange(1, n_r + 1)
    sup = np.array([np.max(np.linalg.norm(grad[vdist <= r], axis=1), initial=0.0) for r in radii])
    bound = math.sqrt(eps) + radii ** (2 + sigma) / eps ** (1 + sigma)
    return LayerCheckReport(eps, sigma, radii, sup, bound, float(np.max(sup / bound)), x0)


def nodal_gradient(result: SolveResult) -> np.ndarray:
    """Area-weighted average of element gradients at the nodes, ``(n_nodes, 2)``."""
    m = result.mesh
    g = gradient_field(result)
    _, area = gradients(m)
    acc = np.zeros((m.n_nodes, 2))
    wsum = np.zeros(m.n_nodes)
    for k in range(3):
        np.add.at(acc, m.triangles[:, k], g * area[:, None])
        np.add.at(wsum, m.triangles[:, k], area)
    return acc / wsum[:, None]


def higher_order_experiment(domain, field: CoefficientField, g: Callable,
                            eps_list: Sequence[float] = DEFAULT_EPS, N: int = 128, h_factor: float = 16.0,
                            n_samples: Optional[int] = None,
                            progress: Optional[Callable] = None) -> tuple[RateReport, RateReport]:
    """Errors of ``u_eps - u0`` and of ``u_eps - u0 - eps chi(x/eps).grad u0 - eps v_bl``.

    ``v_bl`` solves the limit problem whose data is the homogenized boundary data of
    ``-chi(theta).grad u0(x)``.  Everything is solved on one mesh per ``eps``.
    """
    boundary = _boundary(domain)
    eps_list = sorted(eps_list, reverse=True)
    grid = PeriodicGrid(2, N)
    correctors = solve_correctors(field, grid)
    ahat = homogenized_tensor(field, correctors)
    chi_at = [periodic_interpolator(correctors.chi[jj, 0, 0]) for jj in range(2)]

    # limit solution on a moderate mesh for the boundary gradient used by the layer data
    coarse = mesh(boundary, min(eps_list) / 4)
    u0c = solve_dirichlet(coarse, ahat.matrix(), g)
    grad_c = nodal_gradient(u0c)
    from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator
    lin = LinearNDInterpolator(coarse.points, grad_c)
    nearest = NearestNDInterpolator(coarse.points, grad_c)

    def grad_u0(x):
        x = np.atleast_2d(x)
        v = lin(x)
        bad = np.isnan(v[:, 0])
        if bad.any():
            v[bad] = nearest(x[bad])
        return v

    def f_bl(x, theta):
        gu = grad_u0(np.asarray(x).reshape(-1, 2))[0]
        return -(chi_at[0](theta) * gu[0] + chi_at[1](theta) * gu[1])

    hd = homogenized_data(boundary, field, OscillatingData(f_bl, 1, None, "layer-data"),
                          n_samples=n_samples or sample_count(boundary, min(eps_list)), N=N)
    unc, cor, hs, iters, times = [], [], [], [], []
    for eps in eps_list:
        t0 = time.perf_counter()
        m = mesh(boundary, eps / h_factor)
        ue = solve_dirichlet(m, field, g, eps=eps)
        u0 = solve_dirichlet(m, ahat.matrix(), g)
        vbl = solve_dirichlet(m, ahat.matrix(), lambda x, u: hd.at_parameter(u)[:, 0])
        gu = nodal_gradient(u0)
        y = m.points / eps
        first = eps * (chi_at[0](y) * gu[:, 0] + chi_at[1](y) * gu[:, 1])
        expansion = u0.with_values(u0.u + first + eps * vbl.u)
        unc.append(l2_error(ue, u0))
        cor.append(l2_error(ue, expansion))
        hs.append(m.h)
        iters.append(ue.iterations)
        times.append(time.perf_counter() - t0)
        if progress:
            progress(eps, unc[-1], cor[-1])
    rates = rate_exponents(2, k=_finite_type(domain))
    base = dict(timings={"per_eps": times})
    r_unc = RateReport("uncorrected", eps_list, unc, hs, iters, predicted=None,
                       provenance="first-order difference u_eps - u0", **base)
    r_cor = RateReport("corrected", eps_list, cor, hs, iters, predicted=float(1 + rates.alpha_star),
                       provenance="two-scale expansion with boundary-layer term: 1 + alpha*", **base)
    return r_unc, r_cor


@dataclass
class ScalingProbe:
    eps: tuple
    grad_sup: tuple
    hessian_sup: tuple

    @property
    def hessian_ratio(self) -> float:
        """Observed growth of ``sup |D^2 u|`` divided by the predicted ``eps1/eps2``."""
        return (self.hessian_sup[1] / self.hessian_sup[0]) / (self.eps[0] / self.eps[1])


def derivative_scaling_probe(domain, field: CoefficientField, f: Callable, eps_pair=(1 / 8, 1 / 16),
                             h_factor: float = 8.0) -> ScalingProbe:
    """``sup |grad u|`` and ``sup |D^2 u|`` for data ``eps f(x/eps)`` at two scales.

    Second derivatives come from differentiating the recovered nodal gradient, so the
    values are indicative rather than converged.
    """
    boundary = _boundary(domain)
    gs, hs = [], []
    for eps in eps_pair:
        m = mesh(boundary, eps / h_factor)
        u = solve_dirichlet(m, field, lambda x: eps * f(x / eps), eps=eps, oscillating_data=True)
        g = nodal_gradient(u)
        gs.append(float(np.max(np.linalg.norm(gradient_field(u), axis=1))))
        G, _ = gradients(m)
        hess = np.stack([np.einsum("tkc,tk->tc", G, g[m.triangles, a]) for a in range(2)], axis=1)
        hs.append(float(np.max(np.linalg.norm(hess, axis=(1, 2)))))
    return ScalingProbe(tuple(eps_pair), tuple(gs), tuple(hs))


__all__ = [
    "RateFit", "RateReport", "rate_fit", "constant_coeff_experiment", "oscillating_coeff_experiment",
    "LayerCheckReport", "layer_expansion_check", "higher_order_experiment", "derivative_scaling_probe",
    "ScalingProbe", "periodic_interpolator", "theta_mean", "nodal_gradient", "DEFAULT_EPS",
]
