"""Homogenized boundary data and the convergence-rate exponents.

``homogenized_data`` evaluates, at boundary samples ``y``,

    fbar(y) = h(y) * mean_theta [ (1 + n.grad chi*_n - dV*/dt(theta, 0)) a_nn(theta) f(y, theta) ]

where ``chi*`` are the adjoint correctors, ``V*`` solves the adjoint layer problem
with data ``-chi*_n`` (``chi*_n = sum_j n_j chi*_j``) and ``h`` inverts ``ahat_nn``.
For systems the bracket and ``h`` are ``m x m`` blocks.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .cell import (CoefficientField, CorrectorSet, HomogenizedTensor, PeriodicGrid, adjoint_field,
                   homogenized_tensor, solve_correctors)
from .diophantine import default_mu, kappa_many
from .geometry import ParametricBoundary
from .layer import SLOW_DECAY_KAPPA, LayerProblem, default_height, solve_layer, tangent_frame


# ---------------------------------------------------------------------------
# exponents


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def q_star(d: int, gamma) -> Fraction:
    """Sobolev exponent ``(d - 1) / (2 gamma - 1)``."""
    g = _as_fraction(gamma)
    if d < 2 or g < 1:
        raise ValueError("need d >= 2 and gamma >= 1")
    return Fraction(d - 1) / (2 * g - 1)


def _rate_terms(d: int, g: Fraction):
    """Affine pieces ``(slope, intercept)`` of the max-min program in ``s``."""
    half = Fraction(1, 2)
    terms = [
        (Fraction(1), Fraction(0)),
        (Fraction(4), -4 * half),
        (Fraction(d - 1), -(d - 1) * half),
        (Fraction(d - 1) / (1 + g), Fraction(0)),
    ]
    if g == 1:
        # the (1 - s)/(gamma - 1) piece is +infinity for s < 1; what remains is
        # increasing and the (d-1)/(1+gamma) piece becomes s (d-1)/2
        return terms
    terms.append((-Fraction(d - 1) / (g - 1), Fraction(d - 1) / (g - 1)))
    return terms


def rate_objective(d: int, gamma, s) -> Fraction:
    g = _as_fraction(gamma)
    s = _as_fraction(s)
    return min(a * s + b for a, b in _rate_terms(d, g))


def alpha_star(d: int, gamma) -> tuple[Fraction, Fraction]:
    """Exact ``(alpha*, s*)`` by enumerating kinks of the piecewise-linear objective on ``[1/2, 1]``."""
    g = _as_fraction(gamma)
    if d < 2 or g < 1:
        raise ValueError("need d >= 2 and gamma >= 1")
    terms = _rate_terms(d, g)
    lo, hi = Fraction(1, 2), Fraction(1)
    candidates = {lo, hi}
    for i, (a1, b1) in enumerate(terms):
        for a2, b2 in terms[i + 1:]:
            if a1 != a2:
                s = (b2 - b1) / (a1 - a2)
                if lo <= s <= hi:
                    candidates.add(s)
    best = max(sorted(candidates), key=lambda s: (rate_objective(d, g, s), -s))
    return rate_objective(d, g, best), best


def alpha_star_lower_bound(d: int, gamma) -> Fraction:
    """Value of the objective at ``s = (1 + gamma)/(2 gamma)`` in closed form (for ``d > 5``)."""
    g = _as_fraction(gamma)
    if d <= 5:
        raise ValueError("the closed-form lower bound is meant for d > 5")
    return min((1 + g) / (2 * g), Fraction(4) / (2 * g), Fraction(d - 1) / (2 * g))


def alpha_star_closed_form(d: int, gamma) -> Fraction:
    """Closed forms for ``d <= 5``; used to cross-check the exact program."""
    g = _as_fraction(gamma)
    p = Fraction(d - 1) / g
    if g == 1:
        return min(Fraction(1), Fraction(d - 1, 2))
    if d in (2, 3):
        return p / 2
    if d in (4, 5):
        return min(p / 2, (d - 1) * p / (d - 1 + (d - 2) * p))
    raise ValueError("no closed form for d > 5")


@dataclass(frozen=True)
class RateExponents:
    d: int
    p: Fraction
    gamma: Fraction
    q_star: Fraction
    alpha_star: Fraction
    s_star: Fraction

    @property
    def l2_exponent(self) -> Fraction:
        """Predicted L2 rate ``alpha*/2``."""
        return self.alpha_star / 2

    def as_dict(self) -> dict:
        return {k: str(getattr(self, k)) for k in ("d", "p", "gamma", "q_star", "alpha_star", "s_star")} | {
            "l2_exponent": str(self.l2_exponent)}


def rate_exponents(d: int, p=None, gamma=None, k: Optional[int] = None) -> RateExponents:
    """Exponents from one of ``p`` (weak-L^p order), ``gamma`` or the finite type ``k``."""
    if sum(x is not None for x in (p, gamma, k)) != 1:
        raise ValueError("give exactly one of p, gamma, k")
    if k is not None:
        if k < 2:
            raise ValueError("finite type k must be >= 2")
        g = Fraction((d - 1) * (k - 1))
    elif gamma is not None:
        g = _as_fraction(gamma)
    else:
        g = Fraction(d - 1) / _as_fraction(p)
    a, s = alpha_star(d, g)
    return RateExponents(d, Fraction(d - 1) / g, g, q_star(d, g), a, s)


# ---------------------------------------------------------------------------
# oscillating data


@dataclass
class OscillatingData:
    """``f(x, theta) -> (..., m)``: smooth in the boundary point ``x``, 1-periodic in ``theta``."""

    sampler: Callable
    m: int = 1
    modes: Optional[list] = None
    name: str = "custom"

    def __call__(self, x, theta) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        theta = np.asarray(theta, dtype=float)
        out = np.asarray(self.sampler(x, theta), dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], theta.shape[:-1])
        if out.shape == shape and self.m == 1:
            out = out[..., None]
        return np.broadcast_to(out, shape + (self.m,))

    def check_periodicity(self, d: int = 2, n: int = 64, tol: float = 1e-12, seed: int = 0) -> bool:
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, (n, 2))
        th = rng.uniform(0, 1, (n, d))
        base = self(x, th)
        return all(np.max(np.abs(self(x, th + np.eye(d)[k]) - base)) <= tol for k in range(d))

    def is_theta_independent(self, d: int = 2) -> bool:
        return self.modes is not None and all(not any(mode) for mode, _ in self.modes)


def cosine_data(mode=(1, 0), amplitude: float = 1.0, offset: float = 0.0) -> OscillatingData:
    """``offset + amplitude cos(2 pi mode.theta)`` with no dependence on ``x``."""
    mode = np.asarray(mode, dtype=float)

    def f(x, theta):
        return offset + amplitude * np.cos(2 * np.pi * theta @ mode)

    modes = [(tuple(mode.astype(int)), amplitude)] + ([((0,) * mode.size, offset)] if offset else [])
    return OscillatingData(f, 1, modes, "cos(" + ",".join(str(int(v)) for v in mode) + ")")


def modulated_data(g: Callable, mode=(1, 0)) -> OscillatingData:
    """``g(x) (1 + cos 2 pi mode.theta)``; its torus mean is ``g``."""
    mode = np.asarray(mode, dtype=float)

    def f(x, theta):
        return g(x) * (1.0 + np.cos(2 * np.pi * theta @ mode))

    return OscillatingData(f, 1, None, "modulated")


def smooth_data(g: Callable, name: str = "smooth") -> OscillatingData:
    """Data without oscillation, ``f(x, theta) = g(x)``."""
    return OscillatingData(lambda x, theta: g(x), 1, [((0, 0), 1.0)], name)


DATA_PRESETS = {
    "cos": lambda **kw: cosine_data(**kw),
    "constant": lambda value=1.0: smooth_data(lambda x: value + 0.0 * x[..., 0], "constant"),
    "linear": lambda a=1.0, b=0.0, c=0.0: smooth_data(lambda x: c + a * x[..., 0] + b * x[..., 1], "linear"),
    "modulated": lambda: modulated_data(lambda x: 1.0 + 0.5 * x[..., 0]),
}


def data_from_spec(name: str, **params) -> OscillatingData:
    try:
        return DATA_PRESETS[name](**params)
    except KeyError:
        raise ValueError(f"unknown data preset {name!r}; choose from {sorted(DATA_PRESETS)}") from None


# ---------------------------------------------------------------------------
# homogenized boundary data


class PipelineError(RuntimeError):
    pass


@dataclass
class HomogenizedBoundaryData:
    boundary: ParametricBoundary
    u: np.ndarray
    arclength: np.ndarray
    values: np.ndarray  # (n, m) with flagged entries already filled
    raw: np.ndarray  # values before filling (nan where flagged)
    kappa: np.ndarray
    flags: np.ndarray
    ahat: HomogenizedTensor
    info: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def at_arclength(self, s) -> np.ndarray:
        """Periodic piecewise-linear interpolation over reliable samples."""
        s = np.mod(np.asarray(s, dtype=float), self.boundary.length)
        keep = ~self.flags
        sk = self.arclength[keep]
        L = self.boundary.length
        xs = np.concatenate([sk - L, sk, sk + L])
        out = [np.interp(s, xs, np.tile(self.raw[keep, a], 3)) for a in range(self.m)]
        return np.stack(out, axis=-1)

    def at_parameter(self, u) -> np.ndarray:
        return self.at_arclength(self.boundary.arclength(np.mod(u, 1.0)))

    def scalar_sampler(self) -> Callable:
        return lambda u: self.at_parameter(u)[..., 0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "s", "x", "y", "kappa", "flagged"] + [f"fbar_{a + 1}" for a in range(self.m)])
            pts = self.boundary.point(self.u)
            for i in range(self.u.size):
                w.writerow([f"{self.u[i]:.12g}", f"{self.arclength[i]:.12g}", f"{pts[i, 0]:.12g}",
                            f"{pts[i, 1]:.12g}", f"{self.kappa[i]:.6g}", int(self.flags[i])]
                           + [f"{v:.15g}" for v in self.values[i]])


def _centered_gradient(u: np.ndarray, h: float) -> np.ndarray:
    """Periodic centered differences of ``(..., N, ..., N)`` over the trailing ``d`` axes."""
    d = u.ndim - 1 if u.ndim > 1 else 1
    out = []
    for ax in range(u.ndim - d, u.ndim):
        out.append((np.roll(u, -1, ax) - np.roll(u, 1, ax)) / (2 * h))
    return np.stack(out)


def sample_count(boundary: ParametricBoundary, eps: Optional[float] = None, minimum: int = 64) -> int:
    """``max(64, 4/sqrt(eps))`` samples per unit arclength."""
    density = minimum if eps is None else max(minimum, 4.0 / math.sqrt(eps))
    return int(math.ceil(density * boundary.length))


def _reduced_shape(field: CoefficientField, N: int) -> tuple:
    if field.laminate_axis is None:
        return (N,) * field.d
    return tuple(N if ax == field.laminate_axis else 1 for ax in range(field.d))


def _reduced_kappa(field: CoefficientField, n: np.ndarray, kap: float) -> float:
    """Decay scale of the layer data: a laminate only excites lattice vectors on its axis."""
    if field.laminate_axis is None:
        return kap
    e = np.zeros(field.d)
    e[field.laminate_axis] = 1.0
    return float(np.linalg.norm(e - (e @ n) * n))


def homogenized_data(boundary: ParametricBoundary, field: CoefficientField, f: OscillatingData,
                     n_samples: Optional[int] = None, N: int = 64, mu: Optional[float] = None,
                     R: int = 1000, correctors: Optional[CorrectorSet] = None,
                     flag_threshold: float = SLOW_DECAY_KAPPA, layer_rtol: float = 1e-10,
                     progress: Optional[Callable] = None) -> HomogenizedBoundaryData:
    """Sample ``fbar`` along ``boundary`` (equal arclength spacing).

    Laminate fields use a reduced torus grid (``N x 1``): the adjoint correctors
    and hence the layer data depend only on the laminate coordinate.
    """
    d, m = field.d, field.m
    if f.m != m:
        raise ValueError("data and coefficient field have different system sizes")
    n_samples = sample_count(boundary) if n_samples is None else int(n_samples)
    mu = default_mu(d, d - 1) if mu is None else mu
    grid = PeriodicGrid(d, N)
    adj = adjoint_field(field)
    chi_star = correctors if correctors is not None else solve_correctors(adj, grid)
    ahat = homogenized_tensor(adj, chi_star).adjoint()

    u, _ = boundary.arclength_samples(n_samples)
    s = boundary.arclength(u)
    pts = boundary.point(u)
    normals = boundary.normal(u)
    kap = kappa_many(normals, mu, R) if d == 2 else np.zeros(n_samples)

    theta = grid.nodes()  # (*shape, d)
    a_nodes = np.moveaxis(field(theta), tuple(range(d)), tuple(range(4, 4 + d)))  # (d, d, m, m, *shape)
    # chi*[j, nu] has components rho; gradient over torus axes -> (k, j, nu, rho, *shape)
    chi = chi_star.chi
    grad_chi = _centered_gradient(chi.reshape((-1,) + grid.shape), grid.h)
    grad_chi = grad_chi.reshape((d,) + chi.shape)

    red_shape = _reduced_shape(field, N)
    red_index = tuple(slice(None) if n > 1 else slice(0, 1) for n in red_shape)

    raw = np.full((n_samples, m), np.nan)
    # without correctors there is no layer to solve, hence nothing to flag
    needs_layer = bool(np.any(chi))
    flags = (kap < flag_threshold) if needs_layer else np.zeros(n_samples, dtype=bool)
    layer_stats = {"iterations": [], "T": []}
    for i in range(n_samples):
        if flags[i]:
            continue
        n = normals[i]
        chi_n = np.einsum("j,jnr...->nr...", n, chi)  # (nu, rho, *shape)
        k_eff = _reduced_kappa(field, n, kap[i])
        if needs_layer and k_eff < flag_threshold:
            flags[i] = True
            continue
        dtV = np.empty((m, m) + grid.shape)  # [nu, rho]
        for nu in range(m):
            data = -chi_n[nu][(slice(None),) + red_index]
            if not np.any(data):
                dtV[nu] = 0.0
                continue
            prob = LayerProblem(adj, n, data, shape=red_shape, T=default_height(k_eff),
                                kappa=k_eff, rtol=layer_rtol)
            sol = solve_layer(prob)
            dtV[nu] = np.broadcast_to(sol.dtV0, (m,) + grid.shape)
            layer_stats["iterations"].append(sol.info.iterations if sol.info else 0)
            layer_stats["T"].append(prob.T)
        # bracket[rho, nu](theta)
        nchi = np.einsum("k,knr...->nr...", n, np.einsum("j,kjnr...->knr...", n, grad_chi))
        bracket = np.eye(m).reshape((m, m) + (1,) * d) + np.swapaxes(nchi - dtV, 0, 1)
        a_nn = np.einsum("i,ijrb...,j->rb...", n, a_nodes, n)  # (rho, beta, *shape)
        fv = np.moveaxis(f(pts[i], theta), -1, 0)  # (beta, *shape)
        integrand = np.einsum("rn...,rb...,b...->n...", bracket, a_nn, fv)
        mean = integrand.reshape(m, -1).mean(axis=1)
        h = ahat.normal_inverse(n)
        raw[i] = h @ mean
        if progress is not None:
            progress(i, n_samples)
    if np.all(flags):
        raise PipelineError("every boundary sample was flagged as slowly decaying")
    values = raw.copy()
    good = np.flatnonzero(~flags)
    if flags.any():
        L = boundary.length
        for i in np.flatnonzero(flags):
            dist = np.abs(s[good] - s[i])
            dist = np.minimum(dist, L - dist)
            values[i] = raw[good[np.argmin(dist)]]
    info = {"n_samples": n_samples, "mu": mu, "R": R, "N": N, "reduced_shape": red_shape,
            "flagged": int(flags.sum()), "layer_solves": len(layer_stats["T"]),
            "mean_layer_iterations": float(np.mean(layer_stats["iterations"])) if layer_stats["T"] else 0.0}
    return HomogenizedBoundaryData(boundary, u, s, values, raw, kap, flags, ahat, info)


# ---------------------------------------------------------------------------
# regularity probe


@dataclass
class RegularityReport:
    q: np.ndarray
    spacings: np.ndarray
    norms: np.ndarray  # (levels, q)
    growth: np.ndarray  # finest / coarsest
    onset: Optional[float]
    q_star: Optional[float] = None

    def summary(self) -> str:
        lines = ["q      " + "  ".join(f"ds={h:.3g}" for h in self.spacings) + "  growth"]
        for j, q in enumerate(self.q):
            lines.append(f"{q:<6.3g} " + "  ".join(f"{v:9.4g}" for v in self.norms[:, j])
                         + f"  {self.growth[j]:.3g}")
        lines.append(f"growth onset near q = {self.onset}" + (f" (q* = {self.q_star})" if self.q_star else ""))
        return "\n".join(lines)


def regularity_probe(data: HomogenizedBoundaryData, q_grid: Sequence[float] = (0.25, 0.5, 1.0, 2.0),
                     levels: int = 3, growth_threshold: float = 1.5,
                     q_star_value: Optional[float] = None) -> RegularityReport:
    """Arclength difference-quotient ``L^q`` norms of ``fbar`` on nested subsamples."""
    n = data.u.size
    if n < 200:
        raise ValueError("the regularity probe needs at least 200 samples")
    q = np.asarray(q_grid, dtype=float)
    L = data.boundary.length
    norms, spacings = [], []
    for lev in range(levels - 1, -1, -1):
        step = 2 ** lev
        s = data.arclength[::step]
        v = data.values[::step]
        ds = np.diff(np.concatenate([s, [s[0] + L]]))
        dv = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        quot = dv / ds
        norms.append([np.sum(quot ** qq * ds) ** (1.0 / qq) for qq in q])
        spacings.append(float(np.mean(ds)))
    norms = np.array(norms)
    growth = norms[-1] / np.maximum(norms[0], 1e-300)
    over = np.flatnonzero(growth > growth_threshold)
    onset = float(q[over[0]]) if over.size else None
    return RegularityReport(q, np.array(spacings), norms, growth, onset, q_star_value)


__all__ = [
    "q_star", "alpha_star", "alpha_star_lower_bound", "alpha_star_closed_form", "rate_objective",
    "RateExponents", "rate_exponents", "OscillatingData", "cosine_data", "modulated_data", "smooth_data",
    "data_from_spec", "HomogenizedBoundaryData", "homogenized_data", "sample_count", "regularity_probe",
    "RegularityReport", "PipelineError",
]
