"""Smooth closed boundary curves, local graphs and finite-type diagnostics.

Curves are written once as Python functions of the parameter ``u`` using the
dispatching math helpers from :mod:`homlab.jets`; the same code then gives
point samples (numpy) and exact Taylor coefficients of any order (jets).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from matplotlib.path import Path
from scipy import optimize

from . import jets
from .jets import Jet

DERIVATIVE_ORDER = 8
_TABLE = 8192


class GeometryError(ValueError):
    pass


@dataclass
class ParametricBoundary:
    """Closed counterclockwise curve ``c: [0, 1) -> R^2``.

    ``xy(u)`` must return ``(x, y)`` and be written with the helpers of
    :mod:`homlab.jets` so that it also accepts jets.
    """

    name: str
    xy: Callable
    interior: np.ndarray
    params: dict = field(default_factory=dict)
    graph_radius: float = 0.2
    order: int = DERIVATIVE_ORDER

    def __post_init__(self):
        self.interior = np.asarray(self.interior, dtype=float)
        u = (np.arange(_TABLE) + 0.0) / _TABLE
        self._u_table = u
        sp = self.speed(u)
        # trapezoid on a periodic integrand is spectrally accurate
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (sp + np.roll(sp, -1)))]) / _TABLE
        self._s_table = cum
        self.length = float(cum[-1])
        self._polygon = Path(self.point(np.linspace(0, 1, 4097)[:-1]))

    # -- evaluation -----------------------------------------------------
    def point(self, u) -> np.ndarray:
        x, y = self.xy(np.asarray(u, dtype=float))
        return np.stack(np.broadcast_arrays(x, y), axis=-1)

    def taylor(self, u, order: Optional[int] = None) -> np.ndarray:
        """Taylor coefficients ``c^(j)(u)/j!``, shape ``(order+1, ..., 2)``."""
        order = self.order if order is None else order
        x, y = self.xy(Jet.variable(u, order))
        return np.stack([x.c, y.c], axis=-1)

    def derivative(self, u, k: int) -> np.ndarray:
        return math.factorial(k) * self.taylor(u, k)[k]

    def speed(self, u) -> np.ndarray:
        return np.linalg.norm(self.derivative(u, 1), axis=-1)

    def tangent(self, u) -> np.ndarray:
        d1 = self.derivative(u, 1)
        return d1 / np.linalg.norm(d1, axis=-1, keepdims=True)

    def normal(self, u) -> np.ndarray:
        """Outward unit normal (tangent rotated clockwise)."""
        t = self.tangent(u)
        return np.stack([t[..., 1], -t[..., 0]], axis=-1)

    def curvature(self, u) -> np.ndarray:
        tc = self.taylor(u, 2)
        d1, d2 = tc[1], 2 * tc[2]
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.linalg.norm(d1, axis=-1) ** 3

    # -- arclength ------------------------------------------------------
    def arclength(self, u) -> np.ndarray:
        """Arclength from ``u = 0`` (table interpolation refined by quadrature)."""
        u = np.asarray(u, dtype=float)
        frac = np.mod(u, 1.0)
        turns = np.floor(u)
        i = np.minimum((frac * _TABLE).astype(int), _TABLE - 1)
        u0 = self._u_table[i]
        # 4-point Gauss-Legendre on the residual piece
        x, w = np.polynomial.legendre.leggauss(4)
        h = frac - u0
        pts = u0[..., None] + 0.5 * h[..., None] * (x + 1)
        rem = 0.5 * h * np.sum(w * self.speed(pts), axis=-1)
        return turns * self.length + self._s_table[i] + rem

    def parameter_at_arclength(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        turns = np.floor(s / self.length)
        sr = s - turns * self.length
        u = np.interp(sr, self._s_table, np.linspace(0, 1, _TABLE + 1))
        for _ in range(3):
            u = u - (self.arclength(u) - sr) / self.speed(u)
        return u + turns

    def arclength_samples(self, n: int, offset: float = 0.0):
        """``n`` parameters equally spaced in arclength and their measure weights."""
        s = (np.arange(n) + offset) * self.length / n
        return np.mod(self.parameter_at_arclength(s), 1.0), np.full(n, self.length / n)

    # -- geometry helpers -------------------------------------------------
    def contains(self, pts, radius: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, 2)
        return self._polygon.contains_points(flat, radius=radius).reshape(pts.shape[:-1])

    def area(self) -> float:
        x, w = np.polynomial.legendre.leggauss(64)
        u = np.linspace(0, 1, 257)
        a = 0.0
        for lo, hi in zip(u[:-1], u[1:]):
            uu = 0.5 * (hi - lo) * (x + 1) + lo
            p, d = self.point(uu), self.derivative(uu, 1)
            a += 0.5 * (hi - lo) * np.sum(w * 0.5 * (p[:, 0] * d[:, 1] - p[:, 1] * d[:, 0]))
        return float(a)

    def validate(self, n: int = 2048) -> None:
        u = np.arange(n) / n
        if np.min(self.speed(u)) <= 0:
            raise GeometryError(f"{self.name}: curve has a stationary point")
        if np.linalg.norm(self.point(0.0) - self.point(1.0 - 1e-15)) > 1e-12:
            raise GeometryError(f"{self.name}: curve is not closed")
        if np.linalg.norm(self.point(0.0) - self.point(1.0)) > 1e-12:
            raise GeometryError(f"{self.name}: curve is not closed")
        out = np.sum((self.point(u) - self.interior) * self.normal(u), axis=-1)
        if np.min(out) <= 0:
            raise GeometryError(f"{self.name}: normal is not outward (or curve is clockwise)")
        if not self.contains(self.interior[None])[0]:
            raise GeometryError(f"{self.name}: interior point lies outside the curve")


# ---------------------------------------------------------------------------
# presets


def ellipse(a: float = 1.0, b: float = 0.6, center=(0.0, 0.0)) -> ParametricBoundary:
    cx, cy = center

    def xy(u):
        t = 2 * math.pi * u
        return cx + a * jets.cos(t), cy + b * jets.sin(t)

    kmax = max(a / b ** 2, b / a ** 2)
    return ParametricBoundary(f"ellipse({a:g},{b:g})", xy, np.array(center, float),
                              {"a": a, "b": b, "center": tuple(center)},
                              graph_radius=min(0.5 / kmax, 0.5 * min(a, b)))


def circle(r: float = 1.0, center=(0.0, 0.0)) -> ParametricBoundary:
    bd = ellipse(r, r, center)
    bd.name = f"circle({r:g})"
    bd.params = {"r": r, "center": tuple(center)}
    return bd


def superellipse(k: int = 4, a: float = 1.0, b: float = 1.0, center=(0.0, 0.0)) -> ParametricBoundary:
    """``|x/a|^k + |y/b|^k = 1`` in polar form; smooth for even ``k``, flat to order ``k`` at the axis points."""
    if k < 2 or k % 2:
        raise GeometryError("superellipse exponent must be even and at least 2")
    cx, cy = center

    def xy(u):
        t = 2 * math.pi * u
        c, s = jets.cos(t), jets.sin(t)
        r = ((c * (1.0 / a)) ** k + (s * (1.0 / b)) ** k) ** (-1.0 / k)
        return cx + r * c, cy + r * s

    bd = ParametricBoundary(f"superellipse({k},{a:g},{b:g})", xy, np.array(center, float),
                            {"k": k, "a": a, "b": b, "center": tuple(center)})
    bd.graph_radius = 0.25 / max(1.0, float(np.max(np.abs(bd.curvature(np.arange(2048) / 2048)))))
    bd.graph_radius = min(bd.graph_radius, 0.2 * min(a, b))
    return bd


def fourier_radius(r0: float, cos_coeffs: Sequence[float] = (), sin_coeffs: Sequence[float] = (),
                   center=(0.0, 0.0)) -> ParametricBoundary:
    """Star-shaped curve ``r(phi) = r0 + sum_k a_k cos(k phi) + b_k sin(k phi)``."""
    ca = [float(v) for v in cos_coeffs]
    sa = [float(v) for v in sin_coeffs]
    if r0 - sum(map(abs, ca)) - sum(map(abs, sa)) <= 0:
        raise GeometryError("radius function must stay positive")
    cx, cy = center

    def xy(u):
        t = 2 * math.pi * u
        r = r0 + 0.0 * t
        for kk, v in enumerate(ca, start=1):
            r = r + v * jets.cos(kk * t)
        for kk, v in enumerate(sa, start=1):
            r = r + v * jets.sin(kk * t)
        return cx + r * jets.cos(t), cy + r * jets.sin(t)

    bd = ParametricBoundary("fourier", xy, np.array(center, float),
                            {"r0": r0, "cos": ca, "sin": sa, "center": tuple(center)})
    bd.graph_radius = min(0.2 * r0, 0.25 / max(1.0, float(np.max(np.abs(bd.curvature(np.arange(2048) / 2048))))))
    return bd


BOUNDARY_PRESETS = {
    "ellipse": ellipse,
    "circle": circle,
    "superellipse": superellipse,
    "fourier": fourier_radius,
}


def boundary_from_spec(name: str, **params) -> ParametricBoundary:
    try:
        factory = BOUNDARY_PRESETS[name]
    except KeyError:
        raise GeometryError(f"unknown boundary preset {name!r}") from None
    bd = factory(**params)
    bd.validate()
    return bd


# ---------------------------------------------------------------------------
# local graphs


class LocalGraph:
    """Graph ``x_d = phi(s)`` of a boundary patch over its tangent line.

    Subclasses provide :meth:`taylor`.  Coordinates: ``s = (x - x0).T`` and
    ``phi = -(x - x0).n0`` so convex domains have ``phi >= 0``.
    """

    radius: float
    x0: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray

    def taylor(self, s, order: int) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, s, k: int) -> np.ndarray:
        return math.factorial(k) * self.taylor(s, k)[k]

    def value(self, s) -> np.ndarray:
        return self.taylor(s, 0)[0]

    def lift(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return (self.x0 + s[..., None] * self.tangent
                - self.value(s)[..., None] * self.normal)

    def samples(self, n: int = 401) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, n | 1)


class FunctionGraph(LocalGraph):
    """Graph given directly by a jet-compatible function ``phi(s)``."""

    def __init__(self, func: Callable, radius: float = 1.0, name: str = "phi"):
        self.func = func
        self.radius = radius
        self.name = name
        self.x0 = np.zeros(2)
        self.tangent = np.array([1.0, 0.0])
        self.normal = np.array([0.0, -1.0])

    def taylor(self, s, order: int) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = self.func(Jet.variable(s, max(order, 1)))
        if not isinstance(out, Jet):
            c = np.zeros((max(order, 1) + 1,) + s.shape)
            c[0] = out
            return c
        return np.broadcast_to(out.c, (out.c.shape[0],) + s.shape)


def monomial_graph(k: int, radius: float = 1.0) -> FunctionGraph:
    return FunctionGraph(lambda s: s ** k, radius, f"s^{k}")


class CurveGraph(LocalGraph):
    """Local graph of a :class:`ParametricBoundary` at parameter ``u0``."""

    def __init__(self, boundary: ParametricBoundary, u0: float, radius: Optional[float] = None):
        self.boundary = boundary
        self.u0 = float(u0)
        self.radius = boundary.graph_radius if radius is None else float(radius)
        self.x0 = boundary.point(self.u0)
        self.tangent = boundary.tangent(self.u0)
        self.normal = boundary.normal(self.u0)
        self._speed0 = float(boundary.speed(self.u0))
        # the patch must project injectively onto the tangent line
        uu = self.parameter_of(np.linspace(-self.radius, self.radius, 201))
        ds = boundary.derivative(uu, 1) @ self.tangent
        if np.min(ds) <= 0.05 * self._speed0:
            raise GeometryError("patch is not a graph over the tangent line; reduce the radius")

    def parameter_of(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        u = self.u0 + s / self._speed0
        for _ in range(60):
            tc = self.boundary.taylor(u, 1)
            f = (tc[0] - self.x0) @ self.tangent - s
            df = tc[1] @ self.tangent
            if np.any(df <= 0):
                raise GeometryError("vertical tangency inside the patch")
            step = f / df
            u = u - step
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return u

    def taylor(self, s, order: int) -> np.ndarray:
        order = max(order, 1)
        u = self.parameter_of(s)
        tc = self.boundary.taylor(u, order)
        sc = tc @ self.tangent
        wc = -(tc @ self.normal)
        wc[0] += self.x0 @ self.normal
        sc[0] = 0.0
        inv = jets.revert(sc)
        return jets.compose(wc, inv)


def local_graph(boundary: ParametricBoundary, x0, r: Optional[float] = None) -> CurveGraph:
    """Local graph at the boundary point nearest to ``x0`` (a point or a parameter)."""
    u0 = x0 if np.ndim(x0) == 0 else nearest_parameter(boundary, x0)
    return CurveGraph(boundary, u0, r)


def nearest_parameter(boundary: ParametricBoundary, x) -> float:
    x = np.asarray(x, dtype=float)
    u = np.arange(4096) / 4096
    i = int(np.argmin(np.linalg.norm(boundary.point(u) - x, axis=-1)))

    def dist2(v):
        return float(np.sum((boundary.point(v) - x) ** 2))

    res = optimize.minimize_scalar(dist2, bracket=(u[i] - 1 / 4096, u[i], u[i] + 1 / 4096),
                                   tol=1e-14)
    return float(np.mod(res.x, 1.0))


# ---------------------------------------------------------------------------
# finite type


@dataclass(frozen=True)
class TypeCertificate:
    k: int
    order: int
    delta: float
    radius: float
    resolution: int


def type_at(graph: LocalGraph, k_max: int = 8, delta_min: float = 1e-6,
            resolution: int = 401) -> Optional[TypeCertificate]:
    """Smallest ``k <= k_max`` with ``min |phi^(j)| >= delta_min`` on the patch for some ``1 < j <= k``."""
    s = graph.samples(resolution)
    tc = graph.taylor(s, k_max)
    for j in range(2, k_max + 1):
        m = float(np.min(np.abs(math.factorial(j) * tc[j])))
        if m >= delta_min:
            return TypeCertificate(j, j, m, graph.radius, s.size)
    return None


def classify_boundary(boundary: ParametricBoundary, n_points: int = 64, radius: float = 0.02,
                      k_max: int = 8, delta_min: float = 1e-6, u=None):
    """Per-point type over arclength-equispaced points; ``0`` where no order qualifies."""
    if u is None:
        u, _ = boundary.arclength_samples(n_points)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    types = np.zeros(u.size, dtype=int)
    deltas = np.zeros(u.size)
    for i, ui in enumerate(u):
        cert = type_at(CurveGraph(boundary, ui, radius), k_max, delta_min)
        if cert is not None:
            types[i], deltas[i] = cert.k, cert.delta
    return u, types, deltas


def sublevel_measure(g: Callable, interval=(-1.0, 1.0), t: float = 0.5, n_grid: int = 4001) -> float:
    """Measure of ``{x in B : |g(x)| <= t}`` with crossings located by root finding.

    Sign changes and discrete local minima of ``|g|`` are refined first so that
    thin components between grid points are not lost.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    lo, hi = map(float, interval)
    x = np.linspace(lo, hi, n_grid)
    gx = np.asarray(g(x), dtype=float)
    ax = np.abs(gx)
    extra = []
    sign = np.flatnonzero(np.sign(gx[:-1]) * np.sign(gx[1:]) < 0)
    for i in sign:
        extra.append(optimize.brentq(g, x[i], x[i + 1], xtol=1e-15))
    loc = np.flatnonzero((ax[1:-1] <= ax[:-2]) & (ax[1:-1] <= ax[2:])) + 1
    for i in loc:
        if ax[i] <= t:
            continue
        r = optimize.minimize_scalar(lambda v: abs(float(g(np.array([v]))[0])),
                                     bounds=(x[i - 1], x[i + 1]), method="bounded",
                                     options={"xatol": 1e-14})
        extra.append(float(r.x))
    if extra:
        xe = np.asarray(extra)
        x = np.concatenate([x, xe])
        ax = np.concatenate([ax, np.abs(np.asarray(g(xe), dtype=float))])
        order = np.argsort(x, kind="stable")
        x, ax = x[order], ax[order]
    inside = ax <= t
    tol = 1e-6 * (hi - lo) * 1e-6

    def edge(a, b):
        return optimize.brentq(lambda v: abs(float(g(np.array([v]))[0])) - t, a, b, xtol=tol)

    total = 0.0
    start = lo if inside[0] else None
    for i in range(1, x.size):
        if inside[i] and not inside[i - 1]:
            start = edge(x[i - 1], x[i]) if x[i] > x[i - 1] else x[i]
        elif not inside[i] and inside[i - 1]:
            end = edge(x[i - 1], x[i]) if x[i] > x[i - 1] else x[i]
            total += end - start
            start = None
    if start is not None:
        total += hi - start
    return float(total)


@dataclass
class SublevelFit:
    exponent: float
    t: np.ndarray
    measures: np.ndarray
    residual: float
    resonant: bool = False
    degenerate: bool = False


def _fit_loglog(x, y):
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    return float(coef[0]), float(coef[1]), resid


def sublevel_exponent(g: Callable, interval=(-1.0, 1.0), t_grid=None) -> SublevelFit:
    t = np.geomspace(1e-6, 1e-2, 9) if t_grid is None else np.asarray(t_grid, dtype=float)
    meas = np.array([sublevel_measure(g, interval, ti) for ti in t])
    return _sublevel_fit(t, meas, interval[1] - interval[0])


def _sublevel_fit(t, meas, width):
    if np.all(meas <= 0):
        return SublevelFit(math.nan, t, meas, math.nan, degenerate=True)
    if np.all(meas >= width * (1 - 1e-12)):
        return SublevelFit(0.0, t, meas, 0.0, resonant=True)
    ok = meas > 0
    slope, _, resid = _fit_loglog(t[ok], meas[ok])
    return SublevelFit(slope, t, meas, resid)


def gradient_sublevel_exponent(graph: LocalGraph, t_grid=None) -> SublevelFit:
    """Fit ``p`` in ``|{s : |phi'(s)| <= t}| ~ t^p`` over the patch."""
    t = np.geomspace(1e-7, 1e-4, 7) if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.log10(t.max() / t.min()) < 3 - 1e-9:
        raise ValueError("t grid must span at least three decades")
    r = graph.radius
    meas = np.array([sublevel_measure(lambda s: graph.derivative(s, 1), (-r, r), ti) for ti in t])
    return _sublevel_fit(t, meas, 2 * r)


# ---------------------------------------------------------------------------
# oscillatory integrals


class UnderResolvedError(ValueError):
    pass


def bump(x) -> np.ndarray:
    """``exp(1 - 1/(1 - x^2))`` on ``(-1, 1)``, zero outside."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - x[m] ** 2))
    return out


def oscillatory_integral(phase: Callable, lam: float, amplitude: Callable = bump,
                         interval=(-1.0, 1.0), points_per_oscillation: float = 20.0,
                         panel_order: int = 10, nodes: Optional[int] = None) -> complex:
    """``int exp(i lam phase(x)) amplitude(x) dx`` by composite Gauss-Legendre.

    The node count is chosen from the largest phase slope; an explicit
    ``nodes`` below ``points_per_oscillation`` per oscillation is refused.
    """
    lo, hi = map(float, interval)
    xs = np.linspace(lo, hi, 20001)
    slope = np.max(np.abs(np.gradient(np.asarray(phase(xs), dtype=float), xs)))
    oscillations = lam * slope * (hi - lo) / (2 * math.pi)
    needed = int(math.ceil(max(oscillations, 1.0) * points_per_oscillation))
    if nodes is None:
        nodes = max(needed, 200)
    elif nodes < needed:
        raise UnderResolvedError(
            f"{nodes} nodes for {oscillations:.1f} oscillations; need at least {needed}")
    panels = int(math.ceil(nodes / panel_order))
    gx, gw = np.polynomial.legendre.leggauss(panel_order)
    edges = np.linspace(lo, hi, panels + 1)
    total = 0j
    chunk = 200_000
    for start in range(0, panels, chunk):
        stop = min(start + chunk, panels)
        a = edges[start:stop][:, None]
        b = edges[start + 1:stop + 1][:, None]
        x = 0.5 * (b - a) * (gx + 1) + a
        w = 0.5 * (b - a) * gw
        total += np.sum(w * np.exp(1j * lam * phase(x)) * amplitude(x))
    return complex(total)


@dataclass
class DecayFit:
    exponent: float
    lams: np.ndarray
    values: np.ndarray
    residual: float


def decay_fit(phase: Callable, lams=None, amplitude: Callable = bump, interval=(-1.0, 1.0)) -> DecayFit:
    lams = np.geomspace(1e2, 1e5, 13) if lams is None else np.asarray(lams, dtype=float)
    vals = np.array([abs(oscillatory_integral(phase, lam, amplitude, interval)) for lam in lams])
    slope, _, resid = _fit_loglog(lams, vals)
    return DecayFit(slope, lams, vals, resid)


# ---------------------------------------------------------------------------
# tangent projection


@dataclass
class TangentProjection:
    """``P(x) = x - ((x - x0).n0) n0`` on an arclength patch and its inverse."""

    graph: CurveGraph
    s_range: tuple

    @property
    def x0(self) -> np.ndarray:
        return self.graph.x0

    def coordinate(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.x0) @ self.graph.tangent

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n0 = self.graph.normal
        return x - ((x - self.x0) @ n0)[..., None] * n0

    def inverse(self, z) -> np.ndarray:
        """Boundary point above the tangent-plane point ``z`` (a point or a tangent coordinate)."""
        s = np.asarray(z, dtype=float)
        if s.ndim and s.shape[-1] == 2:
            s = self.coordinate(s)
        lo, hi = self.s_range
        if np.any(s < lo - 1e-12) or np.any(s > hi + 1e-12):
            raise GeometryError("point lies outside the projected patch")
        return self.graph.lift(s)

    def density(self, s) -> np.ndarray:
        """Surface measure per unit tangent length, ``sqrt(1 + phi'^2)``."""
        return np.sqrt(1.0 + self.graph.derivative(s, 1) ** 2)


def project_to_tangent(boundary: ParametricBoundary, x0, radius: float) -> TangentProjection:
    """Projection of the boundary patch within arclength ``radius`` of ``x0``."""
    u0 = x0 if np.ndim(x0) == 0 else nearest_parameter(boundary, x0)
    s0 = boundary.arclength(u0)
    ends = boundary.parameter_at_arclength(np.array([s0 - radius, s0 + radius]))
    graph = CurveGraph(boundary, u0, max(boundary.graph_radius, 1.05 * radius))
    p = boundary.point(ends)
    coords = (p - graph.x0) @ graph.tangent
    return TangentProjection(graph, (float(coords[0]), float(coords[1])))


__all__ = [
    "ParametricBoundary", "LocalGraph", "CurveGraph", "FunctionGraph", "TypeCertificate",
    "SublevelFit", "DecayFit", "TangentProjection", "GeometryError", "UnderResolvedError",
    "ellipse", "circle", "superellipse", "fourier_radius", "boundary_from_spec",
    "local_graph", "nearest_parameter", "type_at", "classify_boundary", "sublevel_measure",
    "sublevel_exponent", "gradient_sublevel_exponent", "oscillatory_integral", "decay_fit",
    "bump", "monomial_graph", "project_to_tangent",
]
