"""Stopping-time dyadic decomposition of a boundary patch.

The patch is parametrized by its tangent coordinate ``s`` over a base interval
``Q0``.  A dyadic interval ``Q`` is admissible when the sampled supremum of
``F`` over ``6Q`` (clamped to ``Q0``) is at most ``tau / |Q|``.  Admissibility
passes to children, so descending from ``Q0`` and stopping at the first
admissible interval yields exactly the maximal admissible dyadic intervals.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .diophantine import default_mu, kappa_many
from .geometry import LocalGraph, TangentProjection, bump

SAMPLES_PER_TAU = 64
SUP_SLACK = 0.05


@dataclass(frozen=True)
class DyadicCube:
    lo: float
    side: float
    level: int
    index: int
    flagged: bool = False

    @property
    def hi(self) -> float:
        return self.lo + self.side

    @property
    def center(self) -> float:
        return self.lo + 0.5 * self.side

    def parent(self, q0: "DyadicCube") -> Optional["DyadicCube"]:
        if self.level == 0:
            return None
        idx = self.index // 2
        side = 2 * self.side
        return DyadicCube(q0.lo + idx * side, side, self.level - 1, idx)

    def children(self):
        h = 0.5 * self.side
        return (DyadicCube(self.lo, h, self.level + 1, 2 * self.index),
                DyadicCube(self.lo + h, h, self.level + 1, 2 * self.index + 1))

    def enlarged(self, factor: float, clamp: Optional["DyadicCube"] = None):
        half = 0.5 * factor * self.side
        lo, hi = self.center - half, self.center + half
        if clamp is not None:
            lo, hi = max(lo, clamp.lo), min(hi, clamp.hi)
        return lo, hi


class SampledSup:
    """Sampled supremum of ``F`` over subintervals of ``Q0``.

    ``F`` is sampled once on a dyadic grid so that interval endpoints built
    from dyadic cubes fall on sample points.  The estimate is
    ``max + slack * (max - min)`` over the samples in the interval, which is
    monotone under inclusion.
    """

    def __init__(self, F: Callable, q0: DyadicCube, tau: float, samples_per_tau: int = SAMPLES_PER_TAU,
                 slack: float = SUP_SLACK):
        m = max(6, int(math.ceil(math.log2(samples_per_tau * q0.side / tau))))
        self.n = 2 ** m
        self.q0 = q0
        self.h = q0.side / self.n
        self.s = q0.lo + self.h * np.arange(self.n + 1)
        vals = np.asarray(F(self.s), dtype=float)
        if vals.shape != self.s.shape or not np.all(np.isfinite(vals)):
            raise ValueError("sampler must return finite values of the grid shape")
        if np.any(vals < 0):
            raise ValueError("F must be nonnegative")
        self.values = vals
        self.slack = slack

    def index_range(self, lo: float, hi: float):
        i0 = int(math.ceil((lo - self.q0.lo) / self.h - 1e-9))
        i1 = int(math.floor((hi - self.q0.lo) / self.h + 1e-9))
        return max(i0, 0), min(i1, self.n)

    def __call__(self, lo: float, hi: float) -> float:
        i0, i1 = self.index_range(lo, hi)
        seg = self.values[i0:i1 + 1]
        top, bot = float(seg.max()), float(seg.min())
        return top + self.slack * (top - bot)


@dataclass
class PartitionCZ:
    q0: DyadicCube
    tau: float
    cubes: list
    enlarge: float = 6.0
    sup: Optional[SampledSup] = field(default=None, repr=False)
    centers: Optional[np.ndarray] = None  # lifted centers on the curve
    surface_measures: Optional[np.ndarray] = None

    @property
    def sides(self) -> np.ndarray:
        return np.array([c.side for c in self.cubes])

    @property
    def lows(self) -> np.ndarray:
        return np.array([c.lo for c in self.cubes])

    @property
    def mids(self) -> np.ndarray:
        return np.array([c.center for c in self.cubes])

    @property
    def flagged(self) -> np.ndarray:
        return np.array([c.flagged for c in self.cubes])

    def admissible(self, cube: DyadicCube) -> bool:
        lo, hi = cube.enlarged(self.enlarge, self.q0)
        return self.sup(lo, hi) <= self.tau / cube.side

    def level_counts(self) -> dict:
        out: dict = {}
        for c in self.cubes:
            out[c.level] = out.get(c.level, 0) + 1
        return dict(sorted(out.items()))

    def count_bound(self, lams: Sequence[float]) -> list:
        """``(lam, #{side >= lam tau}, |{F <= 1/lam}|)`` rows for the cube-count diagnostic."""
        rows = []
        sides = self.sides
        for lam in lams:
            count = int(np.sum(sides >= lam * self.tau))
            measure = float(np.sum(self.sup.values <= 1.0 / lam) * self.sup.h)
            rows.append((float(lam), count, measure))
        return rows

    def to_csv(self, path) -> None:
        """Cube table: ``level, lo, side, center`` and, once lifted, the curve point and arclength."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            lifted = self.centers is not None
            w.writerow(["level", "lo", "side", "mid", "flagged"]
                       + (["x", "y", "surface_measure"] if lifted else []))
            for i, c in enumerate(self.cubes):
                row = [c.level, f"{c.lo:.17g}", f"{c.side:.17g}", f"{c.center:.17g}", int(c.flagged)]
                if lifted:
                    row += [f"{v:.12g}" for v in self.centers[i]] + [f"{self.surface_measures[i]:.12g}"]
                w.writerow(row)

    def check_structure(self) -> dict:
        """Exact cover, disjointness, neighbor ratios and the stopping rule."""
        lows, sides = self.lows, self.sides
        cover = bool(lows[0] == self.q0.lo and lows[-1] + sides[-1] == self.q0.hi
                     and np.all(lows[1:] == lows[:-1] + sides[:-1]))
        ratio = float(np.max(np.maximum(sides[1:] / sides[:-1], sides[:-1] / sides[1:]), initial=1.0))
        stop = all(self.admissible(c) for c in self.cubes if not c.flagged)
        parent = all(not self.admissible(c.parent(self.q0)) for c in self.cubes if c.level > 0)
        return {"cover": cover, "disjoint": cover, "neighbor_ratio": ratio,
                "stopping_rule": stop, "parent_violation": parent,
                "flagged": int(np.sum(self.flagged))}


def cz_decompose(F: Callable, tau: float, q0=(0.0, 1.0), enlarge: float = 6.0,
                 samples_per_tau: int = SAMPLES_PER_TAU, slack: float = SUP_SLACK) -> PartitionCZ:
    """Maximal dyadic subintervals ``Q`` of ``q0`` with ``sup_{6Q} F <= tau / |Q|``.

    Intervals still violating the rule once their side drops below ``tau / 2``
    are emitted with ``flagged=True``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    root = DyadicCube(float(q0[0]), float(q0[1]) - float(q0[0]), 0, 0)
    sup = SampledSup(F, root, tau, samples_per_tau, slack)
    part = PartitionCZ(root, tau, [], enlarge, sup)
    out = []
    stack = [root]
    while stack:
        cube = stack.pop()
        if part.admissible(cube):
            out.append(cube)
        elif cube.side < 0.5 * tau:
            out.append(replace(cube, flagged=True))
        else:
            stack.extend(reversed(cube.children()))
    out.sort(key=lambda c: c.lo)
    part.cubes = out
    return part


# ---------------------------------------------------------------------------
# lifting, bumps, witnesses


def _graph_of(patch):
    return patch.graph if isinstance(patch, TangentProjection) else patch


def lift_partition(patch, partition: PartitionCZ, quad_points: int = 16) -> PartitionCZ:
    """Attach surface centers ``P^{-1}(center)`` and surface measures of ``P^{-1}(Q_j)``."""
    graph: LocalGraph = _graph_of(patch)
    lo, hi = partition.q0.lo, partition.q0.hi
    if lo < -graph.radius - 1e-12 or hi > graph.radius + 1e-12:
        raise ValueError("base interval exceeds the graph patch")
    partition.centers = graph.lift(partition.mids)
    x, w = np.polynomial.legendre.leggauss(quad_points)
    a = partition.lows[:, None]
    b = (partition.lows + partition.sides)[:, None]
    pts = 0.5 * (b - a) * (x + 1) + a
    dens = np.sqrt(1.0 + graph.derivative(pts, 1) ** 2)
    partition.surface_measures = np.sum(0.5 * (b - a) * w * dens, axis=1)
    return partition


@dataclass
class BumpSet:
    partition: PartitionCZ

    def _eta(self, s):
        s = np.asarray(s, dtype=float)
        c = self.partition.mids
        r = self.partition.sides
        # profile rescaled to 2Q: support |s - c| < r
        return bump((s[..., None] - c) / r)

    def values(self, s) -> np.ndarray:
        """``phi_j(s)`` for every cube, shape ``s.shape + (n_cubes,)``."""
        eta = self._eta(s)
        return eta / np.sum(eta, axis=-1, keepdims=True)

    def total(self, s) -> np.ndarray:
        return np.sum(self.values(s), axis=-1)

    def overlap(self, s) -> np.ndarray:
        return np.sum(self._eta(s), axis=-1)

    def gradient_constants(self, n: int = 4001, h: Optional[float] = None) -> np.ndarray:
        """``max |phi_j'| * r_j`` per cube by central differences on ``Q0``."""
        q0 = self.partition.q0
        h = 1e-3 * self.partition.sides.min() if h is None else h
        pieces = [np.linspace(q0.lo, q0.hi, n)]
        pieces += [np.linspace(c.lo - 0.5 * c.side, c.hi + 0.5 * c.side, 65) for c in self.partition.cubes]
        sj = np.clip(np.unique(np.concatenate(pieces)), q0.lo + h, q0.hi - h)
        d = (self.values(sj + h) - self.values(sj - h)) / (2 * h)
        return np.max(np.abs(d), axis=0) * self.partition.sides

    def lower_bound_on_cubes(self) -> float:
        """``min_j min_{Q_j} phi_j`` (sampled)."""
        vals = [self.values(np.linspace(c.lo, c.hi, 33))[:, j].min()
                for j, c in enumerate(self.partition.cubes)]
        return float(min(vals))


def partition_of_unity(partition: PartitionCZ) -> BumpSet:
    return BumpSet(partition)


@dataclass(frozen=True)
class Witness:
    """Selected point: tangent coordinate ``s`` for graph patches, curve parameter ``u`` otherwise."""

    position: Optional[float]
    point: Optional[np.ndarray]
    kappa: float
    threshold: float
    flagged: bool


WITNESS_FACTOR = 0.45


def select_kappa_witness(partition: PartitionCZ, j: int, kappa_sampler: Callable, gamma: float,
                         patch=None, enlarge: float = 18.0, samples: int = 257,
                         factor: float = WITNESS_FACTOR) -> Witness:
    """Point of ``18 Q~_j`` maximizing ``kappa`` among points with ``kappa > (c tau / r_j)^gamma``.

    The parent of a stopped cube violates the rule somewhere in its 6-fold
    enlargement, which lies inside ``18 Q_j``; there ``F`` exceeds
    ``tau / (2 r_j)`` up to the sup slack, hence the default ``c = 0.45``.
    The sample points of that parent window are always candidates; their
    ``kappa`` values are read back from the sampled ``F = kappa^{1/gamma}``.

    With a curve patch, ``kappa_sampler`` is a function of the curve parameter
    and ``18 Q~_j`` is the arclength ball around the lifted center; otherwise it
    is a function of the tangent coordinate on the unclamped interval.  Ties go
    to the center, then to parameter order.
    """
    cube = partition.cubes[j]
    thr = (factor * partition.tau / cube.side) ** gamma
    extra = np.empty(0)
    if cube.level > 0 and partition.sup is not None:
        lo, hi = cube.parent(partition.q0).enlarged(partition.enlarge, partition.q0)
        i0, i1 = partition.sup.index_range(lo, hi)
        extra = partition.sup.s[i0:i1 + 1]
        k_extra = partition.sup.values[i0:i1 + 1] ** gamma
    else:
        k_extra = np.empty(0)
    graph = _graph_of(patch) if patch is not None else None
    boundary = getattr(graph, "boundary", None)
    if boundary is not None:
        u_c = float(graph.parameter_of(cube.center))
        half = 0.5 * enlarge * (partition.surface_measures[j] if partition.surface_measures is not None
                                else cube.side)
        half = min(half, 0.5 * boundary.length)
        s_c = float(boundary.arclength(u_c))
        pos = boundary.parameter_at_arclength(np.linspace(s_c - half, s_c + half, samples))
        pos = np.concatenate([[u_c], pos])
        where = boundary.point
    else:
        half = 0.5 * enlarge * cube.side
        pos = np.concatenate([[cube.center], np.linspace(cube.center - half, cube.center + half, samples)])
        where = graph.lift if graph is not None else None
    k = np.asarray(kappa_sampler(pos), dtype=float)
    if extra.size:
        pos = np.concatenate([pos, graph.parameter_of(extra) if boundary is not None else extra])
        k = np.concatenate([k, k_extra])
    ok = k > thr
    if not np.any(ok):
        return Witness(None, None, float(k.max()), thr, True)
    kk = np.where(ok, k, -np.inf)
    i = int(np.flatnonzero(kk == kk.max())[0])
    point = where(pos[i]) if where is not None else None
    return Witness(float(pos[i]), point, float(k[i]), thr, False)


class LayerPointError(ValueError):
    pass


def theta(x, partition: PartitionCZ, t: float, d: int = 2, layer_constant: float = 4.0) -> np.ndarray:
    """``Theta_t(x) = sum_j r_j^{d-1+t} / |x - x_j|^{d-1}`` for points outside the layer."""
    if partition.centers is None:
        raise ValueError("partition must be lifted first")
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, x.shape[-1])
    r = partition.sides
    dist = np.linalg.norm(flat[:, None, :] - partition.centers[None], axis=-1)
    bad = dist < layer_constant * r[None]
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise LayerPointError(
            f"point {flat[i]} lies within {layer_constant:g} r_j of cube {j} "
            f"(center {partition.centers[j]}, side {r[j]:.3g})")
    vals = np.sum(r ** (d - 1 + t) / dist ** (d - 1), axis=1)
    return vals.reshape(x.shape[:-1])


def size_and_sum_checks(partition: PartitionCZ, alpha: float = 0.5, d: int = 2) -> dict:
    r = partition.sides
    tau = partition.tau
    return {
        "tau": tau,
        "n_cubes": int(r.size),
        "r_min": float(r.min()),
        "r_max": float(r.max()),
        "r_min_over_tau": float(r.min() / tau),
        "r_max_over_sqrt_tau": float(r.max() / math.sqrt(tau)),
        "sum_constant": float(np.sum(r ** (d - 1 + alpha)) / tau ** alpha),
        "flagged": int(np.sum(partition.flagged)),
    }


# ---------------------------------------------------------------------------
# kappa-adapted partitions of boundary patches


def boundary_kappa(boundary, mu: float, R: int = 1000) -> Callable:
    """``u -> kappa(n(u))`` along the whole curve."""

    def kap(u):
        u = np.asarray(u, dtype=float)
        return kappa_many(boundary.normal(u).reshape(-1, 2), mu, R).reshape(u.shape)

    return kap


def kappa_profile(patch, mu: float, R: int = 1000) -> Callable:
    """``s -> kappa(n(P^{-1}(s)))`` along a curve patch."""
    graph = _graph_of(patch)

    def kap(s):
        s = np.asarray(s, dtype=float)
        slope = graph.derivative(s, 1)
        # outward normal of the graph point, rotated back to physical axes
        nn = (slope[..., None] * graph.tangent + graph.normal) / np.sqrt(1 + slope ** 2)[..., None]
        nn = nn / np.linalg.norm(nn, axis=-1, keepdims=True)
        return kappa_many(nn.reshape(-1, 2), mu, R).reshape(s.shape)

    return kap


def boundary_partition(patch, tau: float, gamma: float, half_width: Optional[float] = None,
                       mu: Optional[float] = None, R: int = 1000, enlarge: float = 6.0):
    """CZ partition for ``F = kappa^{1/gamma}`` on a curve patch, lifted to the curve.

    ``half_width`` defaults to the largest power of two inside the graph radius so
    that dyadic sides and dyadic ``tau`` values line up.
    """
    graph = _graph_of(patch)
    if half_width is None:
        half_width = 2.0 ** math.floor(math.log2(graph.radius))
    p = 1.0 / gamma  # d = 2
    mu = default_mu(2, p) if mu is None else mu
    kap = kappa_profile(graph, mu, R)
    part = cz_decompose(lambda s: kap(s) ** (1.0 / gamma), tau, (-half_width, half_width), enlarge)
    return lift_partition(graph, part), kap


__all__ = [
    "DyadicCube", "PartitionCZ", "SampledSup", "BumpSet", "Witness", "LayerPointError",
    "cz_decompose", "lift_partition", "partition_of_unity", "select_kappa_witness", "theta",
    "size_and_sum_checks", "kappa_profile", "boundary_kappa", "boundary_partition",
]
