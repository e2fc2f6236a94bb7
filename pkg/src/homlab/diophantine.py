"""Diophantine constants of unit directions and weak-L^p statistics over boundaries.

For a unit vector ``n`` and exponent ``mu`` the truncated constant is

    kappa_R(n) = min_{0 < |xi| <= R} |(I - n n^T) xi| * |xi|**mu

over integer vectors ``xi``.  It is an upper bound for the true infimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_R = {2: 1000, 3: 60}
NODE_BUDGET = 10_000_000
# projections below this multiple of |xi| are rounding noise: xi is parallel to n
PARALLEL_TOL = 8 * np.finfo(float).eps


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValueError("zero vector has no direction")
    return v / nv


def direction_from_angle(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def default_mu(d: int, p: float, margin: float = 0.5) -> float:
    """Smallest ``mu`` with ``p (1 + mu) > d``, plus ``margin``."""
    return max(d / p - 1.0, 0.0) + margin


@dataclass(frozen=True)
class DiophantineEstimate:
    direction: np.ndarray
    mu: float
    R: float
    value: float
    witness: tuple
    partial: bool = False
    nodes: int = 0

    def check(self) -> bool:
        xi = np.asarray(self.witness, dtype=float)
        return math.isclose(_objective(self.direction, xi, self.mu), self.value,
                            rel_tol=1e-12, abs_tol=1e-300)


def _objective(n, xi, mu):
    xi = np.asarray(xi, dtype=float)
    proj = float(np.linalg.norm(xi - np.dot(xi, n) * n))
    if proj <= PARALLEL_TOL * np.linalg.norm(xi):
        return 0.0
    return proj * float(np.linalg.norm(xi)) ** mu


def _kappa_2d(n: np.ndarray, mu: float, R: int):
    vals, wits, nodes = _kappa_2d_many(n[None, :], mu, R)
    return vals[0], wits[0], nodes


def _kappa_2d_many(dirs: np.ndarray, mu: float, R: float, witnesses: bool = True):
    """Vectorized exact d = 2 minimum for many directions.

    Returns ``(values, witnesses, nodes)``.  For each direction let ``a`` be the
    dominant axis.  For fixed ``xi_a = s`` the projection ``|n_a xi_b - n_b s|``
    as a function of integer ``xi_b`` is smallest at ``floor``/``ceil`` of
    ``s n_b / n_a``.  Any other integer gives projection at least ``|n_a|`` and
    so an objective of at least ``|n_a|``, which the candidates ``xi = +-e_b``
    already attain.  Since ``xi`` and ``-xi`` tie, only ``s >= 0`` is scanned.
    """
    dirs = np.asarray(dirs, dtype=float)
    M = dirs.shape[0]
    rows = np.arange(M)
    dom = (np.abs(dirs[:, 1]) > np.abs(dirs[:, 0])).astype(int)
    na = np.abs(dirs[rows, dom])
    # sign-normalize so that n_a > 0; the objective only depends on the line
    ratio = dirs[rows, 1 - dom] / dirs[rows, dom]
    R2 = float(R) ** 2
    Ri = int(math.floor(R))
    s = np.arange(0, Ri + 1, dtype=float)
    t = ratio[:, None] * s[None, :]
    fl = np.floor(t)
    frac = t - fl
    best = np.full(M, np.inf)
    for xb, dist in ((fl, frac), (fl + 1.0, 1.0 - frac)):
        len2 = s[None, :] ** 2 + xb ** 2
        proj = na[:, None] * dist
        proj[proj <= PARALLEL_TOL * np.sqrt(len2)] = 0.0
        val = proj * len2 ** (0.5 * mu)
        val[(len2 == 0) | (len2 > R2)] = np.inf
        best = np.minimum(best, val.min(axis=1))
    # the unit vectors +-e_b (s = 0 also covers e_b through ceil(0))
    best = np.minimum(best, na)
    # recover canonical witnesses only for the minimizing entries
    wit = np.zeros((M, 2), dtype=np.int64)
    for i in range(M if witnesses else 0):
        cands = []
        for xb, dist in ((fl[i], frac[i]), (fl[i] + 1.0, 1.0 - frac[i])):
            len2 = s ** 2 + xb ** 2
            proj = na[i] * dist
            proj[proj <= PARALLEL_TOL * np.sqrt(len2)] = 0.0
            val = proj * len2 ** (0.5 * mu)
            val[(len2 == 0) | (len2 > R2)] = np.inf
            for k in np.flatnonzero(val == best[i]):
                cands.append((int(s[k]), int(xb[k])))
        if na[i] == best[i]:
            cands += [(0, 1)]
        phys = []
        for a_, b_ in cands:
            v = (a_, b_) if dom[i] == 0 else (b_, a_)
            phys.append(_canonical(v))
        wit[i] = min(phys)
    return best, wit, M * (2 * Ri + 2)


def _kappa_enumerate(n: np.ndarray, mu: float, R: int, budget: int):
    """Exhaustive enumeration over the ball ``|xi| <= R`` in shells of increasing radius."""
    d = n.size
    R2 = float(R) ** 2
    R = int(math.floor(R))
    best = math.inf
    witness: Optional[tuple] = None
    nodes = 0
    partial = False
    rng = np.arange(-R, R + 1)
    # slabs along the first axis keep memory bounded
    for a in rng:
        rest = R2 - a * a
        if rest < 0:
            continue
        r = int(math.floor(math.sqrt(rest)))
        axes = [np.arange(-r, r + 1)] * (d - 1)
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d - 1)
        grid = grid[np.sum(grid ** 2, axis=1) <= rest]
        xi = np.concatenate([np.full((grid.shape[0], 1), a), grid], axis=1)
        nodes += xi.shape[0]
        if nodes > budget:
            partial = True
            break
        len2 = np.sum(xi.astype(float) ** 2, axis=1)
        keep = len2 > 0
        xi, len2 = xi[keep], len2[keep]
        if xi.size == 0:
            continue
        proj = np.linalg.norm(xi - np.outer(xi @ n, n), axis=1)
        proj[proj <= PARALLEL_TOL * np.sqrt(len2)] = 0.0
        vals = proj * len2 ** (mu / 2)
        vmin = vals.min()
        w = min(_canonical(c) for c in xi[vals == vmin])
        if witness is None or (vmin, w) < (best, witness):
            best, witness = float(vmin), w
    return best, witness, nodes, partial


def _canonical(xi) -> tuple:
    xi = [int(c) for c in xi]
    lead = next(c for c in xi if c != 0)
    return tuple(-c for c in xi) if lead < 0 else tuple(xi)


def kappa(n, mu: float, R: Optional[float] = None, budget: int = NODE_BUDGET) -> DiophantineEstimate:
    """Truncated Diophantine constant of the direction ``n``.

    Parameters
    ----------
    n : array_like
        Direction in R^2 or R^3 (normalized internally; must be unit to 1e-14
        if given as a unit vector).
    mu : float
        Exponent, positive.
    R : float, optional
        Cutoff radius, defaults to 1000 (d=2) or 60 (d=3).
    """
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-14:
        raise ValueError("direction must be a unit vector")
    if mu <= 0:
        raise ValueError("mu must be positive")
    d = n.size
    R = DEFAULT_R.get(d, 60) if R is None else R
    if R < 1:
        raise ValueError("cutoff radius must be at least 1")
    if d == 2:
        value, wit, nodes = _kappa_2d(n, mu, R)
        return DiophantineEstimate(n, mu, R, float(value), (int(wit[0]), int(wit[1])),
                                   nodes=int(nodes))
    if d == 3:
        value, wit, nodes, partial = _kappa_enumerate(n, mu, R, budget)
        return DiophantineEstimate(n, mu, R, value, wit, partial, nodes)
    raise ValueError("only d = 2 and d = 3 are supported")


def kappa_many(normals: np.ndarray, mu: float, R: Optional[int] = None) -> np.ndarray:
    """Vectorized ``kappa`` values for an array of planar unit directions ``(M, 2)``."""
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    if normals.shape[1] != 2:
        return np.array([kappa(v, mu, R).value for v in normals])
    R = DEFAULT_R[2] if R is None else int(R)
    out = np.empty(normals.shape[0])
    chunk = max(1, 2_000_000 // (R + 1))
    for start in range(0, normals.shape[0], chunk):
        vals, _, _ = _kappa_2d_many(normals[start:start + chunk], mu, R, witnesses=False)
        out[start:start + chunk] = vals
    return out


def kappa_bruteforce(n, mu: float, R: int, rotation: Optional[np.ndarray] = None):
    """Reference minimum over the full integer box, optionally with a rotated lattice.

    With ``rotation`` ``O`` the objective is evaluated for ``O xi`` against ``O n``,
    which leaves it unchanged since ``O`` is orthogonal.
    """
    n = np.asarray(n, dtype=float)
    d = n.size
    rng = np.arange(-R, R + 1)
    xi = np.stack(np.meshgrid(*([rng] * d), indexing="ij"), axis=-1).reshape(-1, d)
    len2 = np.sum(xi ** 2, axis=1)
    xi = xi[(len2 > 0) & (len2 <= R * R)].astype(float)
    if rotation is not None:
        xi = xi @ np.asarray(rotation).T
        n = np.asarray(rotation) @ n
    proj = xi - np.outer(xi @ n, n)
    vals = np.linalg.norm(proj, axis=1) * np.linalg.norm(xi, axis=1) ** mu
    return float(vals.min())


def h_omega(omega, n) -> float:
    """``1 / sqrt(1 - (omega.n)^2)``, cross-checked against ``1 / |(I - n n^T) omega|``.

    Returns ``math.inf`` for resonant pairs ``omega = +-n``.
    """
    omega = np.asarray(omega, dtype=float)
    n = np.asarray(n, dtype=float)
    for v in (omega, n):
        if abs(np.linalg.norm(v) - 1.0) > 1e-14:
            raise ValueError("h_omega expects unit vectors")
    c = float(np.dot(omega, n))
    a = math.sqrt(max(0.0, 1.0 - c * c))
    b = float(np.linalg.norm(omega - c * n))
    if abs(a - b) > 1e-12:
        raise ArithmeticError(f"projection identity failed: {a} vs {b}")
    if b == 0.0 or a == 0.0:
        return math.inf
    return 1.0 / b


@dataclass
class WeakLpReport:
    """Weak-L^p quasi-norm of ``1/kappa`` estimated from weighted samples.

    ``statistic = sup_t t^{-1} sigma{kappa <= t}^{1/p}`` over the dyadic thresholds
    and the sample jump points, i.e. ``sup_s s * sigma{1/kappa >= s}^{1/p}``.
    """

    p: float
    values: np.ndarray
    weights: np.ndarray
    statistic: float
    thresholds: np.ndarray
    profile: np.ndarray
    history: list = field(default_factory=list)

    def refine(self, values, weights) -> "WeakLpReport":
        new = weak_lp_statistic(values, weights, self.p)
        new.history = self.history + [(len(self.values), self.statistic)]
        return new


DYADIC_THRESHOLDS = 2.0 ** -np.arange(1, 21)


def weak_lp_statistic(values, weights, p: float,
                      thresholds: Sequence[float] = DYADIC_THRESHOLDS, min_count: int = 1) -> WeakLpReport:
    """Weak-L^p statistic of ``1/kappa`` from weighted samples.

    ``min_count`` ignores thresholds below which fewer than that many samples
    fall; a single sample that lands next to a resonant direction otherwise
    dominates the supremum at every sampling density.
    """
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("weak-L^p statistic needs at least one sample")
    if values.shape != weights.shape:
        raise ValueError("values and weights must have the same length")
    if np.any(weights <= 0) or np.any(values < 0):
        raise ValueError("weights must be positive and kappa values nonnegative")
    if p <= 0:
        raise ValueError("p must be positive")
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cum = np.cumsum(w)
    ts = np.asarray(thresholds, dtype=float)
    first = min(min_count, v.size) - 1
    if v[first] == 0.0:
        return WeakLpReport(p, values, weights, math.inf, ts, np.full(ts.shape, math.inf))
    if min_count > 1:
        ts = ts[ts >= v[first]]
    # distribution sigma{kappa <= t} at arbitrary t
    below = np.concatenate([[0.0], cum])[np.searchsorted(v, ts, side="right")]
    prof = below ** (1.0 / p) / ts
    # jump points: the supremum over all t is attained at some t = v_i
    last = np.r_[v[1:] != v[:-1], True] & (np.arange(v.size) >= first)
    jumps = cum[last] ** (1.0 / p) / v[last]
    stat = float(max(prof.max(initial=0.0), jumps.max(initial=0.0)))
    return WeakLpReport(p, values, weights, stat, ts, prof)


__all__ = [
    "DiophantineEstimate", "WeakLpReport", "kappa", "kappa_many", "kappa_bruteforce",
    "h_omega", "weak_lp_statistic", "default_mu", "unit", "direction_from_angle",
]
