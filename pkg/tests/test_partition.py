from __future__ import annotations

import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from homlab.diophantine import default_mu
from homlab.geometry import FunctionGraph, circle, ellipse, local_graph, superellipse
from homlab.partition import (
    LayerPointError, boundary_kappa, boundary_partition, cz_decompose, kappa_profile, lift_partition,
    partition_of_unity, select_kappa_witness, size_and_sum_checks, theta,
)

TAUS = [2.0 ** -j for j in range(4, 11)]


def _test_patches():
    # ellipse: type 2, F = kappa; quartic oval at its flat point: gamma = 3
    return [(local_graph(ellipse(1.0, 0.6), 0.1), 1.0), (local_graph(superellipse(4, 1.0, 1.0), 0.0), 3.0)]


# -- decomposition -------------------------------------------------------------

def test_constant_one_gives_uniform_cubes():
    part = cz_decompose(lambda s: np.ones_like(s), 1 / 8)
    assert len(part.cubes) == 8
    assert np.all(part.sides == 1 / 8)


def test_zero_gives_root():
    part = cz_decompose(lambda s: np.zeros_like(s), 1 / 8)
    assert len(part.cubes) == 1 and part.cubes[0].side == 1.0


@pytest.mark.parametrize("tau", [0.3, 1 / 8, 0.07, 1 / 64])
def test_constant_one_side_is_largest_dyadic_below_tau(tau):
    part = cz_decompose(lambda s: np.ones_like(s), tau)
    assert np.all(part.sides == 2.0 ** math.floor(math.log2(tau)))


def _brute_force_abs(tau, slack, depth=12):
    """Maximal admissible dyadic subintervals of [-1, 1] for F = |x| with an exact sup."""

    def sup_est(lo, hi):
        top = max(abs(lo), abs(hi))
        bot = 0.0 if lo <= 0 <= hi else min(abs(lo), abs(hi))
        return top + slack * (top - bot)

    def admissible(lo, side):
        c = lo + side / 2
        a, b = max(c - 3 * side, -1.0), min(c + 3 * side, 1.0)
        return sup_est(a, b) <= tau / side

    chosen = []
    for level in range(depth + 1):
        side = 2.0 / 2 ** level
        for i in range(2 ** level):
            lo = -1.0 + i * side
            if not admissible(lo, side):
                continue
            if level == 0 or not admissible(-1.0 + (i // 2) * 2 * side, 2 * side):
                chosen.append((lo, side))
    return sorted(chosen)


@pytest.mark.parametrize("slack", [0.0, 0.05])
def test_abs_matches_brute_force(slack):
    part = cz_decompose(np.abs, 1 / 16, (-1.0, 1.0), slack=slack)
    got = sorted((c.lo, c.side) for c in part.cubes)
    assert got == _brute_force_abs(1 / 16, slack)
    assert not part.flagged.any()


def test_floor_flags_unbounded_samples():
    part = cz_decompose(lambda s: np.where(np.abs(s - 0.5) < 1e-3, 1e6, 0.0), 1 / 32)
    assert part.flagged.any()
    assert all(c.side < 1 / 64 for c in part.cubes if c.flagged)


def test_invalid_tau():
    with pytest.raises(ValueError):
        cz_decompose(np.abs, 0.0)


@given(st.integers(2, 9), st.floats(0.5, 4.0), st.floats(-0.9, 0.9))
def test_structure_holds_for_smooth_samplers(j, amp, centre):
    part = cz_decompose(lambda s: amp * np.abs(s - centre) ** 0.7, 2.0 ** -j, (-1.0, 1.0))
    st_ = part.check_structure()
    assert st_["cover"] and st_["disjoint"]
    assert st_["neighbor_ratio"] <= 2.0
    assert st_["stopping_rule"] and st_["parent_violation"]


def test_decomposition_is_deterministic_and_sorted():
    a = cz_decompose(np.abs, 1 / 64, (-1.0, 1.0))
    b = cz_decompose(np.abs, 1 / 64, (-1.0, 1.0))
    assert [(c.lo, c.side) for c in a.cubes] == [(c.lo, c.side) for c in b.cubes]
    assert np.all(np.diff(a.lows) > 0)


@pytest.mark.parametrize("patch,gamma", _test_patches())
def test_kappa_partition_sweep(patch, gamma):
    sums = []
    for tau in TAUS:
        part, _ = boundary_partition(patch, tau, gamma)
        s = part.check_structure()
        assert s["cover"] and s["neighbor_ratio"] <= 2 and s["stopping_rule"] and s["parent_violation"]
        assert s["flagged"] == 0
        rep = size_and_sum_checks(part)
        assert rep["r_min_over_tau"] >= 1.0 and rep["r_max_over_sqrt_tau"] <= 10.0
        sums.append(rep["sum_constant"])
    assert max(sums) <= 1.0


def test_cube_count_bound_has_one_constant():
    patch = local_graph(ellipse(1.0, 0.6), 0.1)
    ratios = []
    for tau in TAUS:
        part, _ = boundary_partition(patch, tau, 1.0)
        for lam, count, measure in part.count_bound([2.0 ** i for i in range(8)]):
            if count:
                assert measure > 0
                ratios.append(count * lam * tau / measure)
    assert max(ratios) <= 1.0


# -- lifting -------------------------------------------------------------------

def test_flat_patch_lifts_to_itself():
    flat = FunctionGraph(lambda s: 0 * s, 1.0)
    part = lift_partition(flat, cz_decompose(np.abs, 1 / 16, (-1.0, 1.0)))
    assert np.allclose(part.centers[:, 0], part.mids) and np.allclose(part.centers[:, 1], 0)
    assert np.allclose(part.surface_measures, part.sides, rtol=1e-14)


def test_circle_patch_measures():
    g = local_graph(circle(1.0), 0.0, 0.2)
    part = lift_partition(g, cz_decompose(lambda s: np.ones_like(s), 1 / 32, (-0.2, 0.2)))
    # arclength of the arc over [a, b] is arcsin(b) - arcsin(a)
    want = np.arcsin(part.lows + part.sides) - np.arcsin(part.lows)
    assert np.allclose(part.surface_measures, want, rtol=1e-10)
    ratio = part.surface_measures / part.sides
    assert np.all((ratio >= 0.98) & (ratio <= 1.02))


def test_ellipse_centers_on_curve():
    b = ellipse(1.0, 0.6)
    part, _ = boundary_partition(local_graph(b, 0.3), 1 / 128, 1.0)
    x, y = part.centers.T
    assert np.max(np.abs(x ** 2 + (y / 0.6) ** 2 - 1)) < 1e-10


def test_lift_rejects_wide_base():
    g = local_graph(circle(1.0), 0.0, 0.2)
    with pytest.raises(ValueError):
        lift_partition(g, cz_decompose(np.abs, 1 / 8, (-0.5, 0.5)))


# -- partition of unity --------------------------------------------------------

def test_single_cube_bump_is_one():
    part = cz_decompose(lambda s: np.zeros_like(s), 1 / 8)
    s = np.linspace(0, 1, 1001)
    assert np.all(partition_of_unity(part).values(s)[:, 0] == 1.0)


def test_uniform_partition_sums_to_one():
    part = cz_decompose(lambda s: np.ones_like(s), 1 / 8)
    s = np.random.default_rng(0).uniform(0, 1, 10_000)
    bumps = partition_of_unity(part)
    assert np.max(np.abs(bumps.total(s) - 1)) < 1e-12
    vals = bumps.values(s)
    assert np.all((vals >= 0) & (vals <= 1))


def test_bump_constants_uniform_over_sweep():
    patch = local_graph(ellipse(1.0, 0.6), 0.1)
    grads, lows = [], []
    for tau in TAUS:
        part, _ = boundary_partition(patch, tau, 1.0)
        bumps = partition_of_unity(part)
        s = np.linspace(part.q0.lo, part.q0.hi, 4001)
        assert np.max(np.abs(bumps.total(s) - 1)) < 1e-12
        grads.append(bumps.gradient_constants().max())
        lows.append(bumps.lower_bound_on_cubes())
    assert max(grads) < 5.0
    assert min(lows) >= 0.25


# -- witnesses -----------------------------------------------------------------

def test_constant_kappa_picks_center():
    part = cz_decompose(lambda s: np.ones_like(s), 1 / 8)
    for j, c in enumerate(part.cubes):
        w = select_kappa_witness(part, j, lambda s: np.ones_like(s), 1.0)
        assert not w.flagged and w.position == c.center


def test_ellipse_cubes_all_find_witnesses():
    b = ellipse(1.0, 0.6)
    g = local_graph(b, 0.1)
    part, _ = boundary_partition(g, 1e-3, 1.0)
    kap = boundary_kappa(b, default_mu(2, 1.0))
    ws = [select_kappa_witness(part, j, kap, 1.0, patch=g) for j in range(len(part.cubes))]
    assert not any(w.flagged for w in ws)
    assert all(w.kappa > w.threshold for w in ws)


def test_resonant_point_witness_is_off_center():
    c = circle(1.0)
    g = local_graph(c, 1 / 8, 0.2)  # outward normal (1, 1)/sqrt(2)
    mu = default_mu(2, 1.0)
    assert kappa_profile(g, mu)(np.array([0.0]))[0] == 0.0
    part, _ = boundary_partition(g, 2.0 ** -6, 1.0)
    j = int(np.flatnonzero(part.lows + part.sides == 0.0)[0])
    w = select_kappa_witness(part, j, boundary_kappa(c, mu), 1.0, patch=g)
    assert not w.flagged and w.kappa > w.threshold
    assert abs(w.position - 1 / 8) > 1e-3


# -- theta ---------------------------------------------------------------------

def test_theta_single_cube():
    part = cz_decompose(lambda s: np.zeros_like(s), 1.0, (0.0, 0.25))
    part.centers = np.array([[0.0, 0.0]])
    assert theta(np.array([1.0, 0.0]), part, 1.0) == pytest.approx(1 / 16)


def test_theta_refuses_layer_points():
    part = cz_decompose(lambda s: np.zeros_like(s), 1.0, (0.0, 0.25))
    part.centers = np.array([[0.0, 0.0]])
    with pytest.raises(LayerPointError):
        theta(np.array([0.5, 0.0]), part, 1.0)
    with pytest.raises(ValueError):
        theta(np.array([1.0, 0.0]), cz_decompose(np.abs, 0.1), 1.0)


def test_theta_decreases_along_inward_ray():
    g = local_graph(ellipse(1.0, 0.6), 0.1)
    part, _ = boundary_partition(g, 2.0 ** -6, 1.0)
    ray = g.x0 - np.linspace(0.2, 0.6, 41)[:, None] * g.normal
    assert np.all(np.diff(theta(ray, part, 0.5)) < 0)


def test_theta_integral_scales_like_tau_power():
    b = ellipse(1.0, 0.6)
    g = local_graph(b, 0.1)
    s = np.linspace(-0.125, 0.125, 161)
    depth = np.linspace(0, 0.3, 121)[1:]
    S, D = np.meshgrid(s, depth)
    X = (g.x0 + S[..., None] * g.tangent - D[..., None] * g.normal).reshape(-1, 2)
    X = X[b.contains(X)]
    dA = (s[1] - s[0]) * (depth[1] - depth[0])
    for t, q in ((0.5, 1.0), (0.25, 2.0)):
        consts = []
        for tau in TAUS[:5]:
            part, _ = boundary_partition(g, tau, 1.0)
            dist = np.linalg.norm(X[:, None] - part.centers[None], axis=-1)
            keep = ~np.any(dist < 4 * part.sides[None], axis=1)
            consts.append(np.sum(theta(X[keep], part, t) ** q) * dA / tau ** (q * t))
        assert max(consts) < 1.0


def test_partition_csv(tmp_path):
    part, _ = boundary_partition(local_graph(ellipse(1.0, 0.6), 0.1), 1 / 64, 1.0)
    path = tmp_path / "cubes.csv"
    part.to_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == len(part.cubes)
    assert set(rows[0]) >= {"level", "lo", "side", "mid", "flagged", "x", "y", "surface_measure"}
    assert float(rows[0]["side"]) == part.cubes[0].side
