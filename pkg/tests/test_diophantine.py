from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from homlab.diophantine import (default_mu, direction_from_angle, h_omega, kappa, kappa_bruteforce, kappa_many,
                                unit, weak_lp_statistic)
from homlab.geometry import ellipse, superellipse

GOLDEN = unit([1.0, math.sqrt(2.0)])
# brute-force minimum over the full integer disc |xi| <= 100 (see test below)
GOLDEN_KAPPA_R100 = 0.33820395745152554


def test_axis_and_rational_directions_vanish():
    est = kappa(np.array([0.0, 1.0]), 1.0, 5)
    assert est.value == 0.0 and est.witness == (0, 1)
    est = kappa(unit([1, 1]), 1.0, 2)
    assert est.value == 0.0 and est.witness == (1, 1)


def test_golden_direction_against_bruteforce():
    est = kappa(GOLDEN, 1.0, 100)
    oracle = kappa_bruteforce(GOLDEN, 1.0, 100)
    assert est.value > 0
    assert est.value == pytest.approx(oracle, rel=1e-11)
    assert est.value == pytest.approx(GOLDEN_KAPPA_R100, rel=1e-11)
    assert est.witness == (1, 1)
    assert est.check()


def test_twenty_rational_directions_once_cutoff_exceeds_denominator():
    rng = np.random.default_rng(7)
    seen = set()
    while len(seen) < 20:
        p, q = (int(v) for v in rng.integers(-9, 10, 2))
        if (p, q) == (0, 0) or math.gcd(p, q) != 1:
            continue
        seen.add((p, q))
    for p, q in seen:
        n = unit([p, q])
        R = math.hypot(p, q) + 1
        assert kappa(n, 1.5, R).value == 0.0
        assert kappa_many(n[None], 1.5, int(R) + 1)[0] == 0.0


def test_kappa_many_matches_scalar():
    dirs = np.stack([direction_from_angle(t) for t in np.linspace(0.1, 3.0, 17)])
    many = kappa_many(dirs, 1.5, 200)
    single = [kappa(d, 1.5, 200).value for d in dirs]
    assert many == pytest.approx(single, rel=1e-12, abs=1e-300)


def test_kappa_three_dimensions():
    n = unit([1.0, math.sqrt(2.0), math.sqrt(3.0)])
    est = kappa(n, 2.5, 6)
    assert est.value == pytest.approx(kappa_bruteforce(n, 2.5, 6), rel=1e-12)
    assert kappa(unit([1, 2, 2]), 2.5, 4).value == 0.0


def test_budget_flags_partial_result():
    n = unit([1.0, math.sqrt(2.0), math.sqrt(3.0)])
    assert kappa(n, 2.5, 20, budget=100).partial


def test_input_validation():
    with pytest.raises(ValueError):
        kappa(np.array([1.0, 1.0]), 1.0, 10)
    with pytest.raises(ValueError):
        kappa(GOLDEN, -1.0, 10)
    with pytest.raises(ValueError):
        kappa(GOLDEN, 1.0, 0.5)


def test_h_omega_examples():
    assert h_omega(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0
    assert h_omega(np.array([0.0, 1.0]), np.array([0.0, 1.0])) == math.inf
    assert h_omega(np.array([1.0, 0.0]), np.array([0.6, 0.8])) == pytest.approx(1.25, abs=1e-14)


def test_h_omega_identity_on_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        d = int(rng.integers(2, 4))
        w, n = unit(rng.normal(size=d)), unit(rng.normal(size=d))
        c = float(w @ n)
        assert h_omega(w, n) == pytest.approx(1 / math.sqrt(1 - c * c), rel=1e-10)


def test_mu_monotonicity_on_random_directions():
    rng = np.random.default_rng(5)
    for t in rng.uniform(0, math.pi, 100):
        n = direction_from_angle(t)
        k1, k2 = kappa(n, 1.0, 50).value, kappa(n, 2.0, 50).value
        assert k2 >= k1 - 1e-15


@given(st.floats(0.01, math.pi - 0.01))
def test_kappa_nonincreasing_in_cutoff(t):
    n = direction_from_angle(t)
    vals = [kappa(n, 1.5, R).value for R in (5, 20, 80)]
    assert vals[0] >= vals[1] >= vals[2]


@given(st.floats(0.0, 2 * math.pi), st.floats(0.01, math.pi - 0.01))
def test_rotation_consistency(phi, t):
    n = direction_from_angle(t)
    O = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    direct = kappa_bruteforce(n, 1.0, 12)
    rotated = kappa_bruteforce(n, 1.0, 12, rotation=O)
    assert rotated == pytest.approx(direct, abs=1e-12)


def test_default_mu():
    assert default_mu(2, 1) == 1.5
    assert default_mu(3, 2) == 1.0
    assert Fraction(default_mu(2, Fraction(1, 3))).limit_denominator() == Fraction(11, 2)


def test_weak_lp_constant_kappa():
    # kappa = c on total measure L: sigma{kappa <= t} jumps to L at t = c
    c, L = 0.3, 2.5
    rep = weak_lp_statistic(np.full(10, c), np.full(10, L / 10), 1.0)
    assert rep.statistic == pytest.approx(L / c, rel=1e-14)
    rep2 = weak_lp_statistic(np.full(10, c), np.full(10, L / 10), 0.5)
    assert rep2.statistic == pytest.approx(L ** 2 / c, rel=1e-14)


def test_weak_lp_zero_value_is_infinite_and_errors():
    assert weak_lp_statistic([0.0, 1.0], [1.0, 1.0], 1.0).statistic == math.inf
    with pytest.raises(ValueError):
        weak_lp_statistic([], [], 1.0)
    with pytest.raises(ValueError):
        weak_lp_statistic([1.0], [-1.0], 1.0)


def _boundary_report(boundary, n, p, mu, min_count=16):
    # midpoints of equal-arclength cells avoid the (measure-zero) axis normals
    L = boundary.length
    u = boundary.parameter_at_arclength((np.arange(n) + 0.5) * L / n)
    w = np.full(n, L / n)
    vals = kappa_many(boundary.normal(u), mu, 300)
    return weak_lp_statistic(vals, w, p, min_count=min_count)


def test_weak_lp_ellipse_stable_under_refinement():
    b = ellipse(1.0, 0.6)
    s = [_boundary_report(b, n, 1.0, 1.5).statistic for n in (1000, 2000, 4000, 8000)]
    assert max(s) / min(s) < 1.5


def test_weak_lp_quartic_oval_needs_smaller_exponent():
    b = superellipse(4, 1.0, 1.0)
    grow = [_boundary_report(b, n, 1.0, 1.5).statistic for n in (1000, 2000, 4000)]
    assert grow[1] > 3 * grow[0] and grow[2] > 3 * grow[1]
    flat = [_boundary_report(b, n, 1 / 3, default_mu(2, 1 / 3)).statistic for n in (1000, 2000, 4000)]
    assert max(flat) / min(flat) < 1.1


def test_min_count_drops_isolated_small_values():
    vals = np.array([1e-9] + [0.5] * 99)
    w = np.full(100, 0.01)
    assert weak_lp_statistic(vals, w, 1.0).statistic == pytest.approx(0.01 / 1e-9)
    assert weak_lp_statistic(vals, w, 1.0, min_count=2).statistic == pytest.approx(1.0 / 0.5)


@given(st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=30), st.floats(0.2, 3.0))
def test_weak_lp_statistic_properties(values, p):
    w = np.ones(len(values))
    rep = weak_lp_statistic(values, w, p)
    assert rep.statistic >= 0
    # dropping thresholds cannot increase the supremum
    fewer = weak_lp_statistic(values, w, p, thresholds=rep.thresholds[:5])
    assert fewer.statistic <= rep.statistic + 1e-12
