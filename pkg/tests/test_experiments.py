from __future__ import annotations

import csv
import math

import numpy as np
import pytest

from homlab.cell import constant_field, laminate_field
from homlab.lab.experiments import (
    DEFAULT_EPS, RateReport, constant_coeff_experiment, derivative_scaling_probe, higher_order_experiment,
    layer_expansion_check, oscillating_coeff_experiment, periodic_interpolator, rate_fit, theta_mean,
)
from homlab.lab.mesh import DomainSpec
from homlab.pipeline import cosine_data, data_from_spec

DISK = DomainSpec("circle", {"r": 1.0})
SMALL_EPS = (1 / 4, 1 / 6, 1 / 8)


# -- rate fits -----------------------------------------------------------------

def test_rate_fit_exact_power():
    eps = np.array(DEFAULT_EPS)
    fit = rate_fit(eps, eps)
    assert fit.slope == pytest.approx(1.0, abs=1e-12) and fit.residual < 1e-12
    fit = rate_fit(eps, 3 * eps ** 0.25)
    assert fit.slope == pytest.approx(0.25, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)


def test_rate_fit_recovers_noisy_slopes():
    rng = np.random.default_rng(11)
    eps = np.array(DEFAULT_EPS)
    slopes = rng.uniform(0.05, 1.5, 500)
    gaps = [abs(rate_fit(eps, 2 * eps ** s * np.exp(0.01 * rng.normal(size=eps.size))).slope - s) for s in slopes]
    assert np.percentile(gaps, 95) <= 0.02
    assert abs(np.mean(gaps)) < 0.01


def test_rate_fit_preconditions():
    with pytest.raises(ValueError):
        rate_fit([0.1, 0.05], [1.0, 0.5])
    with pytest.raises(ValueError):
        rate_fit([0.1, 0.05, 0.025], [1.0, 0.0, 0.5])


def test_rate_report_validation_and_exports(tmp_path):
    eps = np.array([1 / 8, 1 / 16, 1 / 32])
    with pytest.raises(ValueError):
        RateReport("x", eps[::-1], eps, eps, [1, 1, 1])
    with pytest.raises(ValueError):
        RateReport("x", eps, -eps, eps, [1, 1, 1])
    rep = RateReport("demo", eps, 0.5 * eps ** 0.5, eps / 8, [3, 4, 5], predicted=0.5)
    assert rep.fit.slope == pytest.approx(0.5) and rep.strictly_decreasing
    rep.to_csv(tmp_path / "t.csv")
    rows = list(csv.DictReader(open(tmp_path / "t.csv")))
    assert list(rows[0]) == ["eps", "l2_error", "h", "solver_iters"] and len(rows) == 3
    rep.to_dat(tmp_path / "t.dat")
    data = np.loadtxt(tmp_path / "t.dat")
    assert np.allclose(data[:, 2], np.log(eps))
    d = rep.as_dict()
    assert d["slope"] == pytest.approx(0.5) and d["predicted"] == 0.5
    assert "slope" in rep.summary()


# -- helpers -------------------------------------------------------------------

def test_periodic_interpolator_hits_nodes_and_wraps():
    vals = np.random.default_rng(2).normal(size=(8, 4))
    f = periodic_interpolator(vals)
    i, j = np.meshgrid(np.arange(8), np.arange(4), indexing="ij")
    y = np.stack([i / 8, j / 4], axis=-1)
    assert np.allclose(f(y), vals)
    assert np.allclose(f(y + 3.0), vals)
    assert np.allclose(f(np.array([0.5 / 8, 0.0])), 0.5 * (vals[0, 0] + vals[1, 0]))


def test_theta_mean_of_cosine_data():
    g = theta_mean(cosine_data((1, 0), offset=0.3), N=16)
    assert np.allclose(g(np.random.default_rng(0).uniform(-1, 1, (5, 2))), 0.3, atol=1e-12)


# -- experiments on small sweeps -----------------------------------------------

def test_theta_independent_data_gives_discretization_level_errors():
    rep = constant_coeff_experiment(DISK, 1.0, data_from_spec("linear", a=1.0, b=0.5), eps_list=SMALL_EPS, h=0.1)
    assert np.all(rep.errors < 1e-9)
    assert rep.predicted == 0.25


def test_constant_path_of_oscillating_experiment_matches():
    f = cosine_data((1, 0))
    direct = constant_coeff_experiment(DISK, np.eye(2), f, eps_list=SMALL_EPS, h=0.1)
    piped = oscillating_coeff_experiment(DISK, constant_field(np.eye(2)), f, eps_list=SMALL_EPS)
    assert np.allclose(piped.errors, direct.errors, rtol=2e-3)
    assert direct.strictly_decreasing and piped.strictly_decreasing


def test_superellipse_constant_errors_decrease():
    rep = constant_coeff_experiment(DomainSpec("superellipse", {"k": 4}), np.eye(2), cosine_data((1, 0)),
                                    eps_list=(1 / 4, 1 / 6, 1 / 8, 1 / 12), h=0.1)
    assert rep.strictly_decreasing
    assert rep.predicted == 1 / 8


def test_layer_check_vanishes_for_constant_coefficients():
    A = constant_field(np.array([[2.0, 0.3], [0.3, 1.0]]))
    rep = layer_expansion_check(DomainSpec("ellipse", {"a": 1.0, "b": 0.6}), A, 0.1, 1 / 8, N=16)
    assert np.all(rep.sup_grad < 1e-9)
    assert rep.radii[0] == 1 / 8 and rep.radii[-1] <= math.sqrt(1 / 8)


def test_higher_order_constant_coefficients_collapse():
    unc, cor = higher_order_experiment(DISK, constant_field(np.eye(2)), lambda x: 1 + x[:, 0] - 0.5 * x[:, 1],
                                       eps_list=SMALL_EPS, N=16, h_factor=8)
    assert np.all(unc.errors < 1e-9)
    assert np.allclose(cor.errors, unc.errors)


def test_derivative_scaling_probe():
    probe = derivative_scaling_probe(DISK, laminate_field(2.0, 1.0), lambda y: np.cos(2 * np.pi * y[:, 0]),
                                     eps_pair=(1 / 4, 1 / 8))
    assert probe.grad_sup[1] <= 1.5 * probe.grad_sup[0]
    assert 1 / 3 <= probe.hessian_ratio <= 3
