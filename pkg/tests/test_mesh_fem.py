from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from homlab.cell import constant_field, laminate_field
from homlab.lab.fem import (
    UnderResolvedError, element_coefficients, gradient_field, interpolate, l2_error, mass_matrix, solve_dirichlet,
)
from homlab.lab.mesh import DomainSpec, MeshQualityError, mesh

DISK = DomainSpec("circle", {"r": 1.0})


@pytest.fixture(scope="module")
def disk_mesh():
    return mesh(DISK, 0.1)


# -- meshing -------------------------------------------------------------------

def test_circle_mesh_regression(disk_mesh):
    q = disk_mesh.check()
    assert (q["triangles"], q["nodes"], q["boundary_nodes"]) == (721, 393, 63)
    assert q["min_angle"] >= 20.0 and q["min_area"] > 0
    assert q["boundary_offset"] <= 1e-10


def test_mesh_is_deterministic(disk_mesh):
    again = mesh(DISK, 0.1)
    assert np.array_equal(again.points, disk_mesh.points)
    assert np.array_equal(again.triangles, disk_mesh.triangles)


def test_ellipse_area_converges_quadratically():
    gaps = [abs(mesh(DomainSpec("ellipse", {"a": 2.0, "b": 1.0}), h).area() - 2 * math.pi) for h in (0.2, 0.1, 0.05)]
    assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.1)
    assert gaps[1] / gaps[2] == pytest.approx(4.0, rel=0.1)


def test_boundary_count_doubles_under_refinement():
    for name, params in (("ellipse", {"a": 1.0, "b": 0.6}), ("superellipse", {"k": 4})):
        counts = [mesh(DomainSpec(name, params), h).boundary_nodes.size for h in (0.1, 0.05)]
        assert counts[1] / counts[0] == pytest.approx(2.0, rel=0.1)


@pytest.mark.parametrize("spec", [DomainSpec("superellipse", {"k": 4, "a": 1.0, "b": 1.0}),
                                  DomainSpec("fourier", {"r0": 1.0, "cos_coeffs": (0.0, 0.1)}),
                                  DomainSpec("ellipse", {"a": 1.0, "b": 0.6})])
def test_graded_meshes_meet_quality(spec):
    m = mesh(spec, 0.08, band_h=0.01)
    q = m.check()
    assert q["min_angle"] >= 20.0
    assert m.band_h == 0.01


def test_domain_spec_validation():
    with pytest.raises(ValueError):
        DomainSpec("square")
    with pytest.raises(ValueError):
        DomainSpec("superellipse", {"k": 3})
    with pytest.raises(ValueError):
        mesh(DISK, 0.0)
    assert DomainSpec("superellipse", {"k": 6}).finite_type == 6
    assert DomainSpec("ellipse").finite_type == 2


def test_quality_failure_reports_metrics(disk_mesh):
    with pytest.raises(MeshQualityError) as err:
        disk_mesh.check(min_angle=89.0)
    assert "min_angle" in err.value.metrics


# -- solving -------------------------------------------------------------------

@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_patch_test(a, b, c):
    m = mesh(DISK, 0.2)
    A = np.array([[2.0, 0.4], [0.4, 1.0]])
    res = solve_dirichlet(m, A, lambda x: a + b * x[:, 0] + c * x[:, 1], rtol=1e-12)
    exact = a + b * m.points[:, 0] + c * m.points[:, 1]
    assert np.max(np.abs(res.u - exact)) <= 1e-9 * (1 + abs(a) + abs(b) + abs(c))


def test_constant_data(disk_mesh):
    res = solve_dirichlet(disk_mesh, laminate_field(2.0, 1.0), 0.7, eps=1.0)
    assert np.allclose(res.u, 0.7, atol=1e-9)


def test_harmonic_polynomial_converges_at_order_two():
    errs = []
    for h in (0.2, 0.1, 0.05):
        m = mesh(DISK, h)
        res = solve_dirichlet(m, 1.0, lambda x: x[:, 0] ** 2 - x[:, 1] ** 2)
        exact = res.with_values(m.points[:, 0] ** 2 - m.points[:, 1] ** 2)
        errs.append(l2_error(res, exact))
        assert res.residual <= 1e-8 and res.max_principle_ok()
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 1.8) & (orders < 2.2))


def test_oscillating_solve_respects_maximum_principle():
    eps = 1 / 8
    m = mesh(DISK, eps / 8)
    res = solve_dirichlet(m, laminate_field(2.0, 1.0), lambda x: np.cos(2 * np.pi * x[:, 0] / eps), eps=eps,
                          oscillating_data=True)
    assert res.max_principle_ok()
    assert res.residual <= 1e-8


def test_under_resolved_solves_are_refused(disk_mesh):
    with pytest.raises(UnderResolvedError, match="eps/8"):
        solve_dirichlet(disk_mesh, 1.0, 0.0, eps=0.25, oscillating_data=True)
    with pytest.raises(UnderResolvedError):
        solve_dirichlet(mesh(DISK, 0.1, band_h=0.01), laminate_field(2.0, 1.0), 0.0, eps=0.1)


def _fine_element_average(m, func, n=24):
    # centroid rule on the n*n congruent sub-triangles of each element
    pts = []
    for i in range(n):
        for j in range(n - i):
            pts.append(((i + 1 / 3) / n, (j + 1 / 3) / n))
            if i + j < n - 1:
                pts.append(((i + 2 / 3) / n, (j + 2 / 3) / n))
    bary = np.array(pts)
    v = m.points[m.triangles]
    x = v[:, :1] + bary[None, :, :1] * (v[:, 1:2] - v[:, :1]) + bary[None, :, 1:] * (v[:, 2:] - v[:, :1])
    return func(x).mean(axis=1)


def test_element_coefficients_average_the_oscillation():
    m = mesh(DISK, 0.05)
    a = element_coefficients(m, laminate_field(2.0, 1.0), eps=0.25)
    assert a.shape == (m.n_triangles, 2, 2)
    want = _fine_element_average(m, lambda x: 2 + np.sin(2 * np.pi * x[..., 0] / 0.25))
    assert np.allclose(a[:, 0, 0], want, atol=2e-4)
    assert np.allclose(a[:, 1, 1], a[:, 0, 0]) and np.allclose(a[:, 0, 1], 0.0)
    assert np.allclose(element_coefficients(m, constant_field(np.eye(2))), np.eye(2))
    with pytest.raises(ValueError):
        element_coefficients(m, laminate_field(2.0, 1.0))


# -- norms ---------------------------------------------------------------------

def test_l2_of_constant_is_root_area(disk_mesh):
    one = solve_dirichlet(disk_mesh, 1.0, 1.0)
    zero = solve_dirichlet(disk_mesh, 1.0, 0.0)
    assert l2_error(one, one) == 0.0
    assert l2_error(one, zero) == pytest.approx(math.sqrt(disk_mesh.area()), rel=1e-12)
    assert l2_error(one, zero) == pytest.approx(math.sqrt(math.pi), abs=2e-3)


def _pair():
    g = lambda x: np.cos(3 * x[:, 0]) * np.exp(x[:, 1])  # noqa: E731
    coarse, fine = mesh(DISK, 0.1), mesh(DISK, 0.05)
    return solve_dirichlet(coarse, 1.0, g), solve_dirichlet(fine, 1.0, g)


def test_cross_mesh_error_is_symmetric():
    a, b = _pair()
    assert l2_error(a, b) == l2_error(b, a)
    # nodal interpolation onto the fine mesh tells the same story
    nodal = l2_error(b.with_values(interpolate(a, b.mesh.points)), b, method="mass")
    assert nodal == pytest.approx(l2_error(a, b), rel=0.2)


def test_quadrature_and_mass_norms_agree_on_shared_mesh():
    a, b = _pair()
    shifted = b.with_values(b.u + 0.1 * np.sin(b.mesh.points[:, 0]))
    q = l2_error(b, shifted, method="quadrature")
    mm = l2_error(b, shifted, method="mass")
    assert q == pytest.approx(mm, rel=1e-2)


def test_norm_errors():
    a, b = _pair()
    with pytest.raises(ValueError):
        l2_error(a, b, method="mass")
    with pytest.raises(ValueError):
        l2_error(a, b, method="other")
    small = solve_dirichlet(mesh(DomainSpec("circle", {"r": 0.5}), 0.05), 1.0, 0.0)
    with pytest.raises(ValueError, match="different domains"):
        l2_error(a, small)


def test_gradient_of_affine_solution(disk_mesh):
    res = solve_dirichlet(disk_mesh, 1.0, lambda x: 2 * x[:, 0] - x[:, 1], rtol=1e-12)
    assert np.allclose(gradient_field(res), [2.0, -1.0], atol=1e-8)
    assert mass_matrix(disk_mesh).sum() == pytest.approx(disk_mesh.area(), rel=1e-12)


@pytest.mark.parametrize("spec,band", [(DomainSpec("superellipse", {"k": 6}), 1 / 64),
                                       (DomainSpec("ellipse", {"a": 1.0, "b": 0.6}), 1 / 48)])
def test_fine_band_on_curved_domain_keeps_quality(spec, band):
    # grading has to continue past the curvature reach of the offset curves
    m = mesh(spec, 0.1, band_h=band)
    assert m.check()["min_angle"] >= 20.0
