import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from hypothesis import given, strategies as st

from robinlab.errors import DiagonalPoint, UnsupportedDimension
from robinlab.green_mass import (GreenDecomposition, anomaly_constant, green_eval, kernel_constant,
                                 robin_mass, robin_mass_field, trace_robin, verify_appendix_identity)
from robinlab.spectral import apply_inverse_power, sphere_model, torus_model

from oracles import (kernel_constant_finite_part, sphere_green_constant, sphere_green_legendre,
                     square_torus_robin_trace)


def test_sphere_green_constant_matches_zero_mean_oracle(sphere16):
    p = np.array([0.0, 0.0, 1.0])
    q = np.array([1.0, 0.0, 0.0])
    got = green_eval(sphere16, p, q) + math.log(math.sqrt(2.0)) / (2 * math.pi)
    assert_allclose(got, sphere_green_constant(), rtol=1e-12)


@pytest.mark.parametrize("l", [1, 2, 3, 7])
def test_sphere_green_is_inverse_laplacian(l):
    assert_allclose(sphere_green_legendre(l), 1 / (l * (l + 1)), rtol=1e-9)


def test_sphere_green_integrates_against_spectral_inverse(sphere64):
    # u(p) = int G(p, y) F(y) dy versus the spectral solve, dropping the singular node y = p
    F = np.exp(sphere64.grid.points @ np.array([0.2, 0.5, -0.4]))
    u = apply_inverse_power(sphere64, 1.0, F)
    p = sphere64.grid.points[1000]
    pts = sphere64.grid.points
    far = np.linalg.norm(pts - p, axis=1) > 1e-9
    # singular quadrature is crude; only the leading digits are meaningful
    approx = np.sum(sphere64.weights[far] * green_eval(sphere64, p, pts[far]) * F[far])
    assert abs(approx - u[1000]) < 2e-2 * np.ptp(u)


def test_sphere_robin_mass_closed_form():
    m = sphere_model(2, 4 * math.pi, 8)
    assert_allclose(robin_mass(m, [0, 0, 1]), (math.log(2) - 0.5) / (2 * math.pi), rtol=1e-14)


@pytest.mark.parametrize("V", [1.0, 8 * math.pi, 100.0])
def test_sphere_robin_mass_volume_law(V):
    m0 = robin_mass(sphere_model(2, 4 * math.pi, 8), [0, 0, 1])
    mV = robin_mass(sphere_model(2, V, 8), [0, 0, 1])
    assert_allclose(mV, m0 + math.log(V / (4 * math.pi)) / (4 * math.pi), rtol=1e-13)


def test_sphere_extrapolated_mass_matches_closed():
    m = sphere_model(2, 5.0, 8)
    p = np.array([0.6, 0.0, 0.8])
    assert_allclose(robin_mass(m, p, method="extrapolate"), robin_mass(m, p), atol=1e-6)


def test_torus_robin_mass_kronecker(torus16):
    ref = square_torus_robin_trace()
    assert_allclose(robin_mass(torus16, [0.3, 0.7], method="closed"), ref, atol=1e-13)
    assert_allclose(robin_mass(torus16, [0.3, 0.7]), ref, atol=1e-6)


def test_torus_mass_homogeneous(torus16_mass):
    assert torus16_mass.spread < 1e-7


def test_torus_trace_robin(torus16, torus16_mass):
    assert_allclose(trace_robin(torus16, torus16_mass), square_torus_robin_trace(), atol=1e-6)


def test_torus_green_zero_mean():
    # polar quadrature of G(0, x) over the unit square, split into four triangles
    # around the pole; r = R(t) u^2 tames the r log r singularity
    m = torus_model(np.eye(2), 8)
    x, w = np.polynomial.legendre.leggauss(80)
    t = (x + 1) * math.pi / 8 - math.pi / 4     # [-pi/4, pi/4]
    wt = w * math.pi / 8
    u = (x + 1) / 2
    wu = w / 2
    total = 0.0
    for rot in range(4):
        th = t[:, None] + rot * math.pi / 2
        R = 0.5 / np.cos(t)[:, None]
        r = R * u[None, :] ** 2
        pts = np.stack([r * np.cos(th), r * np.sin(th)], -1).reshape(-1, 2)
        G = green_eval(m, np.zeros(2), pts).reshape(r.shape)
        total += np.sum(wt[:, None] * wu[None, :] * G * r * 2 * R * u[None, :])
    assert abs(total) < 1e-8


def test_torus_green_fourier_coefficient():
    # <G(0, .), e^{2 pi i k.x}> = 1 / (4 pi^2 |k|^2) on the unit square torus
    m = torus_model(np.eye(2), 8)
    n = 256
    t = (np.arange(n) + 0.5) / n - 0.5
    X, Y = np.meshgrid(t, t, indexing="ij")
    G = green_eval(m, np.zeros(2), np.stack([X.ravel(), Y.ravel()], -1)).reshape(n, n)
    for k in [(1, 0), (1, 1), (2, 1)]:
        # cell-centred midpoint sums never hit the pole; the log singularity caps accuracy
        coef = np.sum(G * np.cos(2 * math.pi * (k[0] * X + k[1] * Y))) / n ** 2
        assert_allclose(coef, 1 / (4 * math.pi ** 2 * (k[0] ** 2 + k[1] ** 2)), rtol=2e-3)


def test_skew_torus_green_symmetric_and_periodic(skew_torus):
    b = skew_torus.surface.basis_array
    p = np.array([0.1, 0.2])
    q = np.array([0.7, 0.4])
    assert_allclose(green_eval(skew_torus, p, q), green_eval(skew_torus, q, p), rtol=1e-13)
    assert_allclose(green_eval(skew_torus, p, q + b[:, 0] - 2 * b[:, 1]), green_eval(skew_torus, p, q), rtol=1e-12)


def test_green_diagonal_raises(sphere16, torus16):
    with pytest.raises(DiagonalPoint):
        green_eval(sphere16, [0, 0, 1], [0, 0, 1])
    with pytest.raises(DiagonalPoint):
        green_eval(torus16, [0.2, 0.2], [1.2, 0.2])


def test_green_decomposition_regular_part(skew_torus):
    dec = GreenDecomposition(skew_torus)
    assert dec.singular_coefficient == pytest.approx(1 / (2 * math.pi))
    p = np.array([0.3, 0.3])
    m = robin_mass(skew_torus, p)
    near = dec.regular_part(p, p + np.array([1e-4, 0.0]))
    assert abs(near - m) < 1e-6


def test_sphere_mass_field_constant(sphere32, sphere32_mass):
    assert sphere32_mass.spread == 0.0
    assert_allclose(trace_robin(sphere32, sphere32_mass), 2 * math.log(2) - 1, rtol=1e-12)


def test_anomaly_constant_two():
    assert_allclose(anomaly_constant(2).c_n, (math.log(2) - np.euler_gamma) / (2 * math.pi), rtol=1e-14)
    with pytest.raises(UnsupportedDimension):
        anomaly_constant(3)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_anomaly_constant_is_kernel_finite_part(n):
    # c_n is the finite part of C(s) at s = 1 (residue -2/gamma_n removed)
    assert_allclose(anomaly_constant(n).c_n, kernel_constant_finite_part(n), rtol=1e-9, atol=1e-14)


def test_kernel_constant_pole():
    from robinlab.geometry import constants
    for n in (2, 4):
        eps = 1e-6
        res = (kernel_constant(n, 1 + eps) - kernel_constant(n, 1 - eps)) * eps / 2
        assert_allclose(res, -2 / constants(n).gamma_n, rtol=1e-5)


def test_appendix_identity_unit_sphere(sphere64):
    rep = verify_appendix_identity(sphere64)
    assert rep.defect < 1e-3


@pytest.mark.parametrize("n", [4, 6])
def test_appendix_identity_higher_spheres(n):
    rep = verify_appendix_identity(sphere_model(n, None, 200))
    assert rep.defect < 1e-4


def test_appendix_identity_skew_torus():
    rep = verify_appendix_identity(torus_model([[1.0, 0.3], [0.0, 1.2]], 40))
    assert rep.defect < 1e-3


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_torus_green_symmetric(a, b, c, d):
    m = torus_model([[1.0, 0.3], [0.0, 1.2]], 4)
    p, q = np.array([a, b]), np.array([c, d])
    if float(np.min(np.abs(np.linalg.solve(m.surface.basis_array, q - p) - np.round(np.linalg.solve(m.surface.basis_array, q - p))))) < 1e-3:
        return
    assert_allclose(green_eval(m, p, q), green_eval(m, q, p), rtol=1e-12, atol=1e-14)
