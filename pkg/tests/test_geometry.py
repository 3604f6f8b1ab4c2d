import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from hypothesis import given, strategies as st

from robinlab.errors import ConfigError, SingularLattice, UnsupportedDimension
from robinlab.geometry import (SurfaceSpec, build_sphere_grid, build_torus_grid, chordal_distance,
                               constants, diameter, geodesic_distance, lagrange_reduce,
                               surface_from_mapping, surface_to_mapping)


def test_constants_two_sphere():
    c = constants(2)
    assert_allclose(c.omega_n, 4 * math.pi, rtol=1e-15)
    assert c.gamma_n == math.factorial(2) * c.omega_n
    assert_allclose(c.singular_coefficient, 1 / (2 * math.pi), rtol=1e-15)


def test_constants_four_sphere():
    c = constants(4)
    assert_allclose(c.omega_n, 8 * math.pi ** 2 / 3, rtol=1e-14)
    assert c.gamma_n == 24 * c.omega_n


def test_sphere_grid_total_weight():
    g = build_sphere_grid(2, 16)
    assert np.all(g.weights > 0)
    assert_allclose(g.total, 4 * math.pi, rtol=1e-12)


def test_sphere_grid_orthogonality_y10():
    g = build_sphere_grid(2, 16)
    y10 = math.sqrt(3 / (4 * math.pi)) * g.points[:, 2]
    assert abs(g.integrate(y10)) < 1e-12


def test_sphere_grid_normalization_y21():
    # real Y_2^1 = sqrt(15/4pi) x z
    g = build_sphere_grid(2, 16)
    y21 = math.sqrt(15 / (4 * math.pi)) * g.points[:, 0] * g.points[:, 2]
    assert_allclose(g.integrate(y21 ** 2), 1.0, atol=1e-10)


def test_sphere_grid_exact_to_degree_2L():
    L = 6
    g = build_sphere_grid(2, L)
    x, y, z = g.points.T
    # x^a y^b z^c with a+b+c = 2L: moment = 2 Gamma((a+1)/2)Gamma((b+1)/2)Gamma((c+1)/2)/Gamma((a+b+c+3)/2)
    for a, b, c in [(12, 0, 0), (4, 4, 4), (6, 2, 4), (2, 0, 10)]:
        ref = 2 * math.gamma((a + 1) / 2) * math.gamma((b + 1) / 2) * math.gamma((c + 1) / 2) / math.gamma((a + b + c + 3) / 2)
        assert_allclose(g.integrate(x ** a * y ** b * z ** c), ref, rtol=1e-12)


def test_sphere_grid_rejects_higher_dimension():
    with pytest.raises(UnsupportedDimension):
        build_sphere_grid(4, 8)


def test_torus_grid_identity():
    g = build_torus_grid(np.eye(2), 8)
    assert g.size == 64
    assert_allclose(g.weights, 1 / 64, rtol=0, atol=0)


def test_torus_grid_diag():
    g = build_torus_grid(np.diag([2.0, 1.0]), 8)
    assert_allclose(g.total, 2.0, rtol=1e-12)


def test_torus_grid_plane_wave():
    g = build_torus_grid(np.eye(2), 8)
    x, y = g.points.T
    assert abs(g.integrate(np.cos(2 * np.pi * (x + y)))) < 1e-12
    assert abs(g.integrate(np.sin(2 * np.pi * (x + y)))) < 1e-12


def test_torus_grid_singular():
    with pytest.raises(SingularLattice):
        build_torus_grid([[1.0, 2.0], [2.0, 4.0]], 4)


def test_grid_is_immutable():
    g = build_torus_grid(np.eye(2), 4)
    with pytest.raises(ValueError):
        g.weights[0] = 1.0


def test_scaled_grid():
    g = build_sphere_grid(2, 8).scaled(2.0)
    assert_allclose(g.total, 8 * math.pi, rtol=1e-12)


def test_geodesic_antipodal():
    s = SurfaceSpec.sphere()
    assert_allclose(geodesic_distance(s, [0, 0, 1], [0, 0, -1]), math.pi, atol=1e-12)


def test_geodesic_scales_with_radius():
    s = SurfaceSpec.sphere(2, 16 * math.pi)  # radius 2
    assert_allclose(geodesic_distance(s, [0, 0, 1], [1, 0, 0]), math.pi, rtol=1e-14)


def test_torus_distances():
    t = SurfaceSpec.torus(np.eye(2))
    assert_allclose(geodesic_distance(t, [0, 0], [0.5, 0]), 0.5)
    assert_allclose(geodesic_distance(t, [0, 0], [0.9, 0]), 0.1, atol=1e-15)


def test_torus_distance_skew_basis():
    # basis whose generators are far from reduced; the metric is that of the reduced lattice
    t = SurfaceSpec.torus([[1.0, 5.0], [0.0, 1.0]])
    assert_allclose(geodesic_distance(t, [0, 0], [0.0, 0.95]), 0.05, atol=1e-14)
    assert_allclose(geodesic_distance(t, [0.2, 0.1], [5.2, 1.1]), 0.0, atol=1e-12)


def test_chordal_examples():
    assert chordal_distance([0, 0, 1], [0, 0, -1]) == 2.0
    assert chordal_distance([0, 1, 0], [0, 1, 0]) == 0.0
    d = 0.7
    q = [math.sin(d), 0, math.cos(d)]
    assert_allclose(chordal_distance([0, 0, 1], q), 2 * math.sin(d / 2), atol=1e-12)


def test_lagrange_reduce_preserves_lattice():
    b = np.array([[1.0, 7.0], [0.2, 2.4]])
    r = lagrange_reduce(b)
    assert_allclose(abs(np.linalg.det(r)), abs(np.linalg.det(b)), rtol=1e-12)
    coords = np.linalg.solve(b, r)
    assert_allclose(coords, np.round(coords), atol=1e-10)
    u, v = r.T
    assert u @ u <= v @ v + 1e-12
    assert abs(u @ v) <= 0.5 * (u @ u) + 1e-12


def test_surface_invariants():
    with pytest.raises(UnsupportedDimension):
        SurfaceSpec.sphere(3)
    with pytest.raises(ConfigError):
        SurfaceSpec.sphere(2, -1.0)
    t = SurfaceSpec.torus(np.diag([2.0, 3.0]))
    assert t.volume == 6.0


def test_diameter():
    assert_allclose(diameter(SurfaceSpec.sphere()), math.pi)
    assert_allclose(diameter(SurfaceSpec.torus(np.eye(2))), math.sqrt(0.5), rtol=1e-12)


def test_surface_mapping_roundtrip():
    for s in (SurfaceSpec.sphere(2, 3.0), SurfaceSpec.torus([[1.0, 0.2], [0.0, 0.9]])):
        assert surface_from_mapping(surface_to_mapping(s)) == s


def test_surface_mapping_names_field():
    with pytest.raises(ConfigError, match="basis"):
        surface_from_mapping({"surface": "torus", "basis": [[1, 2], [3]]})
    with pytest.raises(ConfigError, match="surface"):
        surface_from_mapping({"surface": "cube"})


unit = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).filter(lambda v: 0.1 < np.linalg.norm(v))


def _normed(v):
    v = np.array(v)
    return v / np.linalg.norm(v)


@given(unit, unit)
def test_sphere_distance_symmetric(p, q):
    s = SurfaceSpec.sphere()
    p, q = _normed(p), _normed(q)
    assert geodesic_distance(s, p, q) == pytest.approx(geodesic_distance(s, q, p), abs=1e-14)


@given(unit, unit, unit)
def test_sphere_triangle_inequality(p, q, r):
    s = SurfaceSpec.sphere()
    p, q, r = map(_normed, (p, q, r))
    d = lambda a, b: float(geodesic_distance(s, a, b))
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-10


@given(unit, st.floats(1e-4, 0.1))
def test_chordal_vs_geodesic(p, d):
    p = _normed(p)
    e = np.cross(p, [0.3, -0.5, 0.8])
    e /= np.linalg.norm(e)
    q = math.cos(d) * p + math.sin(d) * e
    g = float(geodesic_distance(SurfaceSpec.sphere(), p, q))
    c = float(chordal_distance(p, q))
    ratio = c / g
    assert 1 - g * g / 24 * 1.01 <= ratio <= 1 + 1e-12


pt2 = st.tuples(st.floats(-3, 3, allow_nan=False), st.floats(-3, 3, allow_nan=False))


@given(pt2, pt2, pt2)
def test_torus_metric_axioms(p, q, r):
    t = SurfaceSpec.torus([[1.0, 0.4], [0.0, 0.8]])
    d = lambda a, b: float(geodesic_distance(t, np.array(a), np.array(b)))
    assert d(p, q) == pytest.approx(d(q, p), abs=1e-12)
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-10
