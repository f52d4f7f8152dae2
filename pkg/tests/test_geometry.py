from math import gamma

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inclusionbem import check_admissible, integrate, make_sphere, make_star, scale_surface
from inclusionbem.errors import ConfigError
from inclusionbem.geometry import surface_from_config


def test_sphere_areas(sphere8):
    assert integrate(sphere8, 1.0) == pytest.approx(4 * np.pi, rel=1e-12)
    assert integrate(make_sphere(0, 0.5, 8), 1.0) == pytest.approx(np.pi, rel=1e-12)


def test_sphere_moments(sphere8):
    assert integrate(sphere8, lambda x: x[:, 0] ** 2) == pytest.approx(4 * np.pi / 3, rel=1e-12)
    assert abs(integrate(sphere8, lambda x: x[:, 2])) < 1e-13
    assert integrate(sphere8, lambda x: -1 / (4 * np.pi) * np.ones(len(x))) == pytest.approx(-1.0, abs=1e-12)


def test_surface_invariants(sphere8, star16):
    for s in (sphere8, star16):
        assert np.all(s.weights > 0)
        assert np.abs(np.linalg.norm(s.normals, axis=1) - 1).max() < 1e-14
    assert sphere8.size == 9 * 18
    assert make_sphere(0, 1, 8).size == sphere8.size


def test_sphere_rejects_bad_input():
    with pytest.raises(ConfigError):
        make_sphere(0, -1.0, 8)
    with pytest.raises(ConfigError):
        make_sphere(0, 1.0, 1)


def test_integrate_length_mismatch(sphere8):
    with pytest.raises(ValueError):
        integrate(sphere8, np.ones(sphere8.size - 1))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 16), st.integers(0, 16), st.integers(0, 16), st.floats(-2, 2))
def test_sphere_exact_on_polynomials(a, b, c, coef):
    L = 8
    if a + b + c > 2 * L:
        return
    s = make_sphere(0, 1, L)
    got = integrate(s, lambda x: coef * x[:, 0] ** a * x[:, 1] ** b * x[:, 2] ** c)
    # closed form for monomials on the unit sphere
    if a % 2 or b % 2 or c % 2:
        exact = 0.0
    else:
        bb = [(k + 1) / 2 for k in (a, b, c)]
        exact = coef * 2 * gamma(bb[0]) * gamma(bb[1]) * gamma(bb[2]) / gamma(sum(bb))
    assert abs(got - exact) <= 1e-12 * max(1.0, abs(exact))


def test_star_area_converges():
    coarse = make_star("1 + 0.1*cos(2*theta)", 12)
    fine = make_star("1 + 0.1*cos(2*theta)", 24)
    assert abs(coarse.area - fine.area) < 1e-8


def test_scaled_surface(sphere8):
    s = scale_surface(sphere8, 0.5)
    assert s.area == pytest.approx(np.pi, rel=1e-12)
    k = int(np.argmax(sphere8.nodes[:, 2]))
    assert np.allclose(s.nodes[k], 0.5 * sphere8.nodes[k])
    assert np.array_equal(s.normals, sphere8.normals)
    with pytest.raises(ValueError):
        scale_surface(sphere8, 0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 0.99))
def test_scaling_consistency(eps):
    s = make_sphere(0, 1, 8)
    f = lambda x: 1 + x[:, 0] ** 2 * x[:, 1] + np.cos(x[:, 2])
    lhs = integrate(scale_surface(s, eps), f(scale_surface(s, eps).nodes / eps))
    assert lhs == pytest.approx(eps ** 2 * integrate(s, f), rel=1e-13)


def test_admissibility_rules(sphere8):
    assert check_admissible(sphere8, sphere8, 0.3)
    assert not check_admissible(sphere8, sphere8, 1.2)
    shifted = make_sphere([0.5, 0, 0], 1.0, 8)
    assert check_admissible(sphere8, shifted, 0.4)
    assert not check_admissible(sphere8, shifted, 0.7)
    star = make_star("1 + 0.1*cos(2*theta)", 12)
    assert check_admissible(sphere8, star, 0.5)
    assert not check_admissible(sphere8, star, 0.95)


def test_deterministic_construction():
    a, b = make_star("1 + 0.2*sin(theta)^2*cos(phi)", 10), make_star("1 + 0.2*sin(theta)^2*cos(phi)", 10)
    assert np.array_equal(a.nodes, b.nodes)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.normals, b.normals)


def test_star_normals_match_sphere():
    s = make_star("1", 8)
    assert np.allclose(s.normals, make_sphere(0, 1, 8).normals, atol=1e-14)


def test_surface_from_config():
    s = surface_from_config({"kind": "sphere", "center": [0, 0, 0], "radius": 2.0, "order": 6})
    assert s.area == pytest.approx(16 * np.pi)
    with pytest.raises(ConfigError):
        surface_from_config({"kind": "sphere", "order": 6})
    with pytest.raises(ConfigError):
        surface_from_config({"kind": "torus", "order": 6})
