import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polygaf.geometry import (
    IntensityVector,
    MoebiusAutomorphism,
    PolydiskPoint,
    PseudoHyperbolicPolydisk,
    apply_automorphism,
    intensity_form_coefficients,
    invariant_density,
    nu_volume,
    pseudo_distance,
)
from polygaf.quadrature import quadrature

from conftest import random_points


def disk_points(max_modulus=0.95):
    return st.tuples(st.floats(0, max_modulus), st.floats(0, 2 * np.pi)).map(
        lambda p: p[0] * np.exp(1j * p[1])
    )


def test_point_rejects_boundary():
    with pytest.raises(ValueError):
        PolydiskPoint([0.5, 1.0])
    with pytest.raises(ValueError):
        PolydiskPoint([1 - 1e-13])
    assert PolydiskPoint.origin(3).n == 3


def test_intensity_positive():
    with pytest.raises(ValueError):
        IntensityVector([1.0, 0.0])
    L = IntensityVector([2.0, 3.0])
    assert L.total == 5.0 and L.product == 6.0


def test_pseudo_distance_examples():
    assert pseudo_distance(0, 0.3 + 0.4j) == pytest.approx(0.5, abs=1e-15)
    assert pseudo_distance(0.2j, 0.2j) == 0.0
    assert pseudo_distance(0.5, -0.5) == pytest.approx(0.8, abs=1e-15)
    with pytest.raises(ValueError):
        pseudo_distance(1.0, 0.0)


@given(disk_points(), disk_points())
def test_pseudo_distance_symmetric_in_range(a, b):
    d = pseudo_distance(a, b)
    assert 0 <= d < 1
    assert d == pytest.approx(pseudo_distance(b, a), rel=1e-12, abs=1e-15)


def test_pseudo_distance_zero_only_on_diagonal():
    # exact rationals: numerator vanishes iff the points coincide
    assert pseudo_distance(0.25, 0.25) == 0.0
    assert pseudo_distance(0.25, 0.5) > 0


def test_automorphism_sends_center_to_origin(rng):
    w = random_points(rng, 1, 3)[0]
    a = MoebiusAutomorphism(w, rng.uniform(0, 2 * np.pi, 3))
    assert np.max(np.abs(a(w))) < 1e-15
    ident = MoebiusAutomorphism(np.zeros(3))
    z = random_points(rng, 1, 3)[0]
    np.testing.assert_array_equal(apply_automorphism(ident, z), z)


def test_automorphism_dimension_mismatch():
    a = MoebiusAutomorphism([0.1, 0.2])
    with pytest.raises(ValueError):
        apply_automorphism(a, [0.1, 0.2, 0.3])


@given(st.lists(disk_points(0.9), min_size=6, max_size=6), st.floats(0, 2 * np.pi))
def test_automorphism_is_isometry(pts, theta):
    w, z, u = np.array(pts[:2]), np.array(pts[2:4]), np.array(pts[4:])
    a = MoebiusAutomorphism(w, [theta, -theta])
    az, au = a(z), a(u)
    assert np.all(np.abs(az) < 1) and np.all(np.abs(au) < 1)
    before = pseudo_distance(z, u)
    after = pseudo_distance(az, au)
    np.testing.assert_allclose(after, before, rtol=1e-12, atol=1e-14)


def test_inverse_roundtrip(rng):
    w = random_points(rng, 1, 2)[0]
    a = MoebiusAutomorphism(w, [0.3, 1.1])
    z = random_points(rng, 50, 2)
    np.testing.assert_allclose(a.inverse(a(z)), z, atol=1e-13)


def test_invariant_density_examples():
    assert invariant_density(np.zeros(2)) == pytest.approx(1 / np.pi**2, rel=1e-15)
    assert invariant_density([0.5]) == pytest.approx(0.565884, abs=1e-6)


def test_density_jacobian_invariance(rng):
    w = random_points(rng, 1, 2)[0]
    a = MoebiusAutomorphism(w, [0.7, 2.0])
    z = random_points(rng, 200, 2)
    lhs = invariant_density(a(z)) * a.jacobian(z)
    np.testing.assert_allclose(lhs, invariant_density(z), rtol=1e-11)


def test_jacobian_against_finite_differences(rng):
    w = random_points(rng, 1, 1)[0]
    a = MoebiusAutomorphism(w, [0.4])
    z = random_points(rng, 1, 1, 0.8)[0]
    h = 1e-6
    fd = (a(z + h) - a(z - h)) / (2 * h)
    np.testing.assert_allclose(a.derivative(z), fd, rtol=1e-8)


def test_nu_volume_closed_form_and_quadrature():
    E = PseudoHyperbolicPolydisk.at_origin([0.5])
    assert nu_volume(E) == pytest.approx(1 / 3, rel=1e-15)
    q = quadrature(lambda t: np.ones(t.shape[0]), (0.5,), scheme="radial", rtol=1e-12)
    assert q == pytest.approx(1 / 3, rel=1e-10)
    E2 = PseudoHyperbolicPolydisk.at_origin([0.3, 0.6])
    q2 = quadrature(lambda t: np.ones(t.shape[0]), (0.3, 0.6), scheme="radial", rtol=1e-12)
    assert nu_volume(E2) == pytest.approx(q2, rel=1e-10)
    assert nu_volume(PseudoHyperbolicPolydisk.at_origin([1e-8])) < 1e-15


def test_nu_volume_independent_of_center():
    # integrate the indicator of E(w, r) through the inverse map of the unit-disk ball
    w, r = 0.4 + 0.2j, 0.5
    a = MoebiusAutomorphism([w])
    E = PseudoHyperbolicPolydisk([w], [r])

    def pulled(u):
        z = a.inverse(u)
        # change of variables z = a^{-1}(u): density(z) |dz/du|^2 / density(u) == 1
        return invariant_density(z) / invariant_density(u) / a.jacobian(z)

    q = quadrature(pulled, (r,), scheme="polar", rtol=1e-10)
    assert q == pytest.approx(nu_volume(E), rel=1e-9)
    assert bool(E.contains(np.array([w])))


def test_intensity_form_coefficients():
    np.testing.assert_allclose(intensity_form_coefficients(np.zeros(2), [2.0, 5.0]), [2.0, 5.0])
    assert intensity_form_coefficients([0.5], [2.0])[0] == pytest.approx(3.5556, abs=1e-4)
    z = np.array([0.2, 0.5j])
    c1 = intensity_form_coefficients(z, [1.0, 2.0])
    c3 = intensity_form_coefficients(z, [3.0, 6.0])
    np.testing.assert_allclose(c3, 3 * c1, rtol=1e-15)
    with pytest.raises(ValueError):
        intensity_form_coefficients(z, [1.0])
