import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from lnecheck import geometry as g
from lnecheck.errors import DimensionMismatch, DomainError

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def points(q, min_norm=0.0):
    return arrays(np.float64, (q,), elements=finite).filter(lambda x: np.linalg.norm(x) > max(min_norm, 1e-8))


def test_stereo_examples():
    np.testing.assert_allclose(g.stereo_to_sphere([0, 0]), [0, 0, -1], atol=1e-15)
    np.testing.assert_allclose(g.stereo_to_sphere([1, 0]), [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(g.stereo_to_sphere([3, 4]), [6 / 26, 8 / 26, 24 / 26], atol=1e-15)
    np.testing.assert_allclose(g.stereo_from_sphere([0, 0, -1]), [0, 0], atol=1e-15)
    np.testing.assert_allclose(g.stereo_from_sphere([1, 0, 0]), [1, 0], atol=1e-15)


def test_stereo_round_trip_large_radii():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(1000, 2)) * 10.0 ** rng.uniform(-3, 6, size=(1000, 1))
    x *= np.minimum(1.0, 1e6 / np.linalg.norm(x, axis=1))[:, None]
    back = g.stereo_from_sphere(g.stereo_to_sphere(x))
    assert np.max(np.linalg.norm(back - x, axis=1) / np.maximum(1, np.linalg.norm(x, axis=1))) < 1e-8


def test_stereo_matches_closed_form():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(500, 3)) * 5
    np.testing.assert_allclose(g.stereo_to_sphere(x), oracles.sigma(x), atol=1e-13)
    y = g.stereo_to_sphere(x)
    np.testing.assert_allclose(g.stereo_from_sphere(y), oracles.sigma_inverse(y), rtol=1e-10, atol=1e-10)


def test_north_pole_rejected():
    with pytest.raises(DomainError):
        g.stereo_from_sphere([0, 0, 1])
    with pytest.raises(DomainError):
        g.stereo_from_sphere([1e-10, 0, np.sqrt(1 - 1e-20)])


def test_phi_examples():
    np.testing.assert_allclose(g.phi_chart([0, 0]), [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(g.phi_chart(g.invert([4.0, 0.0])), [8 / 17, 0, 15 / 17], atol=1e-12)
    np.testing.assert_allclose(g.stereo_to_sphere([4.0, 0.0]), [8 / 17, 0, 15 / 17], atol=1e-12)
    np.testing.assert_allclose(g.phi_chart([0.5, 0]), [0.8, 0, 0.6], atol=1e-15)
    with pytest.raises(DomainError):
        g.phi_chart([0.6, 0])


def test_inversion_rejects_origin():
    with pytest.raises(DomainError):
        g.invert([0.0, 0.0])
    with pytest.raises(DomainError):
        g.invert([1e-10, 0.0])


def test_ambient_distance_examples():
    E = g.AmbientMetric.euclidean(2)
    assert g.ambient_distance(E, [0, 0], [3, 4]) == pytest.approx(5)
    S = g.AmbientMetric.sphere(2)
    assert g.ambient_distance(S, g.north_pole(2), g.south_pole(2)) == pytest.approx(2)
    P = g.AmbientMetric.projective()
    assert g.ambient_distance(P, [1, 0, 0], [-1, 0, 0]) == pytest.approx(0, abs=1e-15)
    assert g.ambient_distance(P, [1, 0, 0], [0, 1, 0]) == pytest.approx(math.pi / 2)
    with pytest.raises(DimensionMismatch):
        g.ambient_distance(E, [0, 0], [0, 0, 0])
    with pytest.raises(DimensionMismatch):
        g.ambient_distance(S, [0, 0], [0, 0])


def test_cosine_gap_examples():
    assert g.cosine_gap(1, 1, math.pi / 2) == pytest.approx(2)
    assert g.cosine_gap(1, 3, 0) == pytest.approx(2)
    assert g.cosine_gap(2, 3, math.pi / 6) == pytest.approx(math.sqrt(7), rel=1e-12)
    assert g.cosine_gap(2, 3, math.pi / 6) == pytest.approx(2.6458, abs=1e-4)


def test_metric_validation():
    with pytest.raises(ValueError):
        g.AmbientMetric("hyperbolic", 2)
    with pytest.raises(ValueError):
        g.AmbientMetric.euclidean(0)
    with pytest.raises(ValueError):
        g.AmbientMetric("projective", 3)
    assert g.AmbientMetric.sphere(2).coord_dim == 3
    assert str(g.AmbientMetric.projective()) == "PROJECTIVE(2)"


def test_pole_distance_at_radius():
    R = np.array([0.0, 1.0, 10.0, 1e4])
    x = np.column_stack([R, np.zeros_like(R)])
    np.testing.assert_allclose(g.distance_to_pole(g.stereo_to_sphere(x)), g.pole_distance_at_radius(R), rtol=1e-9)


@settings(max_examples=300, deadline=None)
@given(q=st.integers(1, 4), data=st.data())
def test_inversion_is_involution(q, data):
    x = data.draw(points(q, 1e-6))
    y = g.invert(g.invert(x))
    assert np.linalg.norm(y - x) <= 1e-10 * max(1.0, np.linalg.norm(x))


@settings(max_examples=300, deadline=None)
@given(q=st.integers(1, 4), data=st.data())
def test_sphere_norm(q, data):
    x = data.draw(arrays(np.float64, (q,), elements=finite))
    y = g.stereo_to_sphere(x)
    assert abs(np.linalg.norm(y) - 1) < 1e-12
    assert y[-1] < 1


@settings(max_examples=300, deadline=None)
@given(x=points(2, 2.0))
def test_phi_after_inversion_on_chart(x):
    np.testing.assert_allclose(g.phi_chart(g.invert(x)), g.stereo_to_sphere(x), atol=1e-10)


@settings(max_examples=300, deadline=None)
@given(q=st.integers(1, 3), data=st.data())
def test_phi_after_inversion_everywhere(q, data):
    x = data.draw(points(q, 1e-6))
    np.testing.assert_allclose(g.phi_chart(g.invert(x), check=False), g.stereo_to_sphere(x), atol=1e-10)


@settings(max_examples=300, deadline=None)
@given(y=st.floats(0, 100), t=st.floats(0, 100), a=st.floats(0, 2 * math.pi), b=st.floats(0, 2 * math.pi))
def test_cosine_gap_matches_vectors(y, t, a, b):
    u1 = np.array([math.cos(a), math.sin(a)])
    u2 = np.array([math.cos(b), math.sin(b)])
    angle = abs(math.atan2(math.sin(a - b), math.cos(a - b)))
    assert g.cosine_gap(y, t, angle / 2) == pytest.approx(np.linalg.norm(y * u1 - t * u2), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(a=arrays(np.float64, (3,), elements=st.floats(-1, 1)), b=arrays(np.float64, (3,), elements=st.floats(-1, 1)),
       sa=st.sampled_from([-1.0, 1.0]), sb=st.sampled_from([-1.0, 1.0]))
def test_projective_sign_invariance(a, b, sa, sb):
    if np.linalg.norm(a) < 1e-3 or np.linalg.norm(b) < 1e-3:
        return
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    P = g.AmbientMetric.projective()
    d = g.ambient_distance(P, a, b)
    assert g.ambient_distance(P, sa * a, sb * b) == pytest.approx(d, abs=1e-12)
    assert d == pytest.approx(math.acos(min(1.0, abs(a @ b))), abs=1e-6)
    assert 0 <= d <= math.pi / 2 + 1e-12


def test_great_circle_within_pi_over_two_of_chord():
    rng = np.random.default_rng(2)
    a = g.stereo_to_sphere(rng.normal(size=(200, 2)) * 3)
    b = g.stereo_to_sphere(rng.normal(size=(200, 2)) * 3)
    chord = np.linalg.norm(a - b, axis=1)
    arc = g.great_circle_distance(a, b)
    assert np.all(arc >= chord - 1e-12)
    assert np.all(arc <= math.pi / 2 * chord + 1e-12)


def test_projective_embedding():
    v = g.affine_to_projective(np.array([[3.0, 4.0]]))
    np.testing.assert_allclose(v, [[3, 4, 1] / np.sqrt(26)])
    assert g.distance_to_line_at_infinity(g.direction_to_projective([1.0, 2.0])) == 0
    with pytest.raises(DimensionMismatch):
        g.affine_to_projective([1.0, 2.0, 3.0])
