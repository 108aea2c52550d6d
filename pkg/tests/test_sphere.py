import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import rotations, unit_vectors
from qebeams.sphere import (E1, E2, E3, OrientedGreatCircle, cartesian_to_spherical, circle_point_distance,
                            exp_map, frame_for_pole, frames_for_poles, geodesic_distance, normalize,
                            rotation_to_pole, spherical_to_cartesian, tangent_basis)


@pytest.mark.parametrize("p,q,expected", [(E3, E3, 0.0), (E3, -E3, math.pi), (E3, E1, math.pi / 2)])
def test_geodesic_distance_examples(p, q, expected):
    assert geodesic_distance(p, q) == pytest.approx(expected, abs=1e-15)


def test_geodesic_distance_clamps_rounding():
    p = normalize(np.array([1.0, 1e-9, 0.0]))
    assert np.isfinite(geodesic_distance(p, p * (1 + 1e-16)))


@given(unit_vectors(), unit_vectors(), unit_vectors())
def test_geodesic_distance_is_a_metric(p, q, r):
    d = geodesic_distance
    assert d(p, q) >= 0
    assert d(p, q) == pytest.approx(d(q, p), abs=1e-15)
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-10


def test_frame_examples():
    f = frame_for_pole(E3)
    np.testing.assert_allclose(f.matrix(), np.eye(3), atol=1e-15)
    f = frame_for_pole(E1)
    np.testing.assert_allclose([f.u, f.v, f.p], [E2, E3, E1], atol=1e-15)
    f = frame_for_pole(-E3)
    assert np.dot(np.cross(f.u, f.v), f.p) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(f.matrix(), np.diag([1.0, -1.0, -1.0]), atol=1e-15)


@given(unit_vectors())
def test_frame_is_orthonormal_and_right_handed(p):
    f = frame_for_pole(p)
    M = f.matrix()
    np.testing.assert_allclose(M.T @ M, np.eye(3), atol=1e-12)
    assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(f.p, p, atol=0)


def test_frame_near_pole_uses_tie_break():
    p = normalize(np.array([1e-11, 0.0, 1.0]))
    f = frame_for_pole(p)
    assert f.u @ E1 > 0.999
    M = f.matrix()
    np.testing.assert_allclose(M.T @ M, np.eye(3), atol=1e-12)


def test_frames_for_poles_matches_scalar():
    P = normalize(np.random.default_rng(0).standard_normal((20, 3)))
    U, V = frames_for_poles(P)
    for j, p in enumerate(P):
        f = frame_for_pole(p)
        np.testing.assert_array_equal(U[j], f.u)
        np.testing.assert_array_equal(V[j], f.v)


def test_circle_examples():
    c = OrientedGreatCircle.from_pole(E3)
    np.testing.assert_allclose(c.point(0.0), E1, atol=1e-15)
    np.testing.assert_allclose(c.point(math.pi / 2), E2, atol=1e-15)
    np.testing.assert_allclose(c.tangent(0.0), E2, atol=1e-15)
    np.testing.assert_allclose(c.tangent(math.pi / 2), -E1, atol=1e-15)


@given(unit_vectors(), st.floats(-10, 10))
def test_circle_points_are_unit_and_orthogonal_to_pole(p, t):
    c = OrientedGreatCircle.from_pole(p)
    x, xi = c.point(t), c.tangent(t)
    assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-14)
    assert abs(x @ p) < 1e-14
    assert abs(x @ xi) < 1e-14
    np.testing.assert_allclose(np.cross(x, xi), p, atol=1e-14)


def test_circle_point_distance_examples():
    assert circle_point_distance(E3, E1) == pytest.approx(0.0, abs=1e-15)
    assert circle_point_distance(E3, E3) == pytest.approx(math.pi / 2, abs=1e-15)
    for phi in [0.1, 0.7, 1.5, 2.2, 3.0]:
        q = spherical_to_cartesian(phi, 0.4)
        assert circle_point_distance(E3, q) == pytest.approx(abs(math.pi / 2 - phi), abs=1e-12)


@given(unit_vectors(), unit_vectors())
def test_circle_distance_plus_colatitude_is_right_angle(p, q):
    assert circle_point_distance(p, q) == pytest.approx(abs(math.pi / 2 - geodesic_distance(p, q)), abs=1e-12)


def test_rotation_to_pole_examples():
    np.testing.assert_allclose(rotation_to_pole(E3), np.eye(3), atol=1e-15)
    R = rotation_to_pole(-E3)
    np.testing.assert_allclose(R, np.diag([1.0, -1.0, -1.0]), atol=1e-15)  # pi about e1


@given(unit_vectors(), st.floats(0, 2 * math.pi))
def test_rotation_to_pole_carries_equator_onto_circle(p, t):
    R = rotation_to_pole(p)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    eq = OrientedGreatCircle.from_pole(E3)
    np.testing.assert_allclose(R @ eq.point(t), OrientedGreatCircle.from_pole(p).point(t), atol=1e-12)


@given(st.floats(0, math.pi), st.floats(-math.pi, math.pi))
def test_spherical_round_trip(phi, theta):
    x = spherical_to_cartesian(phi, theta)
    phi2, theta2 = cartesian_to_spherical(x)
    np.testing.assert_allclose(spherical_to_cartesian(phi2, theta2), x, atol=1e-12)


@given(unit_vectors(), st.floats(0, 3.0), st.floats(0, 2 * math.pi))
def test_exp_map_moves_by_length(x, s, a):
    u, v = tangent_basis(x)
    y = exp_map(x, s * (math.cos(a) * u + math.sin(a) * v))
    assert geodesic_distance(x, y) == pytest.approx(s, abs=1e-7)


@given(rotations(), unit_vectors(), unit_vectors())
def test_distance_is_rotation_invariant(R, p, q):
    assert geodesic_distance(R @ p, R @ q) == pytest.approx(geodesic_distance(p, q), abs=1e-7)
