import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rotations, unit_vectors
from oracles import FROZEN, beam_abs_direct
from qebeams.beams import (C_N_LIMIT, beam, complex_power, harmonic_space_dim, log_norm_constant, norm_constant,
                           overlap_bound, overlap_numeric, pole_distance)
from qebeams.quadrature import integrate_sphere, sphere_rule
from qebeams.sphere import E1, E3, exp_map, frame_for_pole, normalize, spherical_to_cartesian, tangent_basis


def _pole_at(beta, N=None):
    return np.array([math.sin(beta), 0.0, math.cos(beta)])


def test_log_norm_constant_small_N():
    assert math.exp(log_norm_constant(1)) == pytest.approx(math.sqrt(3 / (8 * math.pi)), rel=1e-14)
    assert math.exp(log_norm_constant(1)) == pytest.approx(0.345494, abs=1e-6)
    assert math.exp(log_norm_constant(2)) == pytest.approx(math.sqrt(15 / (32 * math.pi)), rel=1e-14)


@pytest.mark.parametrize("N", [1, 2, 10, 100, 1000])
def test_log_norm_constant_against_exact_beta(N):
    assert log_norm_constant(N) == pytest.approx(FROZEN["log_norm_constant"][N], abs=1e-14)


@pytest.mark.parametrize("N", [1, 10, 100, 1000])
def test_normalization_by_quadrature(N):
    rule = sphere_rule(2 * N)
    q = 2 * math.pi * np.sum(rule.t_weights * (1 - rule.t**2) ** N)
    assert math.exp(2 * log_norm_constant(N)) * q == pytest.approx(1.0, rel=1e-12)


def test_norm_constant_bounded_and_converges():
    Ns = [1, 4, 64, 1024, 10**6, 10**7]
    C = [norm_constant(N) for N in Ns]
    assert max(C) == C[0] < 0.35
    assert all(a >= b for a, b in zip(C, C[1:]))
    assert C[-1] == pytest.approx(C_N_LIMIT, rel=1e-6)


def test_log_norm_constant_rejects_zero():
    with pytest.raises(ValueError):
        log_norm_constant(0)


def test_north_pole_beam_is_highest_weight():
    N = 17
    b = beam(N, E3)
    phi, theta = 0.9, 1.3
    x = spherical_to_cartesian(phi, theta)
    expected = math.exp(log_norm_constant(N)) * math.sin(phi) ** N * np.exp(1j * N * theta)
    assert b.eval(x) == pytest.approx(expected, rel=1e-12)
    xx = x
    assert b.eval(xx) == pytest.approx(math.exp(log_norm_constant(N)) * (x[0] + 1j * x[1]) ** N, rel=1e-12)


def test_south_pole_beam_magnitude():
    N = 12
    x = spherical_to_cartesian(1.1, 0.4)
    b = beam(N, -E3)
    assert abs(b.eval(x)) == pytest.approx(math.exp(log_norm_constant(N)) * math.sin(1.1) ** N, rel=1e-12)
    # phase follows the frame: conj of the north beam up to the fixed frame
    assert b.eval(x) == pytest.approx(math.exp(log_norm_constant(N)) * (x[0] - 1j * x[1]) ** N, rel=1e-12)


def test_eval_on_circle_and_at_pole():
    N = 40
    p = normalize(np.array([1.0, 2.0, -0.5]))
    b = beam(N, p)
    f = frame_for_pole(p)
    assert abs(b.eval(f.u)) == pytest.approx(b.amplitude, rel=1e-14)
    assert b.eval(p) == 0
    assert b.abs(p) == 0


def test_eval_against_direct_power():
    b = beam(100, E3)
    x = spherical_to_cartesian(math.pi / 2 - 0.3, 0.7)
    assert b.abs(x) == pytest.approx(FROZEN["beam_abs_N100_d0.3"], rel=1e-12)
    assert FROZEN["beam_abs_N100_d0.3"] == pytest.approx(beam_abs_direct(100, 0.3), rel=1e-15)


def test_log_domain_has_no_overflow_or_nan():
    b = beam(4096, E3)
    x = spherical_to_cartesian(np.array([0.01, 0.5, 1.5]), np.zeros(3))
    v = b.eval(x)
    assert np.all(np.isfinite(v))
    assert v[0] == 0


@given(unit_vectors(), unit_vectors(), st.integers(1, 300))
def test_abs_depends_on_circle_distance(p, x, N):
    b = beam(N, p)
    # cos of the distance to the circle, as |p x x| (asin(p.x) loses it near the pole)
    cos_d = float(np.linalg.norm(np.cross(p, x)))
    expected = math.exp(b.log_amplitude + N * math.log(max(cos_d, 1e-300)))
    assert b.abs(x) == pytest.approx(expected, rel=1e-9, abs=1e-14 * b.amplitude)


@given(rotations(), unit_vectors(), unit_vectors(), st.integers(1, 200))
def test_rotation_equivariance(R, p, x, N):
    assert beam(N, R @ p).abs(R @ x) == pytest.approx(beam(N, p).abs(x), rel=1e-9, abs=1e-12)


@given(unit_vectors(), unit_vectors(), st.floats(0, 2 * math.pi), st.integers(1, 100))
def test_frame_phase_invariance(p, x, a, N):
    f = frame_for_pole(p)
    b1 = beam(N, p)
    b2 = beam(N, p, f.in_plane_rotated(a))
    assert abs(b2.eval(x)) == pytest.approx(abs(b1.eval(x)), rel=1e-10, abs=1e-12)


def test_complex_power_matches_numpy():
    a, b = np.array([0.3, -0.8, 0.0]), np.array([0.5, 0.1, -1.0])
    for n in [1, 2, 7, 64]:
        re, im = complex_power(a, b, n)
        np.testing.assert_allclose(re + 1j * im, (a + 1j * b) ** n, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("N", [1, 7, 64, 333, 1024])
def test_beam_is_normalized(N):
    p = normalize(np.array([0.2, -0.7, 0.4]))
    rule = sphere_rule(2 * N)
    assert integrate_sphere(beam(N, p).abs(rule.nodes) ** 2, rule) == pytest.approx(1.0, abs=1e-10)


def test_overlap_bound_examples():
    N = 10
    assert overlap_bound(beam(N, E3), beam(N, -E3)) == 0.0
    assert overlap_bound(beam(N, E3), beam(N, E3)) == 1.0
    assert overlap_bound(beam(N, E3), beam(N, E1)) == pytest.approx(9.765625e-4, rel=1e-14)


def test_overlap_bound_rejects_mixed_degree():
    with pytest.raises(ValueError):
        overlap_bound(beam(3, E3), beam(4, E3))


def test_overlap_numeric_examples():
    b = beam(30, normalize(np.array([1.0, 1.0, 1.0])))
    assert overlap_numeric(b, b) == pytest.approx(1.0, abs=1e-10)
    assert abs(overlap_numeric(beam(30, E3), beam(30, -E3))) <= 1e-12
    assert abs(overlap_numeric(beam(30, E1), beam(30, -E1))) <= 1e-12


def test_overlap_n20_beta_pi_over_3():
    bj, bk = beam(20, E3), beam(20, _pole_at(math.pi / 3))
    ov = abs(overlap_numeric(bj, bk))
    bound = math.cos(math.pi / 6) ** 40
    assert ov <= bound + 1e-12
    # the bound is attained in magnitude (measured, not assumed)
    assert ov / bound == pytest.approx(1.0, abs=1e-10)


def test_overlap_rejects_coarse_rule():
    with pytest.raises(ValueError, match="too coarse"):
        overlap_numeric(beam(20, E3), beam(20, E1), sphere_rule(30))
    with pytest.raises(ValueError, match="precision"):
        overlap_numeric(beam(2, E3), beam(2, E1), precision="quad")


def test_extended_overlap_lowers_floor():
    N = 64
    bj, bk = beam(N, E3), beam(N, _pole_at(2.9))
    bound = overlap_bound(bj, bk)
    ext = abs(overlap_numeric(bj, bk, precision="extended"))
    assert ext == pytest.approx(bound, rel=1e-3)
    assert pole_distance(bj, bk) == pytest.approx(2.9, abs=1e-14)


@settings(max_examples=15)
@given(unit_vectors(), st.floats(0.05, math.pi), st.sampled_from([4, 16, 48]), st.floats(0, 2 * math.pi))
def test_overlap_below_bound_and_phase_invariant(p, beta, N, a):
    u, v = tangent_basis(p)
    q = exp_map(p, beta * u)
    bj, bk = beam(N, p), beam(N, q)
    ov = overlap_numeric(bj, bk)
    assert abs(ov) <= overlap_bound(bj, bk) + 1e-10
    bk2 = beam(N, q, frame_for_pole(q).in_plane_rotated(a))
    assert abs(overlap_numeric(bj, bk2)) == pytest.approx(abs(ov), abs=1e-12)


@pytest.mark.parametrize("N", [4, 64, 512])
def test_concentration_moment(N):
    p = normalize(np.array([0.3, 0.1, -0.9]))
    rule = sphere_rule(2 * N + 2)
    x = rule.nodes
    m2 = integrate_sphere((x @ p) ** 2 * beam(N, p).abs(x) ** 2, rule)
    assert m2 == pytest.approx(1 / (2 * N + 3), abs=1e-10)


def test_rotated_beam_matches_beam_at_rotated_pole():
    R = np.array([[0, -1.0, 0], [1.0, 0, 0], [0, 0, 1.0]])
    b = beam(9, E1)
    x = normalize(np.array([0.2, 0.5, 0.1]))
    assert abs(b.rotated(R).eval(R @ x)) == pytest.approx(abs(b.eval(x)), rel=1e-13)


def test_harmonic_space_dim():
    assert [harmonic_space_dim(N) for N in (1, 2, 10)] == [3, 5, 21]
