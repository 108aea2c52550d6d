import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rotations, unit_vectors
from oracles import FROZEN, LIOUVILLE, circle_average_sum_closed_form
from qebeams.beams import beam
from qebeams.pointsets import PointSet, generate
from qebeams.quadrature import BANK, Observable, observable_bank, sphere_rule
from qebeams.qe import (QEReport, circle_average_sum, husimi_density, husimi_mass_near, liouville_value,
                        offdiagonal_scan, physical_matrix_element, position_average, qe_defect, qe_report,
                        semiclassical_h)
from qebeams.sphere import E3, frame_for_pole, frames_for_poles, normalize
from qebeams.superposition import build

ANTIPODAL = PointSet(2, [[0, 0, 1.0], [0, 0, -1.0]])


def _zonal(p, k):
    return Observable(f"<x,p>^{2 * k}", lambda x: (x @ p) ** (2 * k), "position", 2 * k)


def test_semiclassical_h():
    assert semiclassical_h(64) == 1 / 64
    assert semiclassical_h(64, "sqrt") == pytest.approx(1 / math.sqrt(64 * 65))
    with pytest.raises(ValueError):
        semiclassical_h(4, "planck")


def test_physical_element_normalization():
    F = build(40, 1.0, generate("fibonacci", 6), override=True).normalized()
    assert physical_matrix_element(F, BANK["one"]) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("N", [4, 64])
@pytest.mark.parametrize("k", [1, 2])
def test_zonal_moments_match_beta_ratio(N, k):
    p = normalize(np.array([-0.4, 0.2, 0.5]))
    ratio = float(mp.beta(k + 0.5, N + 1) / mp.beta(0.5, N + 1))
    assert physical_matrix_element(beam(N, p), _zonal(p, k)) == pytest.approx(ratio, abs=1e-10)
    if k == 1:
        assert ratio == pytest.approx(1 / (2 * N + 3), rel=1e-14)


def test_physical_element_errors():
    with pytest.raises(ValueError, match="covector"):
        physical_matrix_element(beam(4, E3), BANK["xi3^2"])
    with pytest.raises(ValueError, match="too coarse"):
        physical_matrix_element(beam(10, E3), BANK["x3^2"], sphere_rule(20))


@pytest.mark.slow
def test_physical_x3_squared_trend():
    # measured trend towards the symmetry-forced value 1/3 (recorded, not a paper claim)
    errs = []
    for N in (64, 256, 1024):
        F = build(N, 1.0, generate("fibonacci", int(math.sqrt(N) // 2 * 2)), override=True).normalized()
        errs.append(abs(physical_matrix_element(F, BANK["x3^2"]) - 1 / 3))
    print("x3^2 physical-element errors at N=64,256,1024:", errs)
    assert errs[-1] < errs[0]


def test_position_average_values():
    for name in ("one", "x3^2", "x1x2", "zonal4"):
        assert position_average(BANK[name]) == pytest.approx(LIOUVILLE[name], abs=1e-14)


def test_circle_average_sum_examples():
    F = build(20, 1.0, ANTIPODAL, override=True)
    assert circle_average_sum(F, BANK["one"]) == pytest.approx(1.0, abs=1e-15)
    assert circle_average_sum(F, BANK["x3^2"]) == pytest.approx(0.0, abs=1e-15)
    ps = generate("fibonacci", 64)
    expected = np.mean((1 - ps.points[:, 2] ** 2) / 2)
    assert circle_average_sum(ps, BANK["x3^2"]) == pytest.approx(expected, abs=1e-14)


def test_circle_average_sum_accepts_poles_or_superposition():
    ps = generate("fibonacci", 10)
    F = build(64, 1.0, ps, override=True)
    for a in observable_bank():
        v = circle_average_sum(F, a)
        assert v == circle_average_sum(ps, a) == circle_average_sum(ps.points, a)
        assert v == pytest.approx(circle_average_sum_closed_form(a.name, ps.points), abs=1e-12)


def test_qe_defect_examples():
    F = build(20, 1.0, ANTIPODAL, override=True)
    assert qe_defect(F, BANK["one"]) <= 1e-12
    assert qe_defect(F, BANK["x3^2"]) == pytest.approx(1 / 3, abs=1e-10)


@pytest.mark.parametrize("name", [n for n in BANK if n != "one"])
def test_fibonacci_defects_against_closed_forms(name):
    got = [qe_defect(generate("fibonacci", m), BANK[name]) for m in (8, 32, 128, 512)]
    np.testing.assert_allclose(got, FROZEN["defects"][name], rtol=1e-6, atol=1e-12)


@given(st.integers(1, 200), st.integers(0, 10**6))
@settings(max_examples=20)
def test_defect_of_constant_vanishes(m, seed):
    assert qe_defect(generate("uniform-random", m, seed), BANK["one"]) <= 1e-12


@given(rotations(), st.sampled_from([n for n in BANK if n != "one"]))
@settings(max_examples=15)
def test_defect_rotation_invariant(R, name):
    ps = generate("fibonacci", 30)
    a = BANK[name]
    assert qe_defect(ps.rotated(R), a.rotated(R)) == pytest.approx(qe_defect(ps, a), abs=1e-10)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
@settings(max_examples=20)
def test_circle_average_sum_linear(s, t, seed):
    ps = generate("uniform-random", 17, seed)
    f, g = BANK["x1x2"], BANK["x1^2*xi3^2"]
    h = Observable("comb", lambda x, xi: s * f(x) + t * g(x, xi), "phase", 4)
    assert circle_average_sum(ps, h) == pytest.approx(
        s * circle_average_sum(ps, f) + t * circle_average_sum(ps, g), abs=1e-12)


@given(unit_vectors(), st.floats(0, 2 * math.pi))
def test_even_covector_observable_depends_on_circle_only(p, a):
    g = BANK["xi3^2"]
    f = frame_for_pole(p).in_plane_rotated(a)
    from qebeams.quadrature import circle_averages
    v = circle_averages(f.u[None], f.v[None], g)[0]
    # reversed orientation flips xi; even g does not notice
    w = circle_averages(f.v[None], f.u[None], g)[0]
    t = np.linspace(0, 2 * np.pi, 4001)[:-1]
    direct = np.mean((-np.sin(t) * f.u[2] + np.cos(t) * f.v[2]) ** 2)
    assert v == pytest.approx(direct, abs=1e-10)
    assert w == pytest.approx(v, abs=1e-12)


def test_liouville_value_cached_and_correct():
    a = BANK["x1^2*xi3^2"]
    assert liouville_value(a) == liouville_value(a) == pytest.approx(2 / 15, abs=1e-10)


def test_offdiagonal_antipodal():
    scan = offdiagonal_scan(64, ANTIPODAL, prune=False)
    assert scan.max_abs <= 1e-12
    assert offdiagonal_scan(64, ANTIPODAL).table == []
    assert offdiagonal_scan(64, PointSet(1, [E3])).argmax is None


def test_offdiagonal_certified_set_below_bound():
    N = 256
    ps = generate("fibonacci", 16)
    from qebeams.pointsets import min_separation
    bound = math.cos(min_separation(ps)[0] / 2) ** (2 * N)
    assert offdiagonal_scan(N, ps).max_abs <= bound  # every pair is pruned here
    # unpruned, measured above the extended-precision round-off floor (~1e-18)
    scan = offdiagonal_scan(N, ps, prune=False, precision="extended")
    assert scan.max_abs <= bound + 1e-17
    for j, k, b, bnd, ov in scan.table:
        assert ov <= bnd + 1e-17


def test_offdiagonal_decays_superpolynomially():
    ps = generate("fibonacci", 8)
    Ns = np.array([16, 32, 64, 128])
    vals = np.array([offdiagonal_scan(int(N), ps, prune=False, precision="extended").max_abs for N in Ns])
    assert np.all(np.diff(vals) < 0)
    # local log-log slopes steepen: faster than any fixed power
    slopes = np.diff(np.log(vals)) / np.diff(np.log(Ns))
    assert np.all(np.diff(slopes) < 0)


def test_husimi_single_beam():
    N = 30
    q = normalize(np.array([0.3, 0.5, -0.2]))
    grid = PointSet(3, [q, -q, normalize(np.array([1.0, 0, 0]))])
    d = husimi_density(beam(N, q), N, grid)
    assert d[0] == pytest.approx(1.0, abs=1e-10)
    assert d[1] <= 1e-24
    assert d[2] <= ((1 + q[0]) / 2) ** (2 * N) + 1e-12


def test_husimi_checks_degree():
    with pytest.raises(ValueError):
        husimi_density(beam(10, E3), 12, PointSet(1, [E3]))
    with pytest.raises(ValueError, match="too coarse"):
        husimi_density(beam(10, E3), 10, PointSet(1, [E3]), sphere_rule(8))


@pytest.mark.slow
def test_husimi_localizes_near_constituent_poles():
    # m = 64 poles at N = 256 (override; the matched N for D = 1 would be 4096)
    ps = generate("fibonacci", 64)
    N = 256
    u = build(N, 1.0, ps, override=True).normalized()
    grid = generate("fibonacci", 4096)
    d = husimi_density(u, N, grid)
    mass = husimi_mass_near(d, grid, ps.points, 2 / math.sqrt(64))
    print(f"husimi mass within 2/sqrt(m) of the poles: {mass:.6f}")
    assert mass >= 0.9


def test_qe_report_round_trip():
    F = build(64, 1.0, generate("fibonacci", 8))
    rep = qe_report(F, husimi_grid=generate("fibonacci", 64))
    for r in rep.records:
        assert r.defect == abs(r.circle_average_sum - r.liouville_value)
        assert (r.physical_element is None) == (r.kind == "phase")
    assert rep.h == 1 / 64
    assert rep.husimi_summary["grid_size"] == 64
    back = QEReport.from_dict(json.loads(rep.to_json()))
    assert back == rep
    rows = rep.to_csv().strip().splitlines()
    assert len(rows) == 1 + len(BANK)
    assert rows[0].startswith("N,D,m,name")


def test_qe_report_without_physical():
    F = build(64, 1.0, generate("fibonacci", 8))
    rep = qe_report(F, observable_bank(["x3^2"]), physical=False, h_convention="sqrt")
    assert rep.records[0].physical_element is None
    assert rep.h_convention == "sqrt"
