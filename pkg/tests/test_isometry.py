import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from devshell.isometry import (IsometryAB, build_V_from_ab, check_membership, extract_ab, gauged,
                               hessian_normal_energy, rigid_displacement, skew, smooth_ab,
                               sobolev_distance, sobolev_J)
from devshell.profiles import Profile
from devshell.symgrad import Displacement

from conftest import chart_for

T = 2 * np.pi


def _slope(hs, errs):
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def _ab(chart, a, b=0.0):
    return IsometryAB.from_profiles(a, b, chart.grid.t_nodes)


def test_zero_profiles_give_zero_field(var64):
    V = build_V_from_ab(_ab(var64, 0.0), var64)
    assert np.max(np.abs(V.ambient(var64))) == 0.0


def test_rotation_about_the_ruling_axis():
    chart = chart_for("cylinder", 128, 64)
    V = build_V_from_ab(_ab(chart, Profile.harmonic("sin", -1.0, 1, T)), chart)
    rigid = gauged(rigid_displacement(skew([0, 1, 0]), np.zeros(3), chart), chart)
    assert np.max(np.abs(V.ambient(chart) - rigid.ambient(chart))) < 1e-6


@pytest.mark.parametrize("kind", ["cylinder", "variable"])
def test_symgrad_residual_order(kind):
    errs, hs = [], []
    for n in (32, 64, 128):
        chart = chart_for(kind, n, n // 2)
        V = build_V_from_ab(_ab(chart, Profile.harmonic("cos", 1.0, 1, T), 0.2), chart)
        errs.append(V.residual)
        hs.append(chart.grid.dt)
    assert _slope(hs, errs) >= 1.8


def test_extract_ab_linear_and_quadratic(var64):
    fit = extract_ab(3.0 + 2.0 * var64.s, var64)
    assert np.max(np.abs(fit.ab.a - 3.0)) < 1e-12 and np.max(np.abs(fit.ab.b - 2.0)) < 1e-12
    assert fit.residual < 1e-12
    s = var64.s[0]
    coef = np.polyfit(s, s**2, 1)
    expect = np.max(np.abs(s**2 - np.polyval(coef, s)))
    assert extract_ab(var64.s**2, var64).residual == pytest.approx(expect, rel=1e-10)


@pytest.mark.parametrize("kind", ["cylinder", "variable"])
def test_roundtrip(kind):
    chart = chart_for(kind, 64, 32)
    ab = _ab(chart, Profile.harmonic("cos", 1.0, 2, T), Profile.harmonic("sin", 0.3, 1, T))
    fit = extract_ab(build_V_from_ab(ab, chart).w3, chart)
    assert np.max(np.abs(fit.ab.a - ab.a)) < 1e-10 and np.max(np.abs(fit.ab.b - ab.b)) < 1e-10


@settings(max_examples=10, deadline=None)
@given(c1=st.floats(-2, 2), c2=st.floats(-2, 2))
def test_linear_in_profiles(c1, c2):
    chart = chart_for("variable", 48, 24)
    ab1 = _ab(chart, Profile.harmonic("cos", 1.0, 1, T))
    ab2 = _ab(chart, 0.0, Profile.harmonic("sin", 1.0, 2, T))
    V = build_V_from_ab(ab1 * c1 + ab2 * c2, chart)
    W = build_V_from_ab(ab1, chart) * c1 + build_V_from_ab(ab2, chart) * c2
    assert np.max(np.abs(V.ambient(chart) - W.ambient(chart))) < 1e-10 * (1 + abs(c1) + abs(c2))


# --------------------------------------------------------------------------- J integrals

def test_J_zero_and_parabola():
    chart = chart_for("cylinder", 64, 32)
    assert sobolev_J(_ab(chart, 0.0), chart) == (0.0, 0.0)
    J1, J2 = sobolev_J(_ab(chart, Profile.poly([0, 0, 0.5])), chart)
    assert J1 == 0.0
    assert J2 == pytest.approx(1.0 * T, rel=1e-12)


def test_J_cylinder_harmonic():
    chart = chart_for("cylinder", 128, 64)
    k = 2
    ab = _ab(chart, Profile.harmonic("cos", 1.0, k, T), Profile.harmonic("sin", 0.5, 1, T))
    J1, J2 = sobolev_J(ab, chart)
    # b' = 0.5 cos t; a'' + s b'' = -k^2 cos(kt) - 0.5 s sin t on s in [-1/2, 1/2]
    assert J1 == pytest.approx(0.25 * np.pi, rel=1e-6)
    assert J2 == pytest.approx(k**4 * np.pi + 0.25 * np.pi / 12, rel=1e-6)


def test_hessian_energy_identity():
    chart = chart_for("variable", 128, 64)
    ab = _ab(chart, Profile.harmonic("cos", 1.0, 2, T), Profile.harmonic("sin", 0.3, 1, T))
    V = build_V_from_ab(ab, chart)
    J1, J2 = sobolev_J(ab, chart)
    assert hessian_normal_energy(V.w3, chart) == pytest.approx(2 * J1 + J2, rel=1e-4)


def test_mollified_kink_approaches_in_J():
    chart = chart_for("cylinder", 513, 16)
    t = chart.grid.t_nodes
    a = np.abs(t - np.pi) ** 2.7
    ab = IsometryAB.from_samples(t, a, np.zeros_like(t))
    gaps, dists = [], []
    for w in (0.8, 0.4, 0.2, 0.1):
        sm = smooth_ab(ab, w)
        gaps.append(sum(sobolev_J(ab - sm, chart)))
        dists.append(sobolev_distance(ab, sm))
    assert all(x > y for x, y in zip(gaps, gaps[1:]))
    assert all(x > y for x, y in zip(dists, dists[1:]))


def test_smooth_ab_is_second_order_and_identity_below_grid():
    t = np.linspace(0, T, 1025)
    ab = IsometryAB.from_samples(t, np.sin(t), np.cos(2 * t))
    errs = [np.max(np.abs(smooth_ab(ab, w).a - ab.a)) for w in (0.4, 0.2, 0.1)]
    assert _slope([0.4, 0.2, 0.1], errs) >= 1.8
    same = smooth_ab(ab, 0.0)
    assert np.array_equal(same.a, ab.a) and np.array_equal(same.b2, ab.b2)


# --------------------------------------------------------------------------- membership

@settings(max_examples=10, deadline=None)
@given(axis=st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       c=st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_rigid_motions_are_members(axis, c):
    chart = chart_for("variable", 64, 32)
    V = rigid_displacement(skew(axis), np.array(c), chart)
    assert check_membership(V, chart).member
    fit = extract_ab(V.w3, chart)
    rebuilt = build_V_from_ab(fit.ab, chart)
    assert rebuilt.residual <= 10 * (chart.grid.dt**2) * max(1.0, np.max(np.abs(V.w3)))


def test_non_isometry_rejected(var64):
    V = Displacement(np.zeros(var64.shape + (2,)), var64.s**2)
    assert not check_membership(V, var64).member
