import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from devshell.errors import BelowFloor, NotAnIsometry
from devshell.isometry import IsometryAB, build_V_from_ab, rigid_displacement, skew
from devshell.matching import (AmbientDerivatives, MatchedFamily, RotationFamily, defect_sweep,
                               estimate_order, match_to_order, metric_defect, quadratic_source,
                               resolved_sweep)
from devshell.profiles import Profile
from devshell.symgrad import Displacement

from conftest import chart_for

T = 2 * np.pi
EPS = [0.1, 0.05, 0.025, 0.0125]


def _V(chart, cycles=2, b=0.0):
    ab = IsometryAB.from_profiles(Profile.harmonic("cos", 1.0, cycles, T), b, chart.grid.t_nodes)
    return build_V_from_ab(ab, chart)


# --------------------------------------------------------------------------- quadratic source

def test_quadratic_source_zero_and_symmetric(var64):
    z = AmbientDerivatives.of(Displacement.zeros(var64), var64)
    src = quadratic_source(z, z)
    assert src.B.max_abs() == 0.0 and np.max(np.abs(src.theta)) == 0.0
    p = AmbientDerivatives.of(_V(var64), var64)
    q = AmbientDerivatives.of(rigid_displacement(skew([1, 2, 0]), np.ones(3), var64), var64)
    pq, qp = quadratic_source(p, q), quadratic_source(q, p)
    assert np.array_equal(pq.B.matrix(), qp.B.matrix()) and np.array_equal(pq.theta, qp.theta)


def test_quadratic_source_of_rigid_motion():
    chart = chart_for("variable", 128, 64)
    Q = skew([0.3, -1.0, 0.5])
    d = AmbientDerivatives.of(rigid_displacement(Q, np.zeros(3), chart), chart)
    src = quadratic_source(d, d)
    expect = np.einsum("...ki,kl,...lj->...ij", chart.grad_u, Q.T @ Q, chart.grad_u)
    assert np.max(np.abs(src.B.matrix() - expect)) < 1e-5
    assert np.max(np.abs(src.theta)) < 1e-4
    cyl = chart_for("cylinder", 64, 32)
    d = AmbientDerivatives.of(rigid_displacement(Q, np.zeros(3), cyl), cyl)
    B = quadratic_source(d, d).B.matrix()
    # on the cylinder the tangent plane turns, so the form is constant only along rulings
    assert np.max(np.abs(B - B[:, :1])) < 1e-8


# --------------------------------------------------------------------------- family

def test_first_order_family_solves_nothing(cyl64):
    V = _V(cyl64)
    fam = match_to_order(V, 1, cyl64)
    assert fam.order == 1 and fam.corrections == [V] and len(fam.residuals) == 1


def test_non_isometry_rejected(cyl64):
    V = Displacement(np.zeros(cyl64.shape + (2,)), cyl64.s**2)
    with pytest.raises(NotAnIsometry):
        match_to_order(V, 2, cyl64)


def test_matching_is_deterministic(var64):
    V = _V(var64)
    a, b = match_to_order(V, 3, var64), match_to_order(V, 3, var64)
    for ga, gb in zip(a.grads, b.grads):
        assert np.array_equal(ga, gb)


# --------------------------------------------------------------------------- defect

def test_defect_of_identity_and_injected_scaling(var64):
    fam = MatchedFamily.from_gradients(var64.grad_u, [var64.grad_u])
    assert metric_defect(fam, 0.0) < 1e-14
    for e in (0.1, 0.01, 0.3):
        assert metric_defect(fam, e) == pytest.approx(2 * e + e * e, abs=1e-14)


def test_first_order_defect_is_quadratic_in_eps():
    chart = chart_for("cylinder", 128, 128, 6)
    fam = match_to_order(_V(chart), 1, chart)
    G = fam.grads[0]
    limit = np.max(np.linalg.norm(np.einsum("...ki,...kj->...ij", G, G), ord=2, axis=(-2, -1)))
    # for N = 1 the defect is exactly |2 eps sym grad V + eps^2 grad V^T grad V|; the
    # first term is solver residual, so the ratio is exact up to O(residual / eps)
    for e in (1e-1, 1e-2):
        assert metric_defect(fam, e) / e**2 == pytest.approx(limit, rel=1e-6)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_order_property_on_a_curved_chart(N):
    chart = chart_for("variable", 128, 128, 6)
    fam = match_to_order(_V(chart, b=0.2), N, chart)
    est = estimate_order(defect_sweep(fam, EPS))
    assert est.slope >= N + 1 - 0.1


def test_rigid_family_matches_exact_rotation():
    chart = chart_for("variable", 128, 128, 6)
    Q = skew([0.2, 1.0, -0.4])
    fam = match_to_order(rigid_displacement(Q, np.zeros(3), chart), 2, chart)
    rot = RotationFamily(Q, chart.grad_u)
    assert metric_defect(rot, 0.1) < 1e-13
    diff = [(e, abs(metric_defect(fam, e) - metric_defect(rot, e))) for e in EPS]
    assert estimate_order(diff).slope >= 2.9
    base = [metric_defect(fam.truncated(1), e) for e in EPS]
    assert estimate_order(list(zip(EPS, base))).slope == pytest.approx(2.0, abs=0.05)


def test_defect_order_is_gauge_independent():
    chart = chart_for("cylinder", 128, 128, 6)
    fam = match_to_order(_V(chart), 2, chart)
    R = rigid_displacement(skew([0.0, 0.0, 1.0]), np.array([0.1, 0.0, 0.0]), chart)
    g = AmbientDerivatives.of(R, chart, hessian=False).grad
    shifted = MatchedFamily.from_gradients(fam.base_grad, [fam.grads[0], fam.grads[1] + g])
    def metric(f, e):
        G = f.grad_u_eps(e)
        return np.einsum("...ki,...kj->...ij", G, G)

    change = [(e, np.max(np.abs(metric(shifted, e) - metric(fam, e)))) for e in EPS]
    assert estimate_order(change).slope >= 2.9
    assert estimate_order(defect_sweep(shifted, EPS)).slope >= 2.9


# --------------------------------------------------------------------------- order estimation

def test_estimate_order_exact_power_law():
    est = estimate_order([(e, e**3) for e in (0.1, 0.05, 0.025)])
    assert est.slope == pytest.approx(3.0, abs=1e-10)
    assert est.residual < 1e-12


@settings(max_examples=20, deadline=None)
@given(p=st.floats(0.5, 5.0), c=st.floats(1e-3, 1e3))
def test_estimate_order_recovers_any_power(p, c):
    est = estimate_order([(e, c * e**p) for e in EPS], floor=0.0)
    assert est.slope == pytest.approx(p, abs=1e-9)


def test_estimate_order_approaches_from_above():
    slopes = [estimate_order([(e, e**2 * (1 + e)) for e in (4 * x, 2 * x, x)]).slope
              for x in (0.1, 0.01, 0.001)]
    assert all(s > 2 for s in slopes)
    assert slopes[0] > slopes[1] > slopes[2]


def test_estimate_order_reports_noise():
    data = [(0.1, 1e-3), (0.05, 4e-3), (0.025, 1e-5), (0.0125, 2e-3)]
    assert estimate_order(data).residual > 0.5


def test_estimate_order_floor():
    with pytest.warns(RuntimeWarning):
        est = estimate_order([(0.1, 1e-3), (0.05, 1e-4), (0.025, 1e-5), (0.0125, 1e-16)])
    assert est.n_points == 3 and est.excluded == (0.0125,)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(BelowFloor):
            estimate_order([(0.1, 1e-3), (0.05, 1e-15), (0.025, 1e-16)])


def test_resolved_sweep_refuses_a_translation():
    # a = cos(2 pi t / T) on the cylinder is a rigid translation: there is no defect
    def build(nt, ns):
        chart = chart_for("cylinder", nt, ns)
        return chart, _V(chart, cycles=1)

    with pytest.raises(BelowFloor):
        resolved_sweep(build, 2, EPS, (64, 32), max_nodes=128)


def test_resolved_sweep_on_a_bending_field():
    def build(nt, ns):
        chart = chart_for("cylinder", nt, ns, 6)
        return chart, _V(chart)

    res = resolved_sweep(build, 2, EPS, (64, 64), max_nodes=256)
    assert estimate_order(res.defects).slope >= 2.9
