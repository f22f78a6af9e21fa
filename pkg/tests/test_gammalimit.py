import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from devshell.errors import DegenerateModel, NotAnIsometry, ScalingViolation, ThicknessTooLarge
from devshell.gammalimit import (A_field, MaterialModel, RecoveryDeformation, ShellSweep,
                                 bending_strain, check_axioms, gamma_gap, limit_energy,
                                 quadratic_forms, recovery_deformation, shell_energy, strain_error)
from devshell.isometry import IsometryAB, build_V_from_ab, rigid_displacement, skew
from devshell.matching import RotationFamily, match_to_order
from devshell.profiles import Profile
from devshell.symgrad import Displacement

from conftest import chart_for

T = 2 * np.pi
sym2 = st.lists(st.floats(-2, 2), min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2))
moduli = st.tuples(st.floats(0.1, 5.0), st.floats(0.0, 5.0))


def _V(chart, cycles=2):
    ab = IsometryAB.from_profiles(Profile.harmonic("cos", 1.0, cycles, T), 0.0, chart.grid.t_nodes)
    return build_V_from_ab(ab, chart)


# --------------------------------------------------------------------------- material

def test_Q3_of_identity():
    assert quadratic_forms(MaterialModel(1.0, 1.0), np.eye(3)) == pytest.approx(15.0)


@settings(max_examples=30, deadline=None)
@given(F=sym2, mod=moduli)
def test_Q2_solve_matches_closed_form(F, mod):
    model = MaterialModel(*mod)
    q, c = quadratic_forms(model, F)
    qc, cc = quadratic_forms(model, F, closed_form=True)
    assert q == pytest.approx(qc, rel=1e-10, abs=1e-12)
    assert np.allclose(c, cc, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(F=sym2, mod=moduli, d=st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_Q2_minimizer_is_optimal(F, mod, d):
    model = MaterialModel(*mod)
    q, c = quadratic_forms(model, F)
    d = 1e-3 * np.array(d)
    G = np.zeros((3, 3))
    G[:2, :2] = F
    cc = c + d
    G[:, 2] += cc
    G[2, :] += cc
    G[2, 2] -= cc[2]
    if np.linalg.norm(d) > 0:
        assert model.Q3(G) >= q - 1e-12


def test_Q2_kernel():
    q, c = quadratic_forms(MaterialModel(), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert abs(q) < 1e-14 and np.max(np.abs(c)) < 1e-14


def test_Q3_is_the_hessian_of_W():
    model = MaterialModel(0.7, 1.3)
    G = np.random.default_rng(0).normal(size=(3, 3))
    h = 1e-4
    fd = (model.W(np.eye(3) + h * G) - 2 * model.W(np.eye(3)) + model.W(np.eye(3) - h * G)) / h**2
    assert fd == pytest.approx(model.Q3(G), rel=1e-6)


def test_degenerate_models():
    with pytest.raises(DegenerateModel):
        quadratic_forms(MaterialModel(0.0, 1.0), np.eye(2))
    with pytest.raises(DegenerateModel):
        quadratic_forms(MaterialModel(0.0, 1.0), np.eye(2), closed_form=True)
    with pytest.raises(DegenerateModel):
        MaterialModel(np.inf, 1.0)


def test_material_axioms():
    w_rot, w_frame, coercive = check_axioms(MaterialModel(1.0, 1.0))
    assert w_rot < 1e-25 and w_frame < 1e-12 and coercive > 0.5


# --------------------------------------------------------------------------- A field and I(V)

def test_A_of_rigid_motion_and_zero(var64):
    chart = chart_for("variable", 128, 128, 6)
    Q = skew([0.3, -0.2, 0.9])
    A = A_field(rigid_displacement(Q, np.ones(3), chart), chart).ambient(chart)
    assert np.max(np.abs(A - Q)) < 1e-6
    assert np.max(np.abs(A_field(Displacement.zeros(var64), var64).A)) == 0.0


def test_A_of_the_axis_rotation_profile():
    chart = chart_for("cylinder", 128, 64)
    ab = IsometryAB.from_profiles(Profile.harmonic("sin", -1.0, 1, T), 0.0, chart.grid.t_nodes)
    A = A_field(build_V_from_ab(ab, chart), chart).ambient(chart)
    # the gauged representative of this normal part is the translation e1: A is constant (zero)
    assert np.max(np.abs(A - A[0, 0])) < 1e-6 and np.max(np.abs(A)) < 1e-6


def test_A_rejects_non_isometries(var64):
    with pytest.raises(NotAnIsometry):
        A_field(Displacement(np.zeros(var64.shape + (2,)), var64.s**2), var64)


def test_limit_energy_zero_and_rigid(var64):
    model = MaterialModel()
    assert limit_energy(Displacement.zeros(var64), var64, model) == 0.0
    V = rigid_displacement(skew([1.0, 0.5, -0.3]), np.array([0.2, 0, 1]), var64)
    assert abs(limit_energy(V, var64, model)) < 1e-10


def test_limit_energy_cylinder_analytic():
    # a = cos(2t), b = 0 on the unit cylinder: K_tan = diag(a'' + a, 0) = diag(-3 cos 2t, 0)
    # and Q2(diag(k, 0)) = (2 mu + 2 mu lam / (2 mu + lam)) k^2 = 8/3 k^2 for mu = lam = 1
    chart = chart_for("cylinder", 256, 64, 6)
    I = limit_energy(_V(chart), chart, MaterialModel(1.0, 1.0))
    assert I == pytest.approx((8.0 / 3.0) * 9 * np.pi / 24, rel=1e-6)


def test_limit_energy_refinement_oracle():
    model = MaterialModel(1.0, 0.5)
    fine = chart_for("variable", 256, 128, 4)
    coarse = chart_for("variable", 128, 64, 4)
    Vf, Vc = _V(fine), _V(coarse)
    Ia = limit_energy(Vf, fine, model, bending_strain(Vf, fine, model, method="A"))
    Ib = limit_energy(Vc, coarse, model)
    assert Ia == pytest.approx(Ib, rel=1e-3)


@settings(max_examples=8, deadline=None)
@given(axis=st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       c=st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_limit_energy_rigid_shift_invariance(axis, c):
    chart = chart_for("variable", 128, 128, 6)
    model = MaterialModel()
    V = _V(chart)
    I0 = limit_energy(V, chart, model)
    I1 = limit_energy(V + rigid_displacement(skew(axis), np.array(c), chart), chart, model)
    assert abs(I1 - I0) <= 1e-10 * max(1.0, I0)


# --------------------------------------------------------------------------- shell energy

def test_sweep_validation():
    with pytest.raises(ScalingViolation):
        ShellSweep((0.1,), beta=2.0)
    with pytest.raises(ValueError):
        ShellSweep((0.1, 0.2))
    sw = ShellSweep((0.1,), beta=3.0)
    with pytest.raises(ScalingViolation):
        sw.check_order(2)
    sw.check_order(3)
    r, w = sw.nodes()
    assert w.sum() == pytest.approx(1.0) and np.all(np.abs(r) < 0.5)


def test_identity_and_rigid_shells_have_zero_energy(var64):
    model, sweep = MaterialModel(), ShellSweep((0.1,))
    rec = RecoveryDeformation.rigid(np.eye(3), np.zeros(3), var64, 0.1)
    assert shell_energy(rec, model, var64, sweep) < 1e-28
    R = expm(skew([0.4, -1.0, 2.0]))
    rec = RecoveryDeformation.rigid(R, np.array([1.0, 2, 3]), var64, 0.1)
    assert shell_energy(rec, model, var64, sweep) < 1e-26


def test_zero_family_is_the_identity_shell(var64):
    model, sweep = MaterialModel(), ShellSweep((0.1, 0.05))
    fam = match_to_order(Displacement.zeros(var64), 2, var64)
    rec = recovery_deformation(fam, 0.1, sweep, model, var64)
    for r in sweep.nodes()[0]:
        expect = var64.u + r * 0.1 * var64.normal
        assert np.max(np.abs(rec.position(r) - expect)) < 1e-14
    rows = gamma_gap(fam, sweep, model, var64)
    # the shell energy of the identity is round-off from W(Id + O(1e-16))
    assert all(row.I == 0.0 and row.abs_gap < 1e-20 and row.Vh_err == 0.0 for row in rows)
    assert all(row.strain_err < 1e-12 for row in rows)


def test_deformed_normal_expansion():
    chart = chart_for("cylinder", 128, 128, 6)
    model = MaterialModel()
    fam = match_to_order(_V(chart), 2, chart)
    A = A_field(fam.corrections[0], chart).ambient(chart)
    first = chart.normal + 0.0
    errs, epss = [], []
    for h in (0.06, 0.03, 0.015):
        sweep = ShellSweep((h,))
        rec = recovery_deformation(fam, h, sweep, model, chart)
        lin = first + rec.eps * np.einsum("...ab,...b->...a", A, chart.normal)
        errs.append(np.max(np.abs(rec.n_eps - lin)))
        epss.append(rec.eps)
    assert np.polyfit(np.log(epss), np.log(errs), 1)[0] >= 1.8


def test_thickness_limit():
    chart = chart_for("cylinder", 32, 16)
    fam = match_to_order(Displacement.zeros(chart), 2, chart)
    with pytest.raises(ThicknessTooLarge):
        recovery_deformation(fam, 1.999, ShellSweep((1.999,), h0=2.5), MaterialModel(), chart)


def test_frame_indifference_of_shell_energy():
    chart = chart_for("cylinder", 96, 48, 6)
    model, sweep = MaterialModel(), ShellSweep((0.05,))
    rec = recovery_deformation(match_to_order(_V(chart), 2, chart), 0.05, sweep, model, chart)
    E0 = shell_energy(rec, model, chart, sweep)
    R = expm(skew(np.random.default_rng(7).normal(size=3)))
    assert abs(shell_energy(rec, model, chart, sweep, rotation=R) - E0) <= 1e-12 * E0


def test_gamma_sweep_gap_decreases_on_a_small_grid():
    chart = chart_for("cylinder", 128, 64, 6)
    sweep = ShellSweep((2**-4, 2**-5, 2**-6), beta=3.5)
    rows = gamma_gap(match_to_order(_V(chart), 2, chart), sweep, MaterialModel(), chart)
    gaps = [r.gap for r in rows]
    assert gaps[0] > gaps[1] > gaps[2]
    strain = [r.strain_err for r in rows]
    assert strain[0] > strain[1] > strain[2]


def test_rigid_rotation_family_has_zero_gap(var64):
    sweep = ShellSweep((2**-4, 2**-5))
    fam = RotationFamily(skew([0.3, 1.0, 0.0]), var64.grad_u)
    rows = gamma_gap(fam, sweep, MaterialModel(), var64)
    assert all(r.abs_gap < 1e-10 for r in rows)
    # the limit strain of a rigid field is discretization error only
    errs = []
    for n in (64, 128):
        chart = chart_for("variable", n, n, 6)
        f = RotationFamily(fam.Q, chart.grad_u)
        errs.append(strain_error(recovery_deformation(f, 2**-4, sweep, MaterialModel(), chart),
                                 bending_strain(rigid_displacement(f.Q, np.zeros(3), chart), chart,
                                                MaterialModel()), sweep))
    assert errs[1] < errs[0] / 8
