import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from gasflow.errors import OutsideDomainError, ShockRegionError, ValidationError
from gasflow.fields import (
    a1_residual, a2_residual, characteristics_solve, coriolis_ansatz_residual, custom_field,
    divergence_polynomial, divergence_roots, field_from_descriptor, identity_field,
    implicit_characteristic, in_strip, jm, jm_from_matrix, multi_field_coeffs,
    multi_field_residual, plane_shear, potential_condition, random_a2_candidate, scalar_function,
    sphere_field, sphere_physical,
)
from gasflow.geometry import ChartMetric, divergence

E2 = ChartMetric.euclidean(2)
E3 = ChartMetric.euclidean(3)


# ---------------------------------------------------------------- A1 / A2
def test_identity_field_meets_a1_and_a2():
    x = np.array([0.3, -0.8])
    f = identity_field(E2)
    assert np.all(a1_residual(E2, f, x) == 0)
    assert np.all(a2_residual(E2, f, x) == 0)


def test_shear_is_not_a1():
    f = plane_shear(1.0, {"kind": "sin"})
    assert np.max(np.abs(a1_residual(E2, f, np.array([0.4, 1.1])))) > 0.1


@pytest.mark.parametrize("phi", [{"kind": "sin"}, {"kind": "tanh", "amp": 2, "freq": 0.5},
                                 {"kind": "poly", "coeffs": [0.1, -0.3, 0.05, 0.2]}])
def test_shear_family_a2(phi, rng):
    f = plane_shear(float(rng.uniform(-2, 2)), phi)
    worst = max(np.max(np.abs(a2_residual(E2, f, x))) for x in rng.uniform(-2, 2, (100, 2)))
    assert worst < 1e-9


def test_sphere_field_a2_small():
    f = sphere_field(4.0, 0.3)
    lim = math.asin(0.5)
    for th in np.linspace(lim + 0.01, math.pi - lim - 0.01, 9):
        for ph in np.linspace(-3, 3, 7):
            assert np.max(np.abs(a2_residual(f.chart, f, np.array([ph, th])))) < 1e-6


def test_sphere_boundary_and_equator_values():
    C = 2.0
    th_b = math.asin(1 / math.sqrt(C))
    u, v, z = sphere_physical(C, lambda s: 0.0, 1, 1.0, (0.2, th_b), margin=-1e-12)
    assert v == 0.0 and z == 0.0 and math.isfinite(u)
    u, v, z = sphere_physical(C, lambda s: 0.0, 1, 1.0, (0.2, math.pi / 2))
    assert z == pytest.approx(1.0) and u == pytest.approx(0.0, abs=1e-15)


def test_sphere_outside_strip_and_bad_params():
    f = sphere_field(2.0)
    with pytest.raises(OutsideDomainError):
        f(np.array([0.0, 0.3]))
    with pytest.raises(ValidationError):
        sphere_field(1.0)
    with pytest.raises(ValidationError):
        sphere_field(2.0, branch=0)
    assert in_strip(2.0, math.pi / 2) and not in_strip(2.0, 0.2)


def test_sphere_meridional_component_vanishes_toward_boundary():
    C = 3.0
    th_b = math.asin(1 / math.sqrt(C))
    out = [sphere_physical(C, lambda s: 0.1, 1, 1.0, (0.0, th_b + d), margin=0.0)
           for d in (1e-2, 1e-4, 1e-6)]
    vs = [abs(o[1]) for o in out]
    assert vs[0] > vs[1] > vs[2] and vs[2] < 1e-2
    assert all(math.isfinite(o[0]) for o in out)


# ------------------------------------------------------------ characteristics
def test_constant_slope_recovers_shear():
    datum, _ = scalar_function({"kind": "sin"})
    cp = characteristics_solve(lambda s: 0.7 + 0 * s, (0.4, -0.2), datum=datum)
    assert cp.z == pytest.approx(0.7)
    assert cp.lam[0] == pytest.approx(0.4 + math.sin(-0.2 - 0.7 * 0.4))


def test_affine_slope_closed_form():
    a, b1, b2 = 0.5, 2.0, 0.3
    x1, x2 = 0.6, -0.4
    cp = characteristics_solve(lambda s: (a * s + b2) / b1, (x1, x2), dF=lambda s: a / b1)
    assert cp.z == pytest.approx((a * x2 + b2) / (a * x1 + b1), abs=1e-13)


def test_tanh_slope_a2():
    f = implicit_characteristic({"kind": "tanh"})
    assert np.max(np.abs(a2_residual(E2, f, np.array([0.3, 0.7])))) < 1e-7


def test_shock_reports_critical_x1():
    with pytest.raises(ShockRegionError) as e:
        characteristics_solve({"kind": "sin", "amp": 2.0}, (-3.0, 0.0))
    assert e.value.critical_x1 == pytest.approx(-0.5)


def test_source_term_variant_matches_plain_when_source_is_one():
    F = {"kind": "sin", "amp": 0.2}
    x = (0.5, 0.3)
    a = characteristics_solve(F, x)
    b = characteristics_solve(F, x, source=lambda t, y, L1, z: 1.0)
    assert np.allclose(a.lam, b.lam, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-0.4, 0.4), st.floats(-0.4, 0.4))
def test_random_candidates_satisfy_a2(seed, x1, x2):
    f, _ = random_a2_candidate(np.random.default_rng(seed))
    x = np.array([x1, x2])
    assert np.max(np.abs(a2_residual(E2, f, x))) < 1e-7
    f.check_jacobian(x)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_a2_fields_are_not_divergence_free(seed):
    rng = np.random.default_rng(seed)
    f, _ = random_a2_candidate(rng)
    pts = rng.uniform(-0.3, 0.3, (5, 2))
    for x in pts:
        if np.linalg.norm(f(x)) > 1e-8:
            break
    else:
        return
    assert any(abs(divergence(E2, f, x)) > 1e-8 for x in pts)


# ------------------------------------------------------------------ J_m
def test_jm_examples():
    x = np.array([0.2, 0.5])
    r = jm(E2, identity_field(E2), x, 2)
    assert r.value == pytest.approx(1.0)
    assert r.identity_residuals["power2"] == 0 and r.identity_residuals["eigen_one"] == 0
    r = jm(E2, plane_shear(1.0, {"kind": "sin"}), x, 2)
    assert r.value == pytest.approx(0.0, abs=1e-12) and r.divergence == pytest.approx(1.0)
    r = jm(E3, identity_field(E3), np.array([0.1, 0.2, 0.3]), 3)
    assert r.value == pytest.approx(1.0)
    assert jm_from_matrix(np.eye(3), 2) == pytest.approx(3.0)
    assert r.identity_residuals["power3"] == pytest.approx(0.0)
    with pytest.raises(ValidationError):
        jm(E2, identity_field(E2), x, 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_jm_is_sum_of_principal_minors(seed):
    M = np.random.default_rng(seed).normal(size=(4, 4))
    # characteristic polynomial coefficients are the signed J_m
    c = np.poly(M)
    for m in range(1, 5):
        assert jm_from_matrix(M, m) == pytest.approx((-1) ** m * c[m], rel=1e-9, abs=1e-9)


def test_divergence_roots():
    for n, coef in ((2, [2, -3, 1]), (3, [-6, 11, -6, 1])):
        c = divergence_polynomial(n).coef
        assert np.allclose(c / c[-1], coef)
    for n in (2, 3, 4):
        roots = divergence_roots(n)
        assert np.allclose(roots, np.arange(1, n + 1), atol=1e-10)
    with pytest.raises(ValidationError):
        divergence_roots(5)


# ------------------------------------------------------------------ potentials
def test_potential_condition_examples():
    x = np.array([0.4, -0.7])
    assert potential_condition(E2, lambda y: 0.5 * y @ y, x) == pytest.approx(0.0, abs=1e-6)
    assert potential_condition(E2, lambda y: 0.5 * y[0] ** 2, x) == pytest.approx(0.0, abs=1e-6)
    assert abs(potential_condition(E2, lambda y: y[0] ** 3, x)) > 1e-2


# ------------------------------------------------------------------ coupled fields
def test_coriolis_zero_secondary_field():
    pts = np.random.default_rng(3).uniform(-1, 1, (20, 2))
    lam = identity_field(E2)
    r1, r2, r3 = coriolis_ansatz_residual(E2, lam, lambda x: np.zeros(2), 0.7, pts)
    assert r1 == 0 and r2 == 0
    assert r3 == pytest.approx(0.7 * np.max(np.abs(pts)))


def test_coriolis_random_secondary_field_is_generic():
    pts = np.random.default_rng(4).uniform(-1, 1, (10, 2))
    xi = lambda x: np.array([np.sin(x[1]), x[0] ** 2])
    _, r2, _ = coriolis_ansatz_residual(E2, identity_field(E2), xi, 0.3, pts)
    assert r2 > 1e-3


def test_multi_field_residual_for_a_single_pair():
    # L1 = r, L2 = 0: the pair relation reduces to 0 = beta_1 r + beta_2 * 0
    pts = np.array([[0.3, 0.2]])
    res = multi_field_residual(E2, [identity_field(E2), lambda x: np.zeros(2)], [0.0, 1.0], pts)
    assert res == 0.0


def test_multi_field_coeffs_single_field():
    tr = multi_field_coeffs([0.0], [1.0], 10.0)
    assert tr.y_final[0] == pytest.approx(1 / 11, abs=1e-8)


def test_multi_field_coeffs_blow_up_near_one():
    tr = multi_field_coeffs([0.0], [-1.0], 2.0, tol=1e-8)
    ev = tr.event("blow_up")
    assert ev is not None
    assert ev.t_blowup == pytest.approx(1.0, abs=1e-6)


def test_multi_field_two_fields_against_reference_solver():
    tr = multi_field_coeffs([2.0, 0.0], [1.0, 1.0], 5.0)

    def rhs(t, a):
        return [-a[0] ** 2 - 2 * a[0] * a[1], -a[1] ** 2]
    ref = solve_ivp(rhs, (0, 5), [1.0, 1.0], rtol=1e-12, atol=1e-14)
    assert np.allclose(tr.y_final, ref.y[:, -1], atol=1e-8)
    assert tr.y_final[1] == pytest.approx(1 / 6, abs=1e-9)


# ------------------------------------------------------------------ specs
def test_descriptor_round_trip():
    for f in (plane_shear(0.5, {"kind": "cos"}), sphere_field(3.0, 0.2, -1), identity_field(E3),
              implicit_characteristic({"kind": "sin", "amp": 0.3})):
        g = field_from_descriptor(f.descriptor())
        x = np.array([0.2, 1.2, 0.3][: f.chart.dim])
        assert g.family == f.family
        assert np.allclose(g(x), f(x))
    with pytest.raises(ValidationError):
        field_from_descriptor({"family": "nope"})


def test_wrong_jacobian_is_caught():
    f = custom_field(E2, lambda x: np.array([x[0] ** 2, x[1]]), lambda x: np.eye(2))
    with pytest.raises(ValidationError):
        f.check_jacobian(np.array([1.0, 0.0]))
