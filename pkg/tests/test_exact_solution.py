import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from gasflow.errors import DegenerateFlowMap, ValidationError
from gasflow.exact_solution import (
    GasSolution, ROT, algebraic_moment, coefficients_from_trajectory, compat_residual,
    corollary_feasible_params, custom_initial_data, fundamental_matrix, makino_inverse,
    makino_kappa, makino_variable, ode_constant_K, algebraic_initial_data,
)
from gasflow.reduced_ode import ParamSet, SystemKind, run
from gasflow.verify.functionals import entropy_along_paths, functionals


# ------------------------------------------------------- fundamental matrix
def test_fundamental_matrix_zero():
    X, d = fundamental_matrix(lambda t: np.zeros((2, 2)), 3.0)
    assert np.array_equal(X, np.eye(2)) and d == 1.0


def test_fundamental_matrix_scalar_rate():
    alpha = lambda t: math.cos(t) + 0.5 * t
    X, d, Y = fundamental_matrix(lambda t: alpha(t) * np.eye(3), 2.0, with_inverse=True)
    ref = math.exp(quad(alpha, 0, 2.0, epsabs=1e-14)[0])
    assert np.allclose(X, ref * np.eye(3), rtol=1e-9, atol=0)
    assert np.allclose(Y @ X, np.eye(3), atol=1e-9)


def test_fundamental_matrix_nilpotent():
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    for t in (0.5, 2.0, -1.5):
        X, d = fundamental_matrix(lambda s: N, t)
        assert np.allclose(X, [[1, t], [0, 1]], atol=1e-10)


def test_fundamental_matrix_degenerate():
    with pytest.raises(DegenerateFlowMap):
        fundamental_matrix(lambda t: -20.0 * np.eye(2), 1.0)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.floats(0.1, 2.0))
def test_liouville(entries, t):
    B = np.array(entries).reshape(2, 2)
    A = lambda s: B * math.cos(s) + 0.3 * s * np.eye(2)
    X, d = fundamental_matrix(A, t)
    trint = math.sin(t) * np.trace(B) + 0.3 * t * t
    assert d == pytest.approx(math.exp(trint), rel=1e-8)


# ---------------------------------------------------------- assembled state
def _gauss(x):
    return np.exp(-np.sum(np.asarray(x) ** 2, axis=-1))


def test_assemble_initial_time_is_exact():
    rng = np.random.default_rng(3)
    A = lambda t: np.array([[0.3, 1.0], [-0.2, 0.1 * t]])
    sol = GasSolution.assemble(A, lambda t: np.array([t, 1.0]), _gauss,
                               lambda x: 2 * _gauss(x), 1.4, (0.0, 1.0))
    x = rng.normal(size=(20, 2))
    assert np.array_equal(sol.rho(0.0, x), _gauss(x))
    assert np.array_equal(sol.p(0.0, x), 2 * _gauss(x))
    assert np.allclose(sol.V(0.5, x), x @ A(0.5).T + [0.5, 1.0])


def test_assemble_polar_transport():
    # A = alpha I + beta R, alpha = 1/(1+t): rho(t, r) = (1+t)^-2 rho0(|r|/(1+t))
    alpha = lambda t: 1.0 / (1.0 + t)
    A = lambda t: alpha(t) * np.eye(2) + 0.7 * ROT
    rho0 = lambda x: (1 + np.sum(np.asarray(x) ** 2, axis=-1)) ** -3.0
    sol = GasSolution.assemble(A, None, rho0, rho0, 1.4, (0.0, 2.0))
    x = np.random.default_rng(0).normal(size=(30, 2)) * 2
    for t in (0.5, 2.0):
        r = np.linalg.norm(x, axis=1) / (1 + t)
        expect = (1 + t) ** -2 * (1 + r * r) ** -3.0
        assert np.allclose(sol.rho(t, x), expect, rtol=1e-9, atol=0)
        assert np.allclose(sol.p(t, x), (1 + t) ** -2.8 * (1 + r * r) ** -3.0, rtol=1e-9, atol=0)


def test_assemble_mass_conserved():
    A = lambda t: np.array([[0.4, 0.5], [-0.3, 0.2]])
    sol = GasSolution.assemble(A, lambda t: np.array([0.2, -0.1]), _gauss, _gauss, 1.4, (0.0, 1.0))
    m0 = functionals(sol, 0.0, R=8.0)["M"]
    m1 = functionals(sol, 1.0, R=12.0)["M"]
    assert m0 == pytest.approx(math.pi, rel=1e-8)
    assert m1 == pytest.approx(m0, rel=1e-8)


def test_assemble_rejects_bad_input():
    with pytest.raises(ValidationError):
        GasSolution.assemble(lambda t: np.eye(2), None, lambda x: -_gauss(x), _gauss, 1.4)
    with pytest.raises(ValidationError):
        GasSolution.assemble(lambda t: np.eye(2), None, _gauss, _gauss, 1.0)
    sol = GasSolution.assemble(lambda t: np.eye(2), None, _gauss, _gauss, 1.4, (0.0, 1.0))
    with pytest.raises(ValidationError):
        sol.rho(2.0, np.zeros((1, 2)))


def test_entropy_constant_along_particle_paths():
    data = algebraic_initial_data(4.0, 1.4)
    K = ode_constant_K(data)
    tr = run(SystemKind.TWO_D_SPECIAL, ParamSet(gamma=1.4, mu=0.2, l=0.3, K={"K": K}),
             [1.0, 0.5, 0.3], 3.0)
    A, b = coefficients_from_trajectory(tr, "2d-special")
    sol = GasSolution.assemble(A, b, data.rho0, data.p0, 1.4, (0.0, 3.0))
    starts = [[0.5, 0.0], [1.0, -2.0], [-3.0, 0.7]]
    assert entropy_along_paths(sol, starts, 2.5) < 1e-8
    x = np.array(starts)
    S = sol.S(0.0, x) - sol.S(0.0, np.zeros((1, 2)))[0]
    assert np.allclose(S, data.entropy0(x), atol=1e-12)


# ---------------------------------------------------------- initial data
def test_algebraic_data_values_against_hand_integrals():
    a, g = 4.0, 1.4
    d = algebraic_initial_data(a, g)
    assert d.p0(np.zeros((1, 2)))[0] == 1.0
    assert d.Ep_0 == pytest.approx(math.pi / ((a - 1) * (g - 1)), rel=1e-10)
    # int r^2 (1+r^2)^-(a+1) over the plane = pi/(a(a-1)); with rho0's constant G = 1
    assert d.moments["G"] == pytest.approx(1.0, rel=1e-8)
    assert d.moments["M"] == pytest.approx(2 * (a - 1), rel=1e-8)
    assert d.moments["fixed_point_residual"] < 1e-6
    assert algebraic_moment(a, 2) == pytest.approx(math.pi / (a - 1), rel=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_algebraic_data_radial_compatibility(n):
    d = algebraic_initial_data(4.5, 5 / 3, G1_0=1.3, n=n)
    pts = np.random.default_rng(1).uniform(-4, 4, (200, n))
    rep = compat_residual(d, pts)
    assert rep.max_residual < 1e-12
    aff = compat_residual(d, pts, mode="affine")
    assert np.allclose(aff.fit["C"], -d.kappa * np.eye(n), atol=1e-8)
    assert np.allclose(aff.fit["c0"], 0, atol=1e-8)


def test_compatibility_detects_mismatched_widths():
    d = custom_initial_data(lambda x: _gauss(x), lambda x: _gauss(np.asarray(x) / 1.5), 1.4)
    pts = np.random.default_rng(2).uniform(-2, 2, (50, 2))
    assert compat_residual(d, pts, kappa=1.0).max_residual > 1e-2
    assert compat_residual(d, pts, mode="affine").max_residual > 1e-2
    with pytest.raises(ValidationError):
        compat_residual(d, pts)


def test_algebraic_data_validation():
    with pytest.raises(ValidationError):
        algebraic_initial_data(3.0, 1.4)
    with pytest.raises(ValidationError):
        algebraic_initial_data(4.0, 1.4, n=4)


# ------------------------------------------------------------------ Makino
def test_makino_examples():
    assert makino_variable(0.0, 1.4) == 0
    assert makino_variable(1.0, 1.4) == pytest.approx(2 * math.sqrt(1.4) / 0.4, rel=1e-15)
    p = np.geomspace(1e-8, 1e3, 200)
    assert np.allclose(makino_inverse(makino_variable(p, 1.4), 1.4), p, rtol=1e-12, atol=0)
    with pytest.raises(ValidationError):
        makino_variable(-1.0, 1.4)


@given(st.floats(1.01, 3.0), st.floats(0, 1e3), st.floats(0, 1e3))
def test_makino_monotone(g, p, q):
    lo, hi = sorted((p, q))
    assert makino_variable(lo, g) <= makino_variable(hi, g)
    assert makino_kappa(g) > 0


# --------------------------------------------------------------- corollary
def _check_witness(w, mu, delta, g, n):
    q, e = w["q"], w["eps"]
    assert q < 1 and e >= 1 / (1 - q) and e <= (g - 1) * n / (2 * q) and e * delta > 1
    if mu == 0:
        assert e <= 2


def test_corollary_examples():
    r = corollary_feasible_params(0.0, 1.0, 1.4, 2)
    assert r["feasible"] and r["witness"]["q"] < min(0.4, 0.8 / 2.8)
    _check_witness(r["witness"], 0.0, 1.0, 1.4, 2)
    r = corollary_feasible_params(0.3, 1 / 2.8, 1.4, 2)
    assert r["feasible"]
    _check_witness(r["witness"], 0.3, 1 / 2.8, 1.4, 2)
    r = corollary_feasible_params(0.0, 0.1, 1.4, 2)
    assert not r["feasible"] and r["witness"] is None


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(0.05, 3), st.floats(1.05, 3), st.sampled_from([2, 3]))
def test_corollary_witness_satisfies_inequalities(mu, delta, g, n):
    r = corollary_feasible_params(mu, delta, g, n, grid=80)
    if r["feasible"]:
        _check_witness(r["witness"], mu, delta, g, n)
    if mu == 0 and delta <= 0.5:
        assert not r["feasible"]
