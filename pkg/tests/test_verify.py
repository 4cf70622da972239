import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gasflow.errors import InconclusiveQuadrature, ValidationError
from gasflow.exact_solution import (
    GasSolution, coefficients_from_trajectory, ode_constant_K, algebraic_initial_data,
)
from gasflow.fields import field_from_descriptor
from gasflow.reduced_ode import ParamSet, SystemKind, run
from gasflow.verify import (
    functional_identities, functionals, gaussian_mixture, integrate_box, kinetic_decomposition,
    lemma51_check, lemma_constant, linear_forcing, pde_residual, qm_integrand_residual,
    qm_rate_rows, qm_sign_rule_holds, singularity_criterion, singularity_inputs,
)
from gasflow.verify.functionals import IdentityField

SHEAR = {"family": "plane-shear", "parameters": {"K": 0.5, "phi": {"kind": "sin"}}}


def linear_profile_solution(a=4.0, g=1.4, mu=0.0, l=0.0, y0=(1.0, 0.5, 0.3), t_end=3.0, alpha_scale=1.0):
    d = algebraic_initial_data(a, g)
    p = ParamSet(gamma=g, mu=mu, l=l, K={"K": ode_constant_K(d)})
    tr = run(SystemKind.TWO_D_SPECIAL, p, list(y0), t_end, tol=1e-12)
    A, b = coefficients_from_trajectory(tr, "2d-special", alpha_scale=alpha_scale)
    return GasSolution.assemble(A, b, d.rho0, d.p0, g, (0.0, t_end)), tr, d


# ------------------------------------------------------------- quadrature
def test_quadrature_gaussian_and_tail_error():
    f = lambda x: np.exp(-np.sum(x * x, axis=1))
    val, err, info = integrate_box(f, 3, 7.0, panels=8, max_panels=8)
    assert val == pytest.approx(math.pi ** 1.5, rel=1e-11)
    slow = lambda x: (1 + np.sum(x * x, axis=1)) ** -1.6
    with pytest.raises(InconclusiveQuadrature) as e:
        integrate_box(slow, 2, 5.0, decay="auto")
    assert e.value.suggested_radius > 5.0


# --------------------------------------------------------------- residual
def test_constant_state_residual_is_zero():
    one = lambda x: np.ones(len(x))
    sol = GasSolution.assemble(lambda t: np.zeros((2, 2)), None, one, one, 1.4, (0.0, 1.0))
    rep = pde_residual(sol, None, t_values=(0.5,), box=1.0, k=5)
    assert rep.max_residual == 0.0


def test_residual_second_order_and_negative_control():
    sol, _, _ = linear_profile_solution(mu=0.3, l=0.5)
    rep = pde_residual(sol, linear_forcing(0.3, 0.5), t_values=(0.5, 1.5), box=2.0, k=7)
    assert rep.max_residual < 1e-3
    assert 1.8 <= rep.order["overall"] <= 2.2
    bad, _, _ = linear_profile_solution(mu=0.3, l=0.5, alpha_scale=1.01)
    rb = pde_residual(bad, linear_forcing(0.3, 0.5), t_values=(0.5, 1.5), box=2.0, k=7)
    assert max(rb.momentum_max) > 1e-3
    assert abs(rb.order["momentum"][0]) < 0.5


def test_residual_rejects_stencil_outside_range():
    sol, _, _ = linear_profile_solution(t_end=1.0)
    with pytest.raises(ValidationError):
        pde_residual(sol, None, t_values=(0.0,))


# ------------------------------------------------------------ functionals
def test_functionals_at_initial_time():
    a, g = 4.0, 1.4
    sol, _, d = linear_profile_solution(a, g)
    s = functionals(sol, 0.0, decay="auto")
    # hand integrals over the plane: int (1+r^2)^-a = pi/(a-1), int r^2 (1+r^2)^-(a+1) = pi/(a(a-1))
    c = 2 * a / d.kappa
    assert s["M"] == pytest.approx(c * math.pi / a, rel=1e-8)
    assert s["G"] == pytest.approx(0.5 * c * math.pi / (a * (a - 1)), rel=1e-8)
    assert s["Ep"] == pytest.approx(math.pi / ((a - 1) * (g - 1)), rel=1e-8)
    assert abs(s["N1"]) < 1e-12 and abs(s["N2"]) < 1e-12
    assert s["Gx"] == pytest.approx(s["Gy"], rel=1e-10) and abs(s["Gxy"]) < 1e-12
    assert s["Delta"] > 0


@pytest.mark.parametrize("mu", [0.0, 0.3])
def test_energy_nonincreasing(mu):
    sol, _, _ = linear_profile_solution(mu=mu, l=0.5)
    E = [functionals(sol, t, decay="auto")["E"] for t in (0.0, 1.0, 2.0)]
    if mu == 0:
        assert E[2] == pytest.approx(E[0], rel=1e-8)
    else:
        assert E[0] > E[1] > E[2]


def test_quadrature_doubling_within_error_estimate():
    sol, _, _ = linear_profile_solution()
    s1 = functionals(sol, 1.0, decay="auto")
    s2 = functionals(sol, 1.0, decay="auto", panels=2 * s1.info["panels"],
                     max_panels=2 * s1.info["panels"])
    for k in ("M", "G", "F1", "Ek", "Ep"):
        assert abs(s1[k] - s2[k]) <= max(s1.errors[k], 1e-12 * abs(s1[k]))


@pytest.mark.parametrize("mu,l", [(0.0, 0.0), (0.3, 0.5)])
def test_identities(mu, l):
    sol, _, _ = linear_profile_solution(mu=mu, l=l)
    rows = functional_identities(sol, [0.5, 2.0], mu=mu, l=l, decay="auto")
    assert max(r.residual for r in rows) < 1e-5


def test_separated_identities_identity_field():
    # V = alpha(t) r is the separated form with L = r (divergence 2)
    sol, tr, _ = linear_profile_solution(a=6.0, y0=(1.0, 0.0, 0.3))
    a_of = lambda t: float(tr(t)[2])
    rows = functional_identities(sol, [1.0], separated=(IdentityField(2), a_of), decay="auto")
    assert len(rows) == 17
    assert max(r.residual for r in rows) < 1e-5


def test_q1_sign_rule():
    sol, tr, _ = linear_profile_solution(a=6.0, y0=(1.0, 0.0, 0.3))
    a_of = lambda t: float(tr(t)[2])
    rows = qm_rate_rows(sol, [1.0], IdentityField(2), a_of, m_max=3, decay="auto")
    assert max(r.residual for r in rows) < 1e-5
    assert qm_sign_rule_holds(1, 1.4) and not qm_sign_rule_holds(2, 1.4)
    q1 = next(r for r in rows if r.name.startswith("Q1"))
    assert np.sign(q1.lhs) == -np.sign(a_of(1.0))


def test_qm_pointwise_relation():
    f = field_from_descriptor({"family": "identity-r", "parameters": {"dim": 2}})
    pts = np.random.default_rng(0).uniform(-2, 2, (10, 2))
    for m in (1, 2, 3):
        assert qm_integrand_residual(f.chart, f, pts, m, 1.4) < 1e-8
    with pytest.raises(ValidationError):
        qm_integrand_residual(f.chart, f, pts, 0, 1.4)


def test_kinetic_decomposition_unit_divergence():
    f = field_from_descriptor(SHEAR)
    rho = lambda x: np.exp(-np.sum(np.asarray(x) ** 2, axis=-1))
    out = kinetic_decomposition(rho, f, 0.7, R=7.0, panels=4, max_panels=4)
    assert out["Ek"] == pytest.approx(out["a2G"], rel=1e-12)
    assert abs(out["correction"]) < 1e-12


# ----------------------------------------------------------------- lemma
def test_lemma_zero_function():
    r = lemma51_check(lambda x: np.zeros(len(x)), 1.4, 2, R=3.0)
    assert r.lhs == 0 and r.rhs == 0 and r.margin == 0


def test_lemma_gaussian():
    f = lambda x: np.exp(-np.sum(x * x, axis=1))
    r = lemma51_check(f, 1.4, 2, R=8.0)
    assert r.lhs == pytest.approx(math.pi, rel=1e-10)
    assert r.margin >= 0
    with pytest.raises(ValidationError):
        lemma51_check(lambda x: -f(x), 1.4, 2)


@pytest.mark.parametrize("n", [2, 3])
def test_lemma_random_mixtures(n):
    rng = np.random.default_rng(7 + n)
    for _ in range(5):
        f = gaussian_mixture(rng, n)
        res = lemma51_check(f, [1.2, 1.4, 5 / 3], n, R=f.box, max_panels=16 if n == 2 else 4)
        assert res[0].lhs == pytest.approx(f.mass, rel=1e-4)
        assert res[0].moments["int_r2_f"] == pytest.approx(f.second, rel=1e-4)
        assert all(r.margin >= -1e-10 for r in res)


@given(st.floats(1.01, 4.0), st.sampled_from([2, 3]))
def test_lemma_constant_positive(g, n):
    assert lemma_constant(g, n) > 0


# ------------------------------------------------------------ singularity
def test_singularity_degenerate_bound():
    v = singularity_criterion(1e-9, 2.0, 3.0, 4.0, 0.0, 1.4)
    assert v.threshold == 0 and v.criterion_met


def test_singularity_strict_inequality():
    M, E, lam2, dm, g = 2.0, 3.0, 4.0, 0.5, 1.4
    thr = math.sqrt(lam2) * math.sqrt((g - 1) * dm * M * E)
    v = singularity_criterion(thr, M, E, lam2, dm, g)
    assert v.threshold == thr and not v.criterion_met
    assert singularity_criterion(thr * (1 + 1e-12), M, E, lam2, dm, g).criterion_met
    assert v.necessary_ok == (dm <= M * E / (g - 1))
    with pytest.raises(ValidationError):
        singularity_criterion(1.0, -1.0, 1.0, 1.0, 0.0, 1.4)


def test_singularity_from_quadrature_two_paths():
    d = algebraic_initial_data(4.0, 1.4)
    f = field_from_descriptor(SHEAR)
    a0 = -0.5
    inp = singularity_inputs(d, f, a0)
    assert inp["mass"] == pytest.approx(6.0, rel=1e-6)
    # L . grad(|L|^2 / 2) = |L|^2 for the shear family, so F(0) = 2 Ek / a0
    assert inp["F0"] == pytest.approx(2 * inp["Ek"] / a0, rel=1e-8)
    v = singularity_criterion(inp["F0"], inp["mass"], inp["energy"], inp["lam_sup2"],
                              inp["d_minus"], 1.4)
    thr = (inp["lam_sup2"] * 0.4 * inp["d_minus"] * inp["mass"] * inp["energy"]) ** 0.5
    assert v.threshold == pytest.approx(thr, rel=1e-12)
    assert v.criterion_met == (inp["F0"] > thr)
