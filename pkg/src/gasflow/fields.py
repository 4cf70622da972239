"""Vector fields for separable flows V = a(t) L(x), and the algebra around them.

Two pointwise conditions matter:

* *A1*:  nabla_j L^i = c delta^i_j          (strong, rarely satisfiable)
* *A2*:  L^i = L^j nabla_j L^i              (weak; the working hypothesis)

The module also provides the invariants ``J_m`` (sums of principal minors of
the covariant derivative, enumerated explicitly) and builders for the known
A2 families.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from .errors import OutsideDomainError, ShockRegionError, ValidationError
from .geometry import (
    ChartMetric, covariant_derivative, christoffel, discriminant, fd_jacobian,
)
from .reduced_ode.integrator import integrate

FAMILIES = ("identity-r", "plane-shear", "sphere-strip", "implicit-characteristic", "custom")
STRIP_MARGIN = 1e-4


@dataclass
class FieldSpec:
    chart: ChartMetric
    func: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}")

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, float)), dtype=float)

    def check_jacobian(self, x, tol=1e-5):
        """Compare the supplied Jacobian with finite differences at ``x``."""
        if self.jacobian is None:
            return 0.0
        x = np.asarray(x, float)
        diff = np.max(np.abs(self.jacobian(x) - fd_jacobian(self.func, x)))
        if diff > tol:
            raise ValidationError(f"supplied Jacobian disagrees with FD by {diff:.3e}")
        return float(diff)

    def descriptor(self):
        dom = {"lo": self.chart.lo.tolist(), "hi": self.chart.hi.tolist(), "kind": self.chart.kind}
        return {"family": self.family, "parameters": self.params, "domain": dom}


# ---------------------------------------------------------------- scalar profiles
def scalar_function(desc):
    """(f, f') from a small JSON description, e.g. {"kind": "sin", "amp": 1}."""
    if callable(desc):
        return desc, None
    kind = desc.get("kind")
    if kind == "const":
        v = float(desc["value"])
        return (lambda s: v + 0 * s), (lambda s: 0 * s)
    if kind == "poly":
        P = Polynomial(desc["coeffs"])
        dP = P.deriv()
        return P, dP
    if kind in ("sin", "cos", "tanh"):
        A = float(desc.get("amp", 1.0))
        k = float(desc.get("freq", 1.0))
        ph = float(desc.get("phase", 0.0))
        c = float(desc.get("offset", 0.0))
        if kind == "sin":
            return (lambda s: c + A * np.sin(k * s + ph)), (lambda s: A * k * np.cos(k * s + ph))
        if kind == "cos":
            return (lambda s: c + A * np.cos(k * s + ph)), (lambda s: -A * k * np.sin(k * s + ph))
        return (lambda s: c + A * np.tanh(k * s + ph)), (lambda s: A * k / np.cosh(k * s + ph) ** 2)
    if kind == "trig":
        # c0 + sum_k (a_k cos(k s) + b_k sin(k s))
        c0 = float(desc.get("c0", 0.0))
        a = np.asarray(desc.get("a", []), float)
        b = np.asarray(desc.get("b", []), float)
        ks = np.arange(1, max(len(a), len(b)) + 1)
        a = np.pad(a, (0, len(ks) - len(a)))
        b = np.pad(b, (0, len(ks) - len(b)))

        def f(s):
            s = np.asarray(s, float)
            return c0 + np.sum(a * np.cos(np.multiply.outer(s, ks)) + b * np.sin(np.multiply.outer(s, ks)), axis=-1)

        def df(s):
            s = np.asarray(s, float)
            return np.sum(ks * (-a * np.sin(np.multiply.outer(s, ks)) + b * np.cos(np.multiply.outer(s, ks))), axis=-1)
        return f, df
    raise ValidationError(f"unknown scalar function description {desc!r}")


def _deriv(f, df):
    if df is not None:
        return df
    return lambda s: (f(s + 1e-6) - f(s - 1e-6)) / 2e-6


# ------------------------------------------------------------------ families
def identity_field(chart: ChartMetric) -> FieldSpec:
    if chart.kind != "euclidean":
        raise ValidationError("L = r is only offered on Euclidean charts")
    n = chart.dim
    return FieldSpec(chart, lambda x: x.copy(), lambda x: np.eye(n), "identity-r", {})


def plane_shear(K, phi, dphi=None, chart=None) -> FieldSpec:
    """L = (x1 + phi(x2 - K x1)) * (1, K): divergence 1, satisfies A2."""
    chart = chart or ChartMetric.euclidean(2)
    params = {"K": K, "phi": phi if isinstance(phi, dict) else "callable"}
    f, df = scalar_function(phi) if isinstance(phi, dict) else (phi, dphi)
    df = _deriv(f, df)

    def func(x):
        l1 = x[0] + f(x[1] - K * x[0])
        return np.array([l1, K * l1])

    def jac(x):
        d = df(x[1] - K * x[0])
        row = np.array([1 - K * d, d])
        return np.array([row, K * row])

    return FieldSpec(chart, func, jac, "plane-shear", params)


def sphere_phase(C, theta):
    """Characteristic phase of the strip family: d/dtheta = 1/(sin th sqrt(C sin^2 th - 1))."""
    return -np.arcsin(np.clip(np.cos(theta) / np.sin(theta) / np.sqrt(C - 1), -1.0, 1.0))


def in_strip(C, theta, margin=STRIP_MARGIN):
    return abs(np.sin(theta)) >= 1 / math.sqrt(C) + margin


def sphere_physical(C, psi1, branch, radius, x, margin=STRIP_MARGIN):
    """Physical components (u, v) and slope z = v/u of the strip family."""
    phi, th = float(x[0]), float(x[1])
    if not in_strip(C, th, margin):
        raise OutsideDomainError(f"theta={th} lies outside the strip |sin theta| > 1/sqrt(C)")
    s, c = math.sin(th), math.cos(th)
    root = math.sqrt(max(C * s * s - 1, 0.0))
    z = branch * root
    arg = min(1.0, max(-1.0, math.sqrt(C) * c / math.sqrt(C - 1)))
    u = (-branch * radius / math.sqrt(C) * math.asin(arg) + psi1(phi - branch * sphere_phase(C, th))) / s
    return u, z * u, z


def sphere_field(C, psi1=0.0, branch=1, radius=1.0, margin=STRIP_MARGIN) -> FieldSpec:
    if not C > 1:
        raise ValidationError("strip family needs C > 1")
    if branch not in (1, -1):
        raise ValidationError("branch must be +1 or -1")
    params = {"C": C, "branch": branch, "radius": radius,
              "psi1": psi1 if isinstance(psi1, (dict, float, int)) else "callable"}
    if isinstance(psi1, (int, float)):
        v0 = float(psi1)
        p1, dp1 = (lambda s: v0), (lambda s: 0.0)
    elif isinstance(psi1, dict):
        p1, dp1 = scalar_function(psi1)
    else:
        p1, dp1 = psi1, None
    dp1 = _deriv(p1, dp1)
    chart = ChartMetric.sphere(radius, lo=(-np.inf, 0.0), hi=(np.inf, np.pi))
    r = radius

    def func(x):
        u, v, _ = sphere_physical(C, p1, branch, r, x, margin)
        return np.array([u / (r * math.sin(x[1])), v / r])

    def jac(x):
        u, v, z = sphere_physical(C, p1, branch, r, x, margin)
        phi, th = float(x[0]), float(x[1])
        s, c = math.sin(th), math.cos(th)
        root = math.sqrt(C * s * s - 1)
        dpsi = float(dp1(phi - branch * sphere_phase(C, th)))
        # numerator n = u sin(theta)
        n_th = branch * (r * s - dpsi / s) / root
        u_ph = dpsi / s
        u_th = n_th / s - u * c / s
        z_th = branch * C * s * c / root
        return np.array([
            [u_ph / (r * s), (u_th - u * c / s) / (r * s)],
            [z * u_ph / r, (z_th * u + z * u_th) / r],
        ])

    return FieldSpec(chart, func, jac, "sphere-strip", params)


@dataclass
class CharPoint:
    z: float
    s: float            # foot of the characteristic on x1 = 0
    lam: np.ndarray
    iterations: int


def _solve_slope(F, dF, x1, x2, tol=1e-12, maxit=100):
    h = lambda z: z - F(x2 - z * x1)
    dh = lambda z: 1 + x1 * dF(x2 - z * x1)
    z = float(F(x2))
    for it in range(1, maxit + 1):
        d = dh(z)
        if d <= 0:
            break
        step = h(z) / d
        z -= step
        if abs(step) <= tol * max(1.0, abs(z)):
            return z, it
    # safeguard: bracket and bisect (Brent)
    z0 = float(F(x2))
    w = 1.0
    for _ in range(60):
        a, b = z0 - w, z0 + w
        if h(a) * h(b) < 0:
            return brentq(h, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200), maxit
        w *= 2
    raise ShockRegionError(f"no characteristic slope found at x=({x1}, {x2})")


def characteristics_solve(F, x, dF=None, datum=None, source=None, tol=1e-12) -> CharPoint:
    """Field of the implicit family at ``x``.

    The slope z solves z = F(x2 - z x1). Along the straight characteristic
    from (0, s), s = x2 - z x1, the first component obeys d L1/d x1 = 1 (or
    ``source(x1, x2, L1, z)``) with L1(0, s) = datum(s); then L2 = z L1.
    """
    x1, x2 = map(float, x)
    if isinstance(F, dict):
        F, dF = scalar_function(F)
    dF = _deriv(F, dF)
    z, its = _solve_slope(F, dF, x1, x2, tol)
    s = x2 - z * x1
    jac = 1 + x1 * dF(s)
    if jac <= 0:
        Fp = dF(s)
        crit = -1.0 / Fp if Fp != 0 else None
        raise ShockRegionError(
            f"characteristics cross before x1={x1}; critical x1 ~ {crit}", critical_x1=crit)
    l0 = float(datum(s)) if datum is not None else 0.0
    if source is None:
        l1 = l0 + x1
    elif x1 == 0:
        l1 = l0
    else:
        tr = integrate(lambda t, y: np.array([source(t, s + z * t, y[0], z)]), [l0], 0.0, x1,
                       tol=1e-12)
        l1 = float(tr.y_final[0])
    return CharPoint(float(z), float(s), np.array([l1, z * l1]), its)


def implicit_characteristic(F, dF=None, datum=None, ddatum=None, source=None, chart=None) -> FieldSpec:
    chart = chart or ChartMetric.euclidean(2)
    params = {"F": F if isinstance(F, dict) else "callable",
              "datum": datum if isinstance(datum, dict) else ("callable" if datum else None),
              "source": source is not None}
    if isinstance(F, dict):
        F, dF = scalar_function(F)
    if isinstance(datum, dict):
        datum, ddatum = scalar_function(datum)
    dFd = _deriv(F, dF)

    def func(x):
        return characteristics_solve(F, x, dFd, datum, source).lam

    jac = None
    if source is None:
        dd = (lambda s: 0.0) if datum is None else _deriv(datum, ddatum)

        def jac(x):
            cp = characteristics_solve(F, x, dFd, datum, None)
            x1 = x[0]
            Fp = dFd(cp.s)
            den = 1 + x1 * Fp
            z1, z2 = -cp.z * Fp / den, Fp / den
            s1, s2 = -cp.z - x1 * z1, 1 - x1 * z2
            d = dd(cp.s)
            l1 = cp.lam[0]
            r1 = np.array([1 + d * s1, d * s2])
            r2 = np.array([z1 * l1, z2 * l1]) + cp.z * r1
            return np.array([r1, r2])

    return FieldSpec(chart, func, jac, "implicit-characteristic", params)


def random_a2_candidate(rng, order=2, amp=0.3):
    """Implicit-family field with a random low-order trigonometric slope profile."""
    desc = {"kind": "trig", "c0": float(rng.uniform(-1, 1)),
            "a": (amp * rng.uniform(-1, 1, order) / np.arange(1, order + 1)).tolist(),
            "b": (amp * rng.uniform(-1, 1, order) / np.arange(1, order + 1)).tolist()}
    return implicit_characteristic(desc), desc


def custom_field(chart, func, jacobian=None) -> FieldSpec:
    return FieldSpec(chart, func, jacobian, "custom", {})


# ------------------------------------------------------------------ residuals
def a1_residual(chart, field, x):
    """nabla_j L^i - c delta^i_j with c = div L / dim."""
    M = covariant_derivative(chart, field, x)
    c = np.trace(M) / chart.dim
    return M - c * np.eye(chart.dim)


def a2_residual(chart, field, x, xi=None):
    """L^i - L^j nabla_j L^i, or xi*L^i - L^j nabla_j L^i with a scalar source xi(x, L)."""
    lam = field(x)
    M = covariant_derivative(chart, field, x)
    scale = 1.0 if xi is None else xi(np.asarray(x, float), lam)
    return scale * lam - M @ lam


# ------------------------------------------------------------------ J_m
def jm_from_matrix(M, m):
    """Sum over index subsets of size m of the explicit permutation expansion.

    For each subset K the term is  prod_k M[i_k, i_k]  plus the signed products
    over every non-identity rearrangement of K, i.e. the principal minor on K.
    """
    M = np.asarray(M, float)
    n = M.shape[0]
    if not 0 <= m <= n:
        raise ValidationError(f"m must lie in [0, {n}]")
    if m == 0:
        return 1.0
    total = 0.0
    for K in itertools.combinations(range(n), m):
        diag = math.prod(M[i, i] for i in K)
        off = 0.0
        for perm in itertools.permutations(K):
            if perm == K:
                continue
            sign = _perm_sign(K, perm)
            off += sign * math.prod(M[i, j] for i, j in zip(K, perm))
        total += diag + off
    return total


def _perm_sign(K, perm):
    pos = {v: i for i, v in enumerate(K)}
    p = [pos[v] for v in perm]
    sign, seen = 1, [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, cyc = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            cyc += 1
        if cyc % 2 == 0:
            sign = -sign
    return sign


def identity_residuals(M):
    """Residuals of the trace identities and of det(I - M) = 0 for a matrix M."""
    n = M.shape[0]
    D = float(np.trace(M))
    J = [jm_from_matrix(M, m) for m in range(n + 1)]
    out = {"power2": D - (D * D - 2 * J[2])}
    if n >= 3:
        out["power3"] = D - (D ** 3 + 3 * J[3] - 3 * D * J[2])
    if n >= 4:
        out["power4"] = D - (D ** 4 - 4 * J[4] - 4 * D * D * J[2] + 4 * D * J[3] + 2 * J[2] ** 2)
    out["eigen_one"] = sum((-1) ** m * J[m] for m in range(n + 1))
    return out


@dataclass
class JmReport:
    m: int
    value: float
    divergence: float
    identity_residuals: dict

    def to_dict(self):
        return {"m": self.m, "value": self.value, "divergence": self.divergence,
                "identity_residuals": self.identity_residuals}


def jm(chart, field, x, m) -> JmReport:
    M = covariant_derivative(chart, field, x)
    if not 2 <= m <= chart.dim:
        raise ValidationError(f"m must lie in [2, {chart.dim}]")
    return JmReport(m, jm_from_matrix(M, m), float(np.trace(M)), identity_residuals(M))


def divergence_polynomial(n) -> Polynomial:
    """Characteristic constraint on a constant divergence D in dimension n.

    J_m are eliminated with the power-sum identities (tr M^k = D for all k),
    then substituted into 1 - D + J_2 - ... = 0.
    """
    if n not in (2, 3, 4):
        raise ValidationError("n must be 2, 3 or 4")
    D = Polynomial([0, 1])
    J2 = (D ** 2 - D) / 2
    J3 = (D - D ** 3 + 3 * D * J2) / 3
    J4 = (D ** 4 - 4 * D ** 2 * J2 + 4 * D * J3 + 2 * J2 ** 2 - D) / 4
    terms = [Polynomial([1]), D, J2, J3, J4][: n + 1]
    return sum(((-1) ** m * t for m, t in enumerate(terms)), Polynomial([0]))


def divergence_roots(n, grid=4001):
    P = divergence_polynomial(n)
    xs = np.linspace(0.0, n + 1.0, grid) + 1e-3 / math.pi  # keep grid off the integers
    vals = P(xs)
    roots = []
    for a, b, fa, fb in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if fa == 0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(brentq(P, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return sorted(roots)


# ------------------------------------------------------------------ potentials
def covariant_hessian(chart, phi, x, h=1e-3):
    x = chart.check(x)
    grad = lambda y: fd_jacobian(lambda z: np.atleast_1d(phi(z)), y, h)[0]
    g1 = grad(x)
    H = fd_jacobian(grad, x, h)
    H = 0.5 * (H + H.T)
    H = H - np.einsum("kij,k->ij", christoffel(chart, x), g1)
    return chart.g_inv(x) @ H


def potential_condition(chart, phi, x):
    """det(Hess) - Laplacian + 1 for a planar potential phi (zero iff L = grad phi meets A2-type constraint)."""
    if chart.dim != 2:
        raise ValidationError("potential condition is planar")
    Hm = covariant_hessian(chart, phi, x)
    return float(np.linalg.det(Hm) - np.trace(Hm) + 1.0)


# ------------------------------------------------------------------ coupled fields
def coriolis_ansatz_residual(chart, lam, xi, l, points):
    """Max residuals (r1, r2, r3) of the rotating-frame ansatz over ``points``."""
    r1 = r2 = r3 = 0.0
    for x in points:
        x = np.asarray(x, float)
        e = discriminant(chart, x)
        L, X = lam(x), xi(x)
        ML = covariant_derivative(chart, lam, x)
        MX = covariant_derivative(chart, xi, x)
        r1 = max(r1, np.max(np.abs(L - ML @ L)))
        r2 = max(r2, np.max(np.abs(MX @ X - l * e @ X)))
        r3 = max(r3, np.max(np.abs(l * e @ L - (ML @ X + MX @ L))))
    return float(r1), float(r2), float(r3)


def multi_field_residual(chart, fields, beta, points):
    """Max over points of | L_m.grad L_l + L_l.grad L_m - sum_k beta_k L_k | for all pairs."""
    beta = np.asarray(beta, float)
    worst = 0.0
    for x in points:
        x = np.asarray(x, float)
        vals = [f(x) for f in fields]
        ders = [covariant_derivative(chart, f, x) for f in fields]
        comb = sum(b * v for b, v in zip(beta, vals))
        for m, l in itertools.combinations(range(len(fields)), 2):
            res = ders[l] @ vals[m] + ders[m] @ vals[l] - comb
            worst = max(worst, float(np.max(np.abs(res))))
    return worst


def multi_field_coeffs(beta, a0, t_end, tol=1e-10):
    """a_k' = -a_k^2 - beta_k a_k sum_{l != k} a_l, with blow-up when |a_k| > 1/tol."""
    beta = np.asarray(beta, float)
    a0 = np.asarray(a0, float)
    if beta.shape != a0.shape:
        raise ValidationError("beta and a0 must have the same length")

    def rhs(t, a):
        tot = a.sum()
        return -a * a - beta * a * (tot - a)

    names = tuple(f"a{k + 1}" for k in range(a0.size))
    tr = integrate(rhs, a0, 0.0, t_end, tol=max(tol, 1e-13), names=names,
                   blowup=1.0 / tol, underflow_event=True)
    for ev in tr.events:
        if ev.kind == "blow_up":
            big = np.max(np.abs(ev.state))
            # near a finite-time singularity a ~ -1/(t* - t)
            ev.detail += f"; estimated blow-up time {ev.t + 1.0 / big:.17g}"
            ev.t_blowup = ev.t + 1.0 / big
    return tr


# ------------------------------------------------------------------ descriptors
def field_from_descriptor(desc) -> FieldSpec:
    """Build a field from {family, parameters, domain}; the inverse of FieldSpec.descriptor()."""
    if not isinstance(desc, dict) or "family" not in desc:
        raise ValidationError("field descriptor needs a 'family' key")
    fam = desc["family"]
    prm = dict(desc.get("parameters") or {})
    dom = desc.get("domain") or {}
    extra = set(desc) - {"family", "parameters", "domain"}
    if extra:
        raise ValidationError(f"unknown descriptor keys {sorted(extra)}")
    if fam == "identity-r":
        dim = int(prm.get("dim", len(dom.get("lo", [0, 0]))))
        return identity_field(ChartMetric.euclidean(dim))
    if fam == "plane-shear":
        return plane_shear(float(prm.get("K", 1.0)), prm.get("phi", {"kind": "sin"}))
    if fam == "sphere-strip":
        return sphere_field(float(prm["C"]), prm.get("psi1", 0.0), int(prm.get("branch", 1)),
                            float(prm.get("radius", 1.0)))
    if fam == "implicit-characteristic":
        return implicit_characteristic(prm.get("F", {"kind": "const", "value": 0.0}),
                                       datum=prm.get("datum"))
    raise ValidationError(f"family {fam!r} cannot be rebuilt from a descriptor")
