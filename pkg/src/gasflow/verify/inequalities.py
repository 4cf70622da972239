"""Interpolation inequality, blow-up criterion and the Q_m relations."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..geometry import covariant_derivative, divergence, fd_jacobian
from .quadrature import integrate_box


def lemma_exponents(gamma, n):
    d = (n + 2) * gamma - n
    return 2.0 / d, n * (gamma - 1) / d


def lemma_constant(gamma, n, g_star=1.0):
    d = (n + 2) * gamma - n
    base = 2 * gamma / (n * (gamma - 1))
    return g_star ** (n * (gamma - 1) / (2 * d)) * (
        base ** (n * (gamma - 1) / d) + base ** (-2 * gamma / d))


@dataclass
class LemmaResult:
    lhs: float
    rhs: float
    margin: float          # (rhs - lhs) / rhs, or 0 for f = 0
    moments: dict

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "moments": self.moments}


def lemma51_from_moments(mass, power_int, second, gamma, n, g_star=1.0):
    e1, e2 = lemma_exponents(gamma, n)
    rhs = lemma_constant(gamma, n, g_star) * power_int ** e1 * second ** e2
    margin = 0.0 if rhs == 0 and mass == 0 else (rhs - mass) / rhs if rhs > 0 else -math.inf
    return LemmaResult(float(mass), float(rhs), float(margin),
                       {"int_f": float(mass), "int_f_gamma": float(power_int),
                        "int_r2_f": float(second)})


def lemma51_check(f, gamma, n, R=10.0, chart=None, tol=1e-9, panels=8, max_panels=32, grading=0.0):
    """Both sides of  int f <= C (int f^gamma)^e1 (int |x|^2 f)^e2  by quadrature.

    With a chart, integrals carry sqrt(det g) and g_* is the smallest det g
    seen on the quadrature nodes.
    """
    gammas = np.atleast_1d(np.asarray(gamma, float))
    if not np.all(gammas > 1):
        raise ValidationError("gamma must be > 1")
    if n not in (2, 3):
        raise ValidationError("n must be 2 or 3")
    gstar = [1.0]

    def integrand(pts):
        v = np.asarray(f(pts), float)
        if np.any(v < 0):
            raise ValidationError("f must be non-negative")
        w = np.ones(len(pts))
        if chart is not None and chart.kind != "euclidean":
            dets = np.array([np.linalg.det(chart.g(x)) for x in pts])
            gstar[0] = float(dets.min())
            w = np.sqrt(dets)
        r2 = np.sum(pts * pts, axis=1)
        cols = [v * w, r2 * v * w] + [v ** g * w for g in gammas]
        return np.stack(cols, axis=1)

    val, _, _ = integrate_box(integrand, n, R, tol=tol, panels=panels, max_panels=max_panels,
                              grading=grading, decay=None)
    res = [lemma51_from_moments(val[0], val[2 + k], val[1], g, n, gstar[0])
           for k, g in enumerate(gammas)]
    return res[0] if np.ndim(gamma) == 0 else res


def gaussian_mixture(rng, n, k=None):
    k = k or int(rng.integers(1, 5))
    centers = rng.uniform(-1.5, 1.5, (k, n))
    widths = rng.uniform(0.3, 1.0, k)
    amps = rng.uniform(0.2, 2.0, k)

    def f(pts):
        d2 = np.sum((pts[:, None, :] - centers[None]) ** 2, axis=-1)
        return np.sum(amps * np.exp(-0.5 * d2 / widths ** 2), axis=1)

    f.box = float(np.max(np.abs(centers)) + 9 * widths.max())
    f.params = {"centers": centers.tolist(), "widths": widths.tolist(), "amps": amps.tolist()}
    # closed forms for the cross-check of the quadrature
    norm = (2 * math.pi) ** (n / 2) * widths ** n
    f.mass = float(np.sum(amps * norm))
    f.second = float(np.sum(amps * norm * (np.sum(centers ** 2, axis=1) + n * widths ** 2)))
    return f


# ------------------------------------------------------------ singularity
@dataclass
class SingularityVerdict:
    F0: float
    threshold: float
    criterion_met: bool
    necessary_bound: float
    necessary_ok: bool

    def to_dict(self):
        return {"F0": self.F0, "threshold": self.threshold, "criterion_met": self.criterion_met,
                "necessary_bound": self.necessary_bound, "necessary_ok": self.necessary_ok}


def singularity_criterion(F0, mass, energy, lam_sup2, d_minus, gamma):
    """F(0) > L+ sqrt((gamma-1) D- M E) (strict) and the companion bound D- <= M E/(gamma-1)."""
    if not gamma > 1:
        raise ValidationError("gamma must be > 1")
    if mass < 0 or energy < 0 or lam_sup2 < 0 or d_minus < 0:
        raise ValidationError("mass, energy, sup|L|^2 and D- must be non-negative")
    thr = math.sqrt(lam_sup2) * math.sqrt((gamma - 1) * d_minus * mass * energy)
    nb = mass * energy / (gamma - 1)
    return SingularityVerdict(float(F0), thr, bool(F0 > thr), nb, bool(d_minus <= nb))


def field_bounds(chart, field, points):
    """Sampled sup |L|^2 and D- = |inf D| (0 when the divergence stays non-negative)."""
    sup2, dmin = 0.0, math.inf
    for x in points:
        L = field(x)
        sup2 = max(sup2, float(L @ chart.g(x) @ L))
        dmin = min(dmin, divergence(chart, field, x))
    return sup2, max(0.0, -dmin)


def singularity_inputs(data, field, a0, R=8.0, panels=8, max_panels=16, n_probe=41):
    """Mass, energy and F(0) by quadrature for V0 = a0 L; field bounds sampled on [-R, R]^2.

    sup|L|^2 is a sampled maximum over the box, not a global supremum.
    """
    from .functionals import PointwiseField
    pf = PointwiseField(field)
    g = data.gamma

    def f(pts):
        rho = np.asarray(data.rho0(pts), float)
        L, _, hg = pf.values(pts)
        return np.stack([rho, 0.5 * rho * a0 * a0 * np.sum(L * L, axis=1),
                         np.asarray(data.p0(pts), float) / (g - 1),
                         rho * a0 * np.sum(L * hg, axis=1)], axis=1)

    val, err, info = integrate_box(f, 2, R, tol=1e-9, panels=panels, max_panels=max_panels)
    ax = np.linspace(-R, R, n_probe)
    probe = np.array([(u, v) for u in ax for v in ax])
    sup2, dminus = field_bounds(field.chart, field, probe)
    return {"F0": float(val[3]), "mass": float(val[0]), "energy": float(val[1] + val[2]),
            "Ek": float(val[1]), "Ep": float(val[2]), "lam_sup2": sup2, "d_minus": dminus,
            "quadrature_error": float(np.max(err)), "panels": info["panels"], "box": float(R)}


# ------------------------------------------------------------------ Q_m
def qm_integrand_residual(chart, field, points, m, gamma, h=1e-4):
    """Pointwise: L.grad(D^m) - (g-1) D^(m+1)  vs  -m D^(m-1) ((1+(g-1)/m) D^2 - 3D + 2).

    Both are the integrands of Q_m'/a; they agree for planar fields that meet
    the pointwise condition (the trace identity J = D - 1 is used).
    """
    if m < 1:
        raise ValidationError("m must be >= 1")
    worst = 0.0
    Dfun = lambda y: np.array([divergence(chart, field, y)])
    for x in points:
        x = np.asarray(x, float)
        L = field(x)
        D = Dfun(x)[0]
        gradD = fd_jacobian(Dfun, x, h)[0]
        lhs = m * D ** (m - 1) * float(L @ gradD) - (gamma - 1) * D ** (m + 1)
        rhs = -m * D ** (m - 1) * ((1 + (gamma - 1) / m) * D * D - 3 * D + 2)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return worst


def qm_quadratic_min(m, gamma):
    """Minimum over D of (1 + (g-1)/m) D^2 - 3D + 2."""
    c = 1 + (gamma - 1) / m
    return 2 - 9 / (4 * c)


def qm_sign_rule_holds(m, gamma):
    """True when the odd-m sign rule applies (m odd and m < 8(gamma-1))."""
    return m % 2 == 1 and m < 8 * (gamma - 1)


def n_gamma_lower_coeff(gamma):
    """alpha_0 in N >= alpha_0 E_p (meaningful for gamma > 9/8)."""
    return (8 * gamma - 9) * (gamma - 1) / (4 * gamma)


def trace_identity_residual(chart, field, x):
    """L.grad D - (D - D^2 + 2 J2) at x (planar, flat charts)."""
    Dfun = lambda y: np.array([divergence(chart, field, y)])
    M = covariant_derivative(chart, field, x)
    D = np.trace(M)
    J2 = np.linalg.det(M)
    gradD = fd_jacobian(Dfun, np.asarray(x, float))[0]
    return float(field(x) @ gradD - (D - D * D + 2 * J2))
