"""Integral functionals of assembled solutions and their evolution identities."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..exact_solution import GasSolution
from .quadrature import integrate_box

R_DEFAULT = 60.0


@dataclass
class FunctionalSnapshot:
    t: float
    values: dict
    errors: dict
    info: dict = field(default_factory=dict)

    def __getitem__(self, k):
        return self.values[k]

    def to_dict(self):
        return {"t": self.t, "values": self.values, "errors": self.errors, "info": self.info}


class IdentityField:
    """L = r, divergence n; vectorized."""

    def __init__(self, n):
        self.n = n

    def values(self, pts):
        return pts, np.full(len(pts), float(self.n)), pts


class PointwiseField:
    """Wrap a FieldSpec for vectorized use (loops over points)."""

    def __init__(self, spec):
        if spec.chart.kind != "euclidean":
            raise ValidationError("separated-form functionals are computed on Euclidean charts")
        self.spec = spec

    def values(self, pts):
        from ..geometry import covariant_derivative
        L = np.array([self.spec(x) for x in pts])
        Ms = np.array([covariant_derivative(self.spec.chart, self.spec, x) for x in pts])
        D = np.trace(Ms, axis1=1, axis2=2)
        half_grad = np.einsum("nk,nki->ni", L, Ms)
        return L, D, half_grad


def _radius(sol, t, R0):
    X = sol.flow.X(t)
    _, _, s, _ = sol.flow.unpack(t)
    return R0 * max(1.0, float(np.linalg.norm(X, 2))) + float(np.linalg.norm(s))


def functionals(sol: GasSolution, t, R=None, tol=1e-8, decay=None, field=None, amplitude=None,
                m_max=6, omega=(0.0, 0.0, 1.0), panels=16, max_panels=64):
    """All functionals supported by the solution's dimension at time ``t``.

    With ``field`` (an object with ``values(pts) -> (L, D, grad|L|^2 / 2)``) and the scalar
    ``amplitude`` a(t) of V = a L, the separated-form functionals G_m, Q,
    F_sep, Q_k (k <= m_max) and N_gamma are added.
    """
    n = sol.n
    g = sol.gamma
    R = _radius(sol, t, R_DEFAULT) if R is None else R
    cols = ["M", "G", "N1", "N2", "I1", "I2", "F1", "F2", "Ek", "Ep", "Gx", "Gy", "Gxy"]
    if n == 3:
        cols = ["M", "G", "N1", "N2", "N3", "I1", "I2", "I3", "F1", "F2t", "F3", "H", "Ek", "Ep"]
    sep = field is not None
    if sep:
        if amplitude is None:
            raise ValidationError("separated-form functionals need the amplitude a(t)")
        cols += ["Gm1", "Gm3", "Gm4", "Q", "F_sep", "N_gamma", "EkL"]
        cols += [f"Q{k}" for k in range(m_max + 1)]

    def f(pts):
        rho = sol.rho(t, pts)
        p = sol.p(t, pts)
        V = sol.V(t, pts)
        r2 = np.sum(pts * pts, axis=1)
        out = {
            "M": rho, "G": 0.5 * rho * r2,
            "Ek": 0.5 * rho * np.sum(V * V, axis=1), "Ep": p / (g - 1),
        }
        for i in range(n):
            out[f"N{i + 1}"] = rho * pts[:, i]
            out[f"I{i + 1}"] = rho * V[:, i]
        out["F1"] = rho * np.sum(V * pts, axis=1)
        if n == 2:
            rperp = np.stack([pts[:, 1], -pts[:, 0]], axis=1)
            out["F2"] = rho * np.sum(V * rperp, axis=1)
            out["Gx"] = 0.5 * rho * pts[:, 0] ** 2
            out["Gy"] = 0.5 * rho * pts[:, 1] ** 2
            out["Gxy"] = 0.5 * rho * pts[:, 0] * pts[:, 1]
        else:
            w = np.asarray(omega, float)
            wxr = np.cross(w, pts)
            out["F2t"] = rho * np.sum(V * wxr, axis=1)
            out["F3"] = rho * np.sum(np.cross(V, w) * wxr, axis=1)
            out["H"] = 0.5 * rho * np.sum(wxr * wxr, axis=1)
        if sep:
            L, D, hg = field.values(pts)
            L2 = np.sum(L * L, axis=1)
            nl = np.sqrt(L2)
            out["Gm1"] = 0.5 * rho * nl
            out["Gm3"] = 0.5 * rho * nl ** 3
            out["Gm4"] = 0.5 * rho * L2 ** 2
            out["Q"] = p * D
            out["F_sep"] = rho * np.sum(hg * V, axis=1)
            out["N_gamma"] = p * (g * D * D - 3 * D + 2)
            out["EkL"] = 0.5 * rho * amplitude ** 2 * L2
            for k in range(m_max + 1):
                out[f"Q{k}"] = p * D ** k
        return np.stack([out[c] for c in cols], axis=1)

    val, err, info = integrate_box(f, n, R, tol=tol, decay=decay, panels=panels,
                                   max_panels=max_panels)
    values = dict(zip(cols, map(float, val)))
    errors = dict(zip(cols, map(float, err)))
    values["E"] = values["Ek"] + values["Ep"]
    errors["E"] = errors["Ek"] + errors["Ep"]
    if n == 2:
        values["Delta"] = values["Gx"] * values["Gy"] - values["Gxy"] ** 2
    if sep:
        values["Gm2"] = values["G"]
    info["R"] = R
    return FunctionalSnapshot(float(t), values, errors, info)


# ------------------------------------------------------------ identities
@dataclass
class IdentityRow:
    name: str
    t: float
    lhs: float
    rhs: float
    residual: float        # relative

    def to_dict(self):
        return {"name": self.name, "t": self.t, "lhs": self.lhs, "rhs": self.rhs,
                "residual": self.residual}


def _rel(lhs, rhs, floor, own=0.0):
    # own: magnitude of the functional being differentiated (per unit time)
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), abs(own), floor)


def functional_identities(sol, times, mu=0.0, l=0.0, h=1e-3, separated=None, **quad):
    """Central-difference d/dt of the planar functionals against their evolution laws.

    ``separated`` = (field, a_of_t) adds the separated-form relations.
    Forces follow the package convention F = L V, L = [[-mu, l], [-l, -mu]].
    """
    if sol.n != 2:
        raise ValidationError("identity table is planar")
    g = sol.gamma
    rows = []
    fld, a_of = separated if separated is not None else (None, None)

    def snap(t):
        kw = dict(quad)
        if fld is not None:
            kw.update(field=fld, amplitude=a_of(t))
        return functionals(sol, t, **kw)

    for t in times:
        s0, sp, sm = snap(t), snap(t + h), snap(t - h)
        d = {k: (sp[k] - sm[k]) / (2 * h) for k in s0.values}
        v = s0.values
        floor = 1e-8 * max(v["M"], v["G"], abs(v["E"]))
        laws = {
            "G' = F1": (d["G"], v["F1"]),
            "N1' = I1": (d["N1"], v["I1"]),
            "N2' = I2": (d["N2"], v["I2"]),
            "I1' = -mu I1 + l I2": (d["I1"], -mu * v["I1"] + l * v["I2"]),
            "I2' = -l I1 - mu I2": (d["I2"], -l * v["I1"] - mu * v["I2"]),
            "F1' = 2Ek + 2(g-1)Ep - mu F1 - l F2":
                (d["F1"], 2 * v["Ek"] + 2 * (g - 1) * v["Ep"] - mu * v["F1"] - l * v["F2"]),
            "F2' = l F1 - mu F2": (d["F2"], l * v["F1"] - mu * v["F2"]),
            "E' = -2 mu Ek": (d["E"], -2 * mu * v["Ek"]),
        }
        if fld is not None:
            a = a_of(t)
            laws.update({
                "G' = F_sep": (d["G"], v["F_sep"]),
                "F_sep = 2aG": (v["F_sep"], 2 * a * v["G"]),
                "Gm1' = a Gm1": (d["Gm1"], a * v["Gm1"]),
                "Gm3' = 3a Gm3": (d["Gm3"], 3 * a * v["Gm3"]),
                "Gm4' = 4a Gm4": (d["Gm4"], 4 * a * v["Gm4"]),
                "F_sep' = 2Ek + Q": (d["F_sep"], 2 * v["Ek"] + v["Q"]),
                "Ep' = -a Q": (d["Ep"], -a * v["Q"]),
                "Ek = a^2 G": (v["Ek"], a * a * v["G"]),
                "Q1' = -a N": (d["Q1"], -a * v["N_gamma"]),
            })
        for name, (lhs, rhs) in laws.items():
            key = name.split("'")[0] if "'" in name else None
            own = v.get(key, 0.0) if key else 0.0
            rows.append(IdentityRow(name, float(t), float(lhs), float(rhs),
                                    _rel(lhs, rhs, floor, own)))
    return rows


def qm_rate_rows(sol, times, field, a_of, m_max=5, h=1e-3, **quad):
    """Q_m' by differences against -m a int p D^(m-1)((1+(g-1)/m) D^2 - 3D + 2)."""
    g = sol.gamma
    rows = []
    for t in times:
        sp = functionals(sol, t + h, field=field, amplitude=a_of(t + h), m_max=m_max + 1, **quad)
        sm = functionals(sol, t - h, field=field, amplitude=a_of(t - h), m_max=m_max + 1, **quad)
        s0 = functionals(sol, t, field=field, amplitude=a_of(t), m_max=m_max + 1, **quad)
        a = a_of(t)
        for m in range(1, m_max + 1):
            lhs = (sp[f"Q{m}"] - sm[f"Q{m}"]) / (2 * h)
            rhs = -m * a * ((1 + (g - 1) / m) * s0[f"Q{m + 1}"] - 3 * s0[f"Q{m}"] + 2 * s0[f"Q{m - 1}"])
            rows.append(IdentityRow(f"Q{m}' recurrence", float(t), float(lhs), float(rhs),
                                    _rel(lhs, rhs, 1e-8 * abs(s0[f"Q{m}"]))))
    return rows


def kinetic_decomposition(rho, field, a, R=8.0, panels=16, n=2, max_panels=16):
    """E_k of V = a L against a^2 G and the curl correction 2 int rho J L1 L2 (1 - D).

    ``field`` is a FieldSpec on a planar chart; returns the three numbers.
    """
    from ..geometry import covariant_derivative

    def f(pts):
        out = np.empty((len(pts), 3))
        for k, x in enumerate(pts):
            L = field(x)
            M = covariant_derivative(field.chart, field, x)
            D = np.trace(M)
            J = M[0, 1] - M[1, 0]
            r = float(rho(x[None, :])[0])
            out[k] = [0.5 * r * a * a * (L @ L), 0.5 * r * (L @ L), 2 * r * J * L[0] * L[1] * (1 - D)]
        return out

    val, err, _ = integrate_box(f, n, R, tol=1e-9, panels=panels, max_panels=max_panels, grading=0.0)
    return {"Ek": float(val[0]), "a2G": float(a * a * val[1]), "correction": float(val[2]),
            "error": float(np.max(err))}


def entropy_along_paths(sol, starts, t_end, tol=1e-10):
    """Max variation of S along particle paths x' = V(t, x) started at ``starts``."""
    from ..reduced_ode.integrator import integrate
    worst = 0.0
    for x0 in np.atleast_2d(starts):
        tr = integrate(lambda t, x: sol.V(t, x[None, :])[0], x0, 0.0, t_end, tol=tol)
        S = [float(sol.S(t, y[None, :])[0]) for t, y in zip(tr.times, tr.states)]
        worst = max(worst, max(S) - min(S))
    return worst


def mass_history(sol, times, **quad):
    return [functionals(sol, t, **quad)["M"] for t in times]


def tail_decay_algebraic(a):
    """Decay exponent of the slowest integrand for the algebraic family.

    rho ~ |x|^-(2a+2) and the heaviest weights (|x|^2, |V|^2) grow like |x|^2.
    """
    return 2.0 * a
