"""Finite-difference residuals of the Euler system on assembled solutions.

Momentum is checked in the divided form  V_t + (V.grad)V + grad p / rho - F,
continuity as  rho_t + div(rho V)  and the pressure law as
p_t + V.grad p + gamma p div V.  Space derivatives use the 4th-order central
stencil, time derivatives the 2nd-order one, both with the same step h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

RHO_FLOOR = 1e-12


def linear_forcing(mu=0.0, l=0.0, n=2, delta=0.0, omega=(0.0, 0.0, 1.0)):
    """F = L V with L = [[-mu, l], [-l, -mu]] in the plane, -mu V + delta V x omega in space."""
    if n == 2:
        L = np.array([[-mu, l], [-l, -mu]])
    else:
        # V x omega = -[omega x V] = -W' V with W' the cross-product matrix of omega
        w1, w2, w3 = omega
        Wc = np.array([[0.0, -w3, w2], [w3, 0.0, -w1], [-w2, w1, 0.0]])
        L = -mu * np.eye(3) - delta * Wc
    return lambda t, x, V, rho, p: V @ L.T


def zero_forcing(t, x, V, rho, p):
    return np.zeros_like(V)


@dataclass
class ResidualReport:
    t_values: list
    box: float
    h: float
    momentum_max: list
    momentum_rms: list
    continuity_max: float
    continuity_rms: float
    pressure_max: float
    pressure_rms: float
    n_nodes: int
    n_excluded: int
    coarse: "ResidualReport" = None
    order: dict = field(default_factory=dict)

    @property
    def max_residual(self):
        return max(max(self.momentum_max), self.continuity_max, self.pressure_max)

    def to_dict(self):
        d = {"t_values": self.t_values, "box": self.box, "h": self.h,
             "momentum_max": self.momentum_max, "momentum_rms": self.momentum_rms,
             "continuity_max": self.continuity_max, "continuity_rms": self.continuity_rms,
             "pressure_max": self.pressure_max, "pressure_rms": self.pressure_rms,
             "n_nodes": self.n_nodes, "n_excluded": self.n_excluded, "order": self.order}
        if self.coarse is not None:
            d["coarse"] = self.coarse.to_dict()
        return d


def _dx(f, t, x, j, h):
    e = np.zeros(x.shape[1])
    e[j] = h
    return (-f(t, x + 2 * e) + 8 * f(t, x + e) - 8 * f(t, x - e) + f(t, x - 2 * e)) / (12 * h)


def _dt(f, t, x, h):
    return (f(t + h, x) - f(t - h, x)) / (2 * h)


def _single_level(sol, forcing, t_values, nodes, h):
    n = sol.n
    g = sol.gamma
    mom, cont, pres = [], [], []
    excluded = 0
    rho_f = lambda t, x: sol.rho(t, x)
    p_f = lambda t, x: sol.p(t, x)
    V_f = lambda t, x: sol.V(t, x)
    rhoV_f = lambda t, x: sol.rho(t, x)[:, None] * sol.V(t, x)
    for t in t_values:
        rho = sol.rho(t, nodes)
        p = sol.p(t, nodes)
        V = sol.V(t, nodes)
        floor = RHO_FLOOR * max(float(rho.max()), 1e-300)
        keep = rho > floor
        excluded += int(np.sum(~keep))
        x = nodes[keep]
        rho, p, V = rho[keep], p[keep], V[keep]
        Vt = _dt(V_f, t, x, h)
        rho_t = _dt(rho_f, t, x, h)
        p_t = _dt(p_f, t, x, h)
        dV = np.stack([_dx(V_f, t, x, j, h) for j in range(n)], axis=-1)      # (N, i, j) dV_i/dx_j
        gp = np.stack([_dx(p_f, t, x, j, h) for j in range(n)], axis=-1)
        div_rhoV = sum(_dx(rhoV_f, t, x, j, h)[:, j] for j in range(n))
        divV = np.trace(dV, axis1=1, axis2=2)
        F = forcing(t, x, V, rho, p)
        r_mom = Vt + np.einsum("nij,nj->ni", dV, V) + gp / rho[:, None] - F
        r_cont = rho_t + div_rhoV
        r_pres = p_t + np.sum(V * gp, axis=1) + g * p * divV
        mom.append(r_mom)
        cont.append(r_cont)
        pres.append(r_pres)
    mom = np.concatenate(mom)
    cont = np.concatenate(cont)
    pres = np.concatenate(pres)
    return (np.max(np.abs(mom), axis=0).tolist(), np.sqrt(np.mean(mom ** 2, axis=0)).tolist(),
            float(np.max(np.abs(cont))), float(np.sqrt(np.mean(cont ** 2))),
            float(np.max(np.abs(pres))), float(np.sqrt(np.mean(pres ** 2))),
            int(mom.shape[0]), excluded)


def node_grid(n, box, k):
    ax = np.linspace(-box, box, k)
    mesh = np.meshgrid(*([ax] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def pde_residual(sol, forcing=None, t_values=(0.5, 1.0, 1.5), box=2.0, k=9, h=0.02, chart=None):
    """Residuals at fixed nodes with stencil steps h and h/2; order = log2 ratio of maxima."""
    if chart is not None and chart.kind != "euclidean":
        raise ValidationError("linear-profile solutions live on Euclidean charts")
    if not h > 0:
        raise ValidationError("h must be positive")
    forcing = forcing or zero_forcing
    nodes = node_grid(sol.n, box, k)
    lo = sol.flow.t_lo
    hi = sol.flow.t_hi
    if min(t_values) - h < lo or max(t_values) + h > hi:
        raise ValidationError("time stencil leaves the assembled range")
    reports = []
    for hh in (h, h / 2):
        vals = _single_level(sol, forcing, list(t_values), nodes, hh)
        reports.append(ResidualReport(list(map(float, t_values)), float(box), float(hh), *vals))
    coarse, fine = reports
    fine.coarse = coarse

    def order(a, b):
        if a <= 0 or b <= 0:
            return None
        return math.log2(a / b)

    fine.order = {
        "momentum": [order(a, b) for a, b in zip(coarse.momentum_max, fine.momentum_max)],
        "continuity": order(coarse.continuity_max, fine.continuity_max),
        "pressure": order(coarse.pressure_max, fine.pressure_max),
        "overall": order(coarse.max_residual, fine.max_residual),
    }
    return fine

