"""Energies, closed forms, equilibria, asymptotic fits and phase portraits."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from ..errors import ValidationError, NumericalEvent
from .integrator import integrate, Trajectory
from .systems import (
    SystemKind, ParamSet, STATE_NAMES, POSITIVE, make_rhs, make_monitor, check_initial,
    general_delta, shift_kinetic, pressure_exponent,
)


def run(kind, params: ParamSet, y0, t_end, tol=1e-10, t0=0.0, **kw) -> Trajectory:
    kind = SystemKind.parse(kind)
    y0 = check_initial(kind, params, y0)
    if not np.isfinite(t_end):
        raise ValidationError("t_end must be finite")
    return integrate(make_rhs(kind, params), y0, t0, t_end, tol=tol,
                     names=STATE_NAMES[kind], monitor=make_monitor(kind, params), **kw)


# ------------------------------------------------------------------ energy
def kinetic_energy(kind, params: ParamSet, y):
    kind = SystemKind.parse(kind)
    y = np.asarray(y, float)
    if kind == SystemKind.TWO_D_SPECIAL:
        return (y[2] ** 2 + y[1] ** 2) / y[0]
    if kind == SystemKind.TWO_D_GENERAL:
        g = params.gamma
        dl = general_delta(y, g)
        w = dl ** ((g + 1) / 2)
        Gm = w * np.array([[y[0], y[2]], [y[2], y[1]]])
        A = np.array([[y[3], y[4]], [y[5], y[6]]])
        return float(np.trace(A @ Gm @ A.T))
    if kind == SystemKind.TWO_D_WITH_SHIFT:
        return shift_kinetic(y, params.M)
    if kind == SystemKind.THREE_D:
        return y[0] ** 2 / y[2] + y[1] ** 2 * params.H0
    if y[0] == 0:
        return 0.0      # at rest, including the vacuum line Gtilde = 0
    return y[0] ** 2 / y[1] if y[1] > 0 else np.inf


def potential_energy(kind, params: ParamSet, y):
    kind = SystemKind.parse(kind)
    y = np.asarray(y, float)
    g = params.gamma
    if kind == SystemKind.TWO_D_SPECIAL:
        return params.k("K", 1.0) * y[0] ** (g - 1)
    if kind == SystemKind.TWO_D_GENERAL:
        return 2 * params.k("K2", 1.0) / (g - 1) * general_delta(y, g) ** (-(g - 1) / 2)
    if kind == SystemKind.TWO_D_WITH_SHIFT:
        Gc = y[0] - (y[1] ** 2 + y[2] ** 2) / (2 * params.M)
        return params.k("K", 1.0) * Gc ** (1 - g)
    if kind == SystemKind.THREE_D:
        return params.k("Kt", 1.0) * y[2] ** (1.5 * (g - 1))
    return params.k("Ep", 1.0) * y[1] ** pressure_exponent(params)


def energy(kind, params: ParamSet, y):
    return kinetic_energy(kind, params, y) + potential_energy(kind, params, y)


def energy_rate(kind, params: ParamSet, y):
    """Model dissipation: the value dE/dt should take along a trajectory."""
    kind = SystemKind.parse(kind)
    ek = kinetic_energy(kind, params, y)
    if kind == SystemKind.DRY_FRICTION:
        return -params.mu * params.k("Ks", 1.0) * ek
    if kind == SystemKind.AERO_FRICTION:
        a, Gt = y
        return -params.mu1 * params.k("Ks", 1.0) * abs(a) / np.sqrt(Gt) * ek
    if kind == SystemKind.CONST_DIV:
        return 0.0
    return -2 * params.mu * ek


def energy_series(kind, params, traj: Trajectory, ts=None):
    ys = traj.states if ts is None else traj(ts)
    return np.array([energy(kind, params, y) for y in ys])


# ------------------------------------------------------ closed form (mu=0)
@dataclass
class ClosedForm:
    C1: float
    C2: float
    E0: float
    branch: int

    def beta(self, G1, l):
        return self.C1 * np.asarray(G1) + l / 2

    def alpha_sq(self, G1, l, gamma):
        G1 = np.asarray(G1, float)
        return (self.C2 * G1 ** gamma - self.C1 ** 2 * G1 ** 2
                + (self.E0 - l * self.C1) * G1 - l * l / 4)

    def alpha(self, G1, l, gamma):
        return self.branch * np.sqrt(np.maximum(self.alpha_sq(G1, l, gamma), 0.0))


def closed_form_mu0(params: ParamSet, y0, G1_values):
    """Quadrature solution of the planar special system without friction.

    Returns (alpha, beta, t) at the requested G1 values, valid on the first
    monotone stretch of G1 (alpha keeps its initial sign there).
    """
    if params.mu != 0:
        raise ValidationError("closed form requires mu = 0")
    G10, b0, a0 = map(float, y0)
    l, g = params.l, params.gamma
    if a0 == 0:
        raise ValidationError("closed form needs alpha(0) != 0 to fix the branch")
    E0 = energy(SystemKind.TWO_D_SPECIAL, params, y0)
    C1 = (2 * b0 - l) / (2 * G10)
    C2 = (a0 ** 2 + C1 ** 2 * G10 ** 2 - (E0 - l * C1) * G10 + l * l / 4) / G10 ** g
    cf = ClosedForm(C1, C2, E0, int(np.sign(a0)))
    G1v = np.atleast_1d(np.asarray(G1_values, float))
    al = cf.alpha(G1v, l, g)
    be = cf.beta(G1v, l)
    ts = np.empty_like(G1v)
    for i, G in enumerate(G1v):
        ts[i] = -quad(lambda s: 1.0 / (2 * s * cf.alpha(s, l, g)), G10, G,
                      epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return al, be, ts, cf


# --------------------------------------------------------------- equilibria
@dataclass
class Equilibrium:
    point: np.ndarray
    eigenvalues: np.ndarray
    tag: str            # stable | unstable | center | degenerate
    method: str = "linearization"

    def to_dict(self):
        ev = [[float(z.real), float(z.imag)] for z in self.eigenvalues]
        return {"point": [float(v) for v in self.point], "eigenvalues": ev,
                "tag": self.tag, "method": self.method}


def equilibrium_points(kind, params: ParamSet):
    kind = SystemKind.parse(kind)
    if kind in (SystemKind.CONST_DIV, SystemKind.AERO_FRICTION):
        return [np.zeros(2)]
    if kind == SystemKind.DRY_FRICTION:
        pts = [np.zeros(2)]
        a_star = -params.k("Ks", 1.0) * params.mu / 2
        if a_star != 0:
            pts.append(np.array([a_star, 0.0]))
        return pts
    if kind == SystemKind.TWO_D_SPECIAL:
        pts = [np.zeros(3)]
        if params.mu == 0 and params.l != 0:
            pts.append(np.array([0.0, params.l, 0.0]))
        return pts
    raise ValidationError(f"no equilibrium catalogue for {kind.value}")


def jacobian(f, y, positive_idx=(), h=1e-7):
    """FD Jacobian; one-sided (forward, 2nd order) in constrained components sitting at 0."""
    y = np.asarray(y, float)
    n = y.size
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        hj = h * max(1.0, abs(y[j]))
        e[j] = hj
        if j in positive_idx and y[j] - 2 * hj < 0:
            J[:, j] = (-3 * f(0, y) + 4 * f(0, y + e) - f(0, y + 2 * e)) / (2 * hj)
        else:
            J[:, j] = (f(0, y + e) - f(0, y - e)) / (2 * hj)
    return J


def _probe(kind, params, eq, eps=1e-3, t_end=1e4):
    """Classify a non-hyperbolic point by integrating small admissible perturbations."""
    names = STATE_NAMES[kind]
    pos = {names.index(c) for c in POSITIVE[kind]}
    n = len(names)
    starts = []
    free = [i for i in range(n) if i not in pos]
    base = eq.copy()
    for i in pos:
        base[i] = eq[i] + eps       # stay strictly inside the admissible region
    starts.append(base.copy())
    for i in free:
        for sgn in (1, -1):
            s = base.copy()
            s[i] += sgn * eps
            starts.append(s)
    ratios, excursions = [], []
    for s in starts:
        d0 = np.linalg.norm(s - eq)
        try:
            tr = run(kind, params, s, t_end, tol=1e-7)
        except NumericalEvent:
            excursions.append(np.inf)
            ratios.append(np.inf)
            continue
        dist = np.linalg.norm(tr.states - eq, axis=1)
        if tr.events:
            excursions.append(np.inf)
            ratios.append(np.inf)
            continue
        excursions.append(dist.max() / d0)
        ratios.append(dist[-1] / d0)
    ratios, excursions = np.array(ratios), np.array(excursions)
    if np.all(ratios < 0.5):
        return "stable"
    if np.any(excursions > 1e2):
        return "unstable"
    if np.all((ratios >= 0.5) & (ratios <= 2.0)):
        return "center"
    return "degenerate"


def equilibria(kind, params: ParamSet, probe=True):
    kind = SystemKind.parse(kind)
    f = make_rhs(kind, params)
    names = STATE_NAMES[kind]
    pos = tuple(names.index(c) for c in POSITIVE[kind])
    out = []
    for pt in equilibrium_points(kind, params):
        J = jacobian(f, pt, pos)
        if not np.all(np.isfinite(J)):
            ev = np.full(len(pt), np.nan + 0j)
        else:
            ev = np.linalg.eigvals(J)
        ev = ev[np.lexsort((ev.imag, ev.real))]
        re = ev.real
        if np.all(np.isfinite(re)) and np.all(re < -1e-9):
            out.append(Equilibrium(pt, ev, "stable"))
        elif np.any(re > 1e-9):
            out.append(Equilibrium(pt, ev, "unstable"))
        elif probe:
            out.append(Equilibrium(pt, ev, _probe(kind, params, pt), "probe"))
        else:
            out.append(Equilibrium(pt, ev, "degenerate"))
    return out


# ------------------------------------------------------------ asymptotics
@dataclass
class FitResult:
    prefactor: float
    exponent: float
    rate: float
    rms: float
    reliable: bool
    window: tuple

    def to_dict(self):
        return {"prefactor": self.prefactor, "exponent": self.exponent, "rate": self.rate,
                "rms": self.rms, "reliable": self.reliable, "window": list(self.window)}


def asymptotic_fit(traj: Trajectory, component, model="power", n_samples=64, window=None):
    """Least-squares fit of log|x| against log t on the last decade.

    model 'power':     x ~ C t^p
    model 'power_exp': x ~ C t^p exp(-q t)
    """
    if n_samples < 50:
        raise ValidationError("at least 50 samples are required")
    t_end = traj.t_final
    lo, hi = window or (t_end / 10, t_end)
    if lo <= 0:
        raise ValidationError("fit window must lie in t > 0")
    idx = traj.names.index(component) if isinstance(component, str) else int(component)
    ts = np.geomspace(lo, hi, n_samples)
    x = traj(ts)[:, idx]
    sgn = np.sign(x)
    reliable = bool(np.all(sgn == sgn[-1]) and np.all(x != 0))
    y = np.log(np.abs(np.where(x == 0, np.finfo(float).tiny, x)))
    cols = [np.ones_like(ts), np.log(ts)]
    if model == "power_exp":
        cols.append(-ts)
    elif model != "power":
        raise ValidationError(f"unknown model {model!r}")
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    if rms > 0.05:
        reliable = False
    rate = float(coef[2]) if model == "power_exp" else 0.0
    return FitResult(float(sgn[-1] * np.exp(coef[0])), float(coef[1]), rate, rms,
                     reliable, (float(lo), float(hi)))


# ---------------------------------------------------------------- portraits
@dataclass
class Portrait:
    kind: SystemKind
    seeds: list
    forward: list = field(default_factory=list)
    backward: list = field(default_factory=list)


def worker_count():
    try:
        n = int(os.environ.get("GASFLOW_THREADS", "1"))
    except ValueError:
        raise ValidationError("GASFLOW_THREADS must be an integer") from None
    return max(1, n)


def phase_portrait(kind, params: ParamSet, seeds, t_end, tol=1e-9):
    kind = SystemKind.parse(kind)
    seeds = [check_initial(kind, params, s) for s in seeds]

    def one(s):
        fw = run(kind, params, s, t_end, tol=tol, underflow_event=True)
        bw = run(kind, params, s, -t_end, tol=tol, underflow_event=True)
        return fw, bw

    with ThreadPoolExecutor(max_workers=worker_count()) as ex:
        res = list(ex.map(one, seeds))       # map preserves seed order
    return Portrait(kind, seeds, [r[0] for r in res], [r[1] for r in res])


def reflection_defect(portrait: Portrait, n_check=64):
    """Max deviation from the time-reversal symmetry (a, G, t) -> (-a, G, -t).

    For each seed (a, G) with a mirror seed (-a, G), the forward orbit of the
    first is compared with the reflected backward orbit of the second on
    their common time window. Returns (max deviation, number of pairs).
    """
    seeds = [np.asarray(s, float) for s in portrait.seeds]
    worst, pairs = 0.0, 0
    for i, s in enumerate(seeds):
        for j, m in enumerate(seeds):
            if not (m[0] == -s[0] and np.all(m[1:] == s[1:])):
                continue
            fw, bw = portrait.forward[i], portrait.backward[j]
            T = min(fw.t_final, -bw.t_final)
            if T <= 0:
                continue
            ts = np.linspace(0.0, T, n_check)
            a = fw(ts)
            b = bw(-ts)
            b[:, 0] = -b[:, 0]
            scale = np.maximum(1.0, np.abs(a))
            worst = max(worst, float(np.max(np.abs(a - b) / scale)))
            pairs += 1
    return worst, pairs
