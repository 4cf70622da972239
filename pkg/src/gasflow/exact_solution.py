"""Full gas states for velocity fields with a linear profile V = A(t) x + b(t).

Given A and b, density and pressure are transported along the flow map:
the fundamental matrix X' = A X, its inverse Y' = -Y A and the shift
integral s' = Y b are integrated together with T' = tr A, and then

    rho(t, x) = exp(-T) rho0(Y x - s),     p(t, x) = exp(-gamma T) p0(Y x - s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import gammaln

from .errors import DegenerateFlowMap, ValidationError
from .reduced_ode.integrator import integrate
from .reduced_ode.systems import SystemKind

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])   # r -> r_perp = (y, -x)


def rotation_3d(omega):
    w1, w2, w3 = omega
    return np.array([[0.0, w3, -w2], [-w3, 0.0, w1], [w2, -w1, 0.0]])


# -------------------------------------------------------------- flow map
@dataclass
class FlowMap:
    """Dense fundamental matrix data on [t_lo, t_hi] (contains 0)."""
    n: int
    t_lo: float
    t_hi: float
    _fwd: object
    _bwd: object

    def _state(self, t):
        t = float(t)
        if t < self.t_lo - 1e-12 or t > self.t_hi + 1e-12:
            raise ValidationError(f"t={t} outside assembled range [{self.t_lo}, {self.t_hi}]")
        tr = self._fwd if t >= 0 or self._bwd is None else self._bwd
        if tr is None or tr.times.size == 1:
            return tr.states[0] if tr is not None else None
        return tr(t)

    def unpack(self, t):
        y = self._state(t)
        n = self.n
        X = y[: n * n].reshape(n, n)
        Y = y[n * n: 2 * n * n].reshape(n, n)
        s = y[2 * n * n: 2 * n * n + n]
        T = y[-1]
        return X, Y, s, T

    def X(self, t):
        return self.unpack(t)[0]

    def inverse(self, t):
        return self.unpack(t)[1]

    def det(self, t):
        return float(np.linalg.det(self.unpack(t)[0]))

    def consistency(self, t):
        """|| Y X - I || at time t: the built-in check of the joint integration."""
        X, Y, _, _ = self.unpack(t)
        return float(np.max(np.abs(Y @ X - np.eye(self.n))))


def _flow_rhs(A, b, n):
    nn = n * n

    def f(t, y):
        X = y[:nn].reshape(n, n)
        Y = y[nn: 2 * nn].reshape(n, n)
        At = np.asarray(A(t), float)
        bt = np.zeros(n) if b is None else np.asarray(b(t), float)
        return np.concatenate([(At @ X).ravel(), (-Y @ At).ravel(), Y @ bt, [np.trace(At)]])
    return f


def flow_map(A, b=None, t_hi=1.0, t_lo=0.0, n=None, tol=1e-12, det_tol=1e-12) -> FlowMap:
    if t_lo > 0 or t_hi < 0:
        raise ValidationError("assembled range must contain t=0")
    n = n or np.asarray(A(0.0)).shape[0]
    y0 = np.concatenate([np.eye(n).ravel(), np.eye(n).ravel(), np.zeros(n), [0.0]])
    rhs = _flow_rhs(A, b, n)
    fwd = integrate(rhs, y0, 0.0, t_hi, tol=tol)
    bwd = integrate(rhs, y0, 0.0, t_lo, tol=tol) if t_lo < 0 else None
    fm = FlowMap(n, t_lo, t_hi, fwd, bwd)
    for tr in (fwd, bwd):
        if tr is None:
            continue
        dets = [np.linalg.det(s[: n * n].reshape(n, n)) for s in tr.states]
        bad = [k for k, d in enumerate(dets) if d <= det_tol]
        if bad:
            raise DegenerateFlowMap(f"det X <= {det_tol:g} at t={tr.times[bad[0]]:.6g}")
    return fm


def fundamental_matrix(A, t, tol=1e-12, b=None, with_inverse=False):
    """X(t) for X' = A(tau) X, X(0) = I, and its determinant (optionally Y = X^-1)."""
    fm = flow_map(A, b, t_hi=max(t, 0.0), t_lo=min(t, 0.0), tol=tol)
    X, Y, _, _ = fm.unpack(t)
    out = (X, float(np.linalg.det(X)))
    return out + (Y,) if with_inverse else out


# ----------------------------------------------------------- coefficients
def coefficients_from_trajectory(traj, kind, omega=(0.0, 0.0, 1.0), alpha_scale=1.0):
    """(A(t), b(t)) from a reduced-ODE trajectory.

    ``alpha_scale`` multiplies the expansion rate (the diagonal part), which
    is how the negative controls are built.
    """
    scale = alpha_scale
    kind = SystemKind.parse(kind)
    names = traj.names

    def comp(t, name):
        return float(traj(t)[names.index(name)])

    if kind == SystemKind.TWO_D_SPECIAL:
        A = lambda t: scale * comp(t, "alpha") * np.eye(2) + comp(t, "beta") * ROT
        return A, None
    if kind == SystemKind.TWO_D_GENERAL:
        def A(t):
            y = traj(t)
            return np.array([[scale * y[3], y[4]], [y[5], scale * y[6]]])
        return A, None
    if kind == SystemKind.TWO_D_WITH_SHIFT:
        A = lambda t: scale * comp(t, "alpha") * np.eye(2) + comp(t, "beta") * ROT
        b = lambda t: np.array([comp(t, "b1"), comp(t, "b2")])
        return A, b
    if kind == SystemKind.THREE_D:
        W = rotation_3d(omega)
        # V = alpha r + beta [r x omega]
        A = lambda t: scale * comp(t, "alpha") * np.eye(3) + comp(t, "beta") * W
        return A, None
    raise ValidationError(f"{kind.value} does not define a linear velocity profile")


# --------------------------------------------------------------- solution
@dataclass
class GasSolution:
    A: Callable
    b: Optional[Callable]
    rho0: Callable
    p0: Callable
    gamma: float
    flow: FlowMap
    n: int

    @classmethod
    def assemble(cls, A, b, rho0, p0, gamma, t_range=(0.0, 1.0), tol=1e-12, n=None):
        if not gamma > 1:
            raise ValidationError("gamma must be > 1")
        n = n or np.asarray(A(0.0)).shape[0]
        fm = flow_map(A, b, t_hi=t_range[1], t_lo=t_range[0], n=n, tol=tol)
        probe = np.asarray(rho0(np.zeros((1, n))), float)
        if np.any(probe < 0):
            raise ValidationError("rho0 evaluates negative")
        return cls(A, b, rho0, p0, float(gamma), fm, n)

    def _pull(self, t, x):
        x = np.asarray(x, float)
        _, Y, s, T = self.flow.unpack(t)
        xi = x @ Y.T - s
        return xi, T

    def rho(self, t, x):
        xi, T = self._pull(t, x)
        r = math.exp(-T) * np.asarray(self.rho0(xi), float)
        if np.any(r < 0):
            raise ValidationError("rho0 evaluates negative")
        return r

    def p(self, t, x):
        xi, T = self._pull(t, x)
        return math.exp(-self.gamma * T) * np.asarray(self.p0(xi), float)

    def V(self, t, x):
        x = np.asarray(x, float)
        v = x @ np.asarray(self.A(t), float).T
        if self.b is not None:
            v = v + np.asarray(self.b(t), float)
        return v

    def S(self, t, x):
        """ln(p / rho^gamma); NaN where the density vanishes."""
        r = self.rho(t, x)
        pp = self.p(t, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(pp) - self.gamma * np.log(r)
        return np.where(r > 0, out, np.nan)

    def trace_integral(self, t):
        return float(self.flow.unpack(t)[3])


# ------------------------------------------------------------ initial data
def algebraic_moment(a, n, k=0):
    """Integral over R^n of |r|^k (1+|r|^2)^-a (finite for 2a > n + k)."""
    if not 2 * a > n + k:
        raise ValidationError("moment diverges")
    # polar: omega_{n-1} * int r^(n-1+k) (1+r^2)^-a dr = pi^(n/2) G((n+k)/2) G(a-(n+k)/2) / (G(n/2) G(a))
    lg = (0.5 * n * math.log(math.pi) + gammaln((n + k) / 2) + gammaln(a - (n + k) / 2)
          - gammaln(n / 2) - gammaln(a))
    return math.exp(lg)


def radial_quad(f, n):
    """Integral of a radial function over R^n (infrastructure, scipy quad)."""
    surf = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    val, _ = sp_integrate.quad(lambda r: f(r) * r ** (n - 1), 0, np.inf, epsabs=0, epsrel=1e-13, limit=400)
    return surf * val


@dataclass
class InitialData:
    family: str
    rho0: Callable
    p0: Callable
    gamma: float
    n: int
    grad_p0: Optional[Callable] = None
    a: Optional[float] = None
    G1_0: Optional[float] = None
    Ep_0: Optional[float] = None
    kappa: Optional[float] = None           # radial compatibility constant
    moments: dict = field(default_factory=dict)

    def entropy0(self, x):
        """Initial entropy normalized so that S0(0) = 0."""
        if self.family == "algebraic":
            r2 = np.sum(np.asarray(x, float) ** 2, axis=-1)
            return (self.a * (self.gamma - 1) + self.gamma) * np.log1p(r2)
        x = np.asarray(x, float)
        z = np.zeros(x.shape[-1])
        s = lambda y: np.log(self.p0(y)) - self.gamma * np.log(self.rho0(y))
        return s(x) - s(z[None, :])[0]

    def descriptor(self):
        return {"family": self.family, "a": self.a, "gamma": self.gamma, "n": self.n,
                "G1_0": self.G1_0, "Ep_0": self.Ep_0, "kappa": self.kappa,
                "moments": self.moments}


def algebraic_initial_data(a, gamma, G1_0=1.0, Ep_0=None, n=2) -> InitialData:
    """p0 = (1+|r|^2)^-a and rho0 = (2a/kappa)(1+|r|^2)^-(a+1), kappa = (n/2)(gamma-1) G1(0) Ep(0).

    ``Ep_0`` defaults to the quadrature value of int p0/(gamma-1); the
    moments are then recomputed from rho0 to close the fixed point
    (``moments['G1_from_rho0']`` should reproduce ``G1_0``).
    """
    if not a > 3:
        raise ValidationError(f"a must be > 3, got {a}")
    if not gamma > 1:
        raise ValidationError("gamma must be > 1")
    if n not in (2, 3):
        raise ValidationError("n must be 2 or 3")
    if not G1_0 > 0:
        raise ValidationError("G1_0 must be positive")
    Ep_quad = radial_quad(lambda r: (1 + r * r) ** (-a), n) / (gamma - 1)
    Ep = Ep_quad if Ep_0 is None else float(Ep_0)
    kappa = 0.5 * n * (gamma - 1) * G1_0 * Ep
    c = 2 * a / kappa

    def p0(x):
        return (1 + np.sum(np.asarray(x, float) ** 2, axis=-1)) ** (-a)

    def rho0(x):
        return c * (1 + np.sum(np.asarray(x, float) ** 2, axis=-1)) ** (-a - 1)

    def grad_p0(x):
        x = np.asarray(x, float)
        q = 1 + np.sum(x * x, axis=-1)
        return (-2 * a * q ** (-a - 1))[..., None] * x

    G0 = 0.5 * c * radial_quad(lambda r: r * r * (1 + r * r) ** (-a - 1), n)
    mass = c * radial_quad(lambda r: (1 + r * r) ** (-a - 1), n)
    moments = {"M": mass, "G": G0, "Ep": Ep_quad, "G1_from_rho0": 1.0 / G0,
               "fixed_point_residual": abs(1.0 / G0 - G1_0) / G1_0,
               "Ep_residual": abs(Ep - Ep_quad) / Ep_quad}
    return InitialData("algebraic", rho0, p0, float(gamma), n, grad_p0, float(a),
                       float(G1_0), Ep, kappa, moments)


def custom_initial_data(rho0, p0, gamma, n=2, grad_p0=None) -> InitialData:
    return InitialData("custom", rho0, p0, float(gamma), n, grad_p0)


def ode_constant_K(data: InitialData):
    """Pressure constant K of the planar reduced systems, Ep = K G^(1-gamma)."""
    return data.Ep_0 * data.G1_0 ** (1 - data.gamma)


# ----------------------------------------------------------- compatibility
def _grad(f, x, h=1e-5):
    x = np.asarray(x, float)
    out = np.empty_like(x)
    for j in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[j] = h
        out[..., j] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)
    return out


@dataclass
class CompatReport:
    mode: str
    max_residual: float
    rms_residual: float
    n_points: int
    n_excluded: int
    fit: dict = field(default_factory=dict)

    def to_dict(self):
        return {"mode": self.mode, "max_residual": self.max_residual,
                "rms_residual": self.rms_residual, "n_points": self.n_points,
                "n_excluded": self.n_excluded, "fit": self.fit}


def compat_residual(data: InitialData, points, mode="radial", field=None, forcing=None, kappa=None):
    """Residual of the compatibility condition between p0 and rho0 on ``points``.

    radial:  grad p0 + kappa rho0 x
    affine:  least-squares fit of grad p0 / rho0 to C x + c0
    forced:  grad p0 - phi rho0 (L - F), phi a single fitted constant; ``field``
             gives L(x) and ``forcing`` F(x) (defaults to 0)
    """
    pts = np.atleast_2d(np.asarray(points, float))
    rho = np.asarray(data.rho0(pts), float)
    gp = data.grad_p0(pts) if data.grad_p0 is not None else _grad(data.p0, pts)
    keep = rho > 0
    excluded = int(np.sum(~keep))
    pts, rho, gp = pts[keep], rho[keep], gp[keep]
    if mode == "radial":
        k = data.kappa if kappa is None else kappa
        if k is None:
            raise ValidationError("radial mode needs the compatibility constant")
        res = np.linalg.norm(gp + k * rho[:, None] * pts, axis=1)
        fit = {"kappa": k}
    elif mode == "affine":
        n = pts.shape[1]
        g = gp / rho[:, None]
        design = np.hstack([pts, np.ones((len(pts), 1))])
        coef, *_ = np.linalg.lstsq(design, g, rcond=None)
        C = coef[:n].T
        c0 = coef[n]
        res = np.linalg.norm(g - design @ coef, axis=1)
        fit = {"C": C.tolist(), "c0": c0.tolist()}
    elif mode == "forced":
        if field is None:
            raise ValidationError("forced mode needs the spatial field")
        L = np.array([field(x) for x in pts])
        F = np.zeros_like(L) if forcing is None else np.array([forcing(x) for x in pts])
        w = rho[:, None] * (L - F)
        phi = float(np.sum(w * gp) / np.sum(w * w))
        res = np.linalg.norm(gp - phi * w, axis=1)
        fit = {"phi": phi}
    else:
        raise ValidationError(f"unknown compatibility mode {mode!r}")
    return CompatReport(mode, float(np.max(res)) if res.size else 0.0,
                        float(np.sqrt(np.mean(res ** 2))) if res.size else 0.0,
                        int(len(pts)), excluded, fit)


# ------------------------------------------------------------------ misc
def makino_kappa(gamma):
    return 2 * math.sqrt(gamma) / (gamma - 1)


def makino_variable(p, gamma):
    p = np.asarray(p, float)
    if np.any(p < 0):
        raise ValidationError("pressure must be non-negative")
    return makino_kappa(gamma) * p ** ((gamma - 1) / (2 * gamma))


def makino_inverse(Pi, gamma):
    Pi = np.asarray(Pi, float)
    return (Pi / makino_kappa(gamma)) ** (2 * gamma / (gamma - 1))


def corollary_feasible_params(mu, delta, gamma, n=2, grid=400):
    """Scan (q, eps) in (0, qbar) x (1, 4] for the interior-solution inequalities.

    q < 1, eps >= 1/(1-q), eps <= (gamma-1) n/(2q), eps*delta > 1, and eps <= 2 if mu = 0.
    The witness is the grid point with the largest minimal slack.
    """
    if not gamma > 1:
        raise ValidationError("gamma must be > 1")
    if n not in (2, 3):
        raise ValidationError("n must be 2 or 3")
    if mu < 0 or not delta > 0:
        raise ValidationError("need mu >= 0 and delta > 0")
    k = n * (gamma - 1)
    qbar = min(delta * k / 2, k / (2 + k))
    qs = qbar * (np.arange(1, grid + 1) - 0.5) / grid
    es = 1 + 3 * np.arange(1, grid + 1) / grid
    Q, E = np.meshgrid(qs, es, indexing="ij")
    slack = np.stack([
        1 - Q,
        E - 1 / (1 - Q),
        k / (2 * Q) - E,
        E * delta - 1,
        (2 - E) if mu == 0 else np.full_like(E, np.inf),
    ])
    ok = (slack[0] > 0) & (slack[1] >= 0) & (slack[2] >= 0) & (slack[3] > 0) & (slack[4] >= 0)
    out = {"mu": mu, "delta": delta, "gamma": gamma, "n": n, "qbar": qbar,
           "n_feasible": int(ok.sum()), "grid": grid, "feasible": bool(ok.any()), "witness": None}
    if ok.any():
        score = np.where(ok, np.min(np.where(np.isfinite(slack), slack, 1e300), axis=0), -np.inf)
        i, j = np.unravel_index(np.argmax(score), score.shape)
        out["witness"] = {"q": float(Q[i, j]), "eps": float(E[i, j])}
        out["eps_range"] = [float(E[ok].min()), float(E[ok].max())]
        out["q_range"] = [float(Q[ok].min()), float(Q[ok].max())]
    return out
