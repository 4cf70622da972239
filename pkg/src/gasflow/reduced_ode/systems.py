"""Right-hand sides of the reduced moment systems.

The linear force in the plane is ``F = L V`` with ``L = -mu I + l J`` and
``J = [[0, 1], [-1, 0]]`` (the rotation that sends ``r`` to ``(y, -x)``).
Every planar system below uses that same convention.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict
from enum import Enum

import numpy as np

from ..errors import ValidationError

log = logging.getLogger(__name__)


class SystemKind(str, Enum):
    TWO_D_SPECIAL = "2d-special"
    TWO_D_GENERAL = "2d-general"
    TWO_D_WITH_SHIFT = "2d-shift"
    THREE_D = "3d"
    CONST_DIV = "const-div"
    DRY_FRICTION = "dry-friction"
    AERO_FRICTION = "aero-friction"

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        try:
            return cls(s)
        except ValueError:
            raise ValidationError(
                f"unknown system {s!r}; choose from {[k.value for k in cls]}") from None


STATE_NAMES = {
    SystemKind.TWO_D_SPECIAL: ("G1", "beta", "alpha"),
    SystemKind.TWO_D_GENERAL: ("G1", "G2", "G3", "a", "b", "c", "d"),
    SystemKind.TWO_D_WITH_SHIFT: ("G", "N1", "N2", "alpha", "beta", "b1", "b2"),
    SystemKind.THREE_D: ("alpha", "beta", "G1"),
    SystemKind.CONST_DIV: ("a", "Gtilde"),
    SystemKind.DRY_FRICTION: ("a", "Gtilde"),
    SystemKind.AERO_FRICTION: ("a", "Gtilde"),
}

# components that must stay positive (moments of inertia and the like)
POSITIVE = {
    SystemKind.TWO_D_SPECIAL: ("G1",),
    SystemKind.TWO_D_GENERAL: ("G1", "G2"),
    SystemKind.TWO_D_WITH_SHIFT: ("G",),
    SystemKind.THREE_D: ("G1",),
    SystemKind.CONST_DIV: ("Gtilde",),
    SystemKind.DRY_FRICTION: ("Gtilde",),
    SystemKind.AERO_FRICTION: ("Gtilde",),
}

SPACE_DIM = {
    SystemKind.TWO_D_SPECIAL: 2, SystemKind.TWO_D_GENERAL: 2,
    SystemKind.TWO_D_WITH_SHIFT: 2, SystemKind.THREE_D: 3,
}


@dataclass
class ParamSet:
    """Physical parameters shared by all systems.

    ``K`` holds the named constants: ``K`` (planar pressure constant,
    E_p = K G^(1-gamma)), ``K2`` (general planar system), ``Kt`` (3-d pressure
    constant), ``Ep`` (potential-energy coefficient of the constant
    divergence systems) and ``Ks`` (friction geometry constant).
    """
    gamma: float = 1.4
    l: float = 0.0
    mu: float = 0.0
    mu1: float = 0.0
    delta: float = 0.0
    D: float = 2.0
    M: float = 1.0
    H0: float = 1.0
    K: dict = field(default_factory=dict)

    def k(self, name, default=None):
        if name in self.K:
            return float(self.K[name])
        if default is None:
            raise ValidationError(f"missing constant {name!r}")
        return default

    def validate(self, kind: SystemKind, n=None):
        if not self.gamma > 1:
            raise ValidationError(f"gamma must be > 1, got {self.gamma}")
        n = n or SPACE_DIM.get(kind, 2)
        if self.gamma > 1 + 2 / n:
            log.warning("gamma=%g exceeds 1+2/n=%g", self.gamma, 1 + 2 / n)
        if self.mu < 0 or self.mu1 < 0:
            raise ValidationError("friction coefficients must be non-negative")
        if kind in (SystemKind.CONST_DIV, SystemKind.DRY_FRICTION, SystemKind.AERO_FRICTION):
            if self.D <= 0:
                raise ValidationError("constant-divergence systems need D > 0")
        if kind == SystemKind.TWO_D_WITH_SHIFT and self.M <= 0:
            raise ValidationError("mass M must be positive")
        return self

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------- planar
def rhs_2d_special(p: ParamSet):
    g, l, mu = p.gamma, p.l, p.mu
    K = p.k("K", 1.0)

    def f(t, y):
        G1, beta, alpha = y
        return np.array([
            -2 * alpha * G1,
            alpha * (l - 2 * beta) - mu * beta,
            -alpha ** 2 + beta ** 2 - l * beta - mu * alpha + (g - 1) * K * G1 ** g,
        ])
    return f


def rhs_2d_general(p: ParamSet):
    g, l, mu = p.gamma, p.l, p.mu
    K2 = p.k("K2", 1.0)

    def f(t, y):
        G1, G2, G3, a, b, c, d = y
        s = a + d
        return np.array([
            ((1 - g) * a - (1 + g) * d) * G1 + 2 * b * G3,
            ((1 - g) * d - (1 + g) * a) * G2 + 2 * c * G3,
            c * G1 + b * G2 - g * s * G3,
            -a * a - b * c + l * c - mu * a + K2 * G2,
            -b * s + l * d - mu * b - K2 * G3,
            -c * s - l * a - mu * c - K2 * G3,
            -d * d - b * c - l * b - mu * d + K2 * G1,
        ])
    return f


def general_delta(y, gamma):
    """Recover det of the inertia tensor from (G1, G2, G3): G1 G2 - G3^2 = Delta^-gamma."""
    G1, G2, G3 = y[0], y[1], y[2]
    return (G1 * G2 - G3 * G3) ** (-1.0 / gamma)


def shift_kinetic(y, M):
    G, N1, N2, al, be, b1, b2 = y
    return ((al * al + be * be) * G + b1 * (al * N1 + be * N2)
            + b2 * (al * N2 - be * N1) + 0.5 * (b1 * b1 + b2 * b2) * M)


def shift_matrix(y, M):
    G, N1, N2 = y[0], y[1], y[2]
    return np.array([
        [N1, N2, M, 0.0],
        [N2, -N1, 0.0, M],
        [2 * G, 0.0, N1, N2],
        [0.0, 2 * G, N2, -N1],
    ])


def shift_determinant(y, M):
    G, N1, N2 = y[0], y[1], y[2]
    return (2 * G * M - N1 * N1 - N2 * N2) ** 2


def rhs_2d_shift(p: ParamSet):
    """Planar flow with a spatially uniform shift b(t).

    Unknown rates (alpha', beta', b1', b2') come from the four linear
    relations obtained by differentiating the moments I and F and equating
    with their evolution laws.
    """
    g, l, mu, M = p.gamma, p.l, p.mu, p.M
    K = p.k("K", 1.0)

    def f(t, y):
        G, N1, N2, al, be, b1, b2 = y
        dG = 2 * al * G + b1 * N1 + b2 * N2
        dN1 = al * N1 + be * N2 + b1 * M
        dN2 = al * N2 - be * N1 + b2 * M
        I1, I2 = dN1, dN2
        F1 = dG
        F2 = 2 * be * G + b1 * N2 - b2 * N1
        Gc = G - (N1 * N1 + N2 * N2) / (2 * M)
        Ep = K * Gc ** (1 - g)
        Ek = shift_kinetic(y, M)
        rhs = np.array([
            -mu * I1 + l * I2 - (al * dN1 + be * dN2),
            -l * I1 - mu * I2 - (al * dN2 - be * dN1),
            2 * Ek + 2 * (g - 1) * Ep - mu * F1 - l * F2 - (2 * al * dG + b1 * dN1 + b2 * dN2),
            l * F1 - mu * F2 - (2 * be * dG + b1 * dN2 - b2 * dN1),
        ])
        rates = np.linalg.solve(shift_matrix(y, M), rhs)
        return np.array([dG, dN1, dN2, *rates])
    return f


# ---------------------------------------------------------------- 3-d
def rhs_3d(p: ParamSet):
    g, mu, dl, H0 = p.gamma, p.mu, p.delta, p.H0
    Kt = p.k("Kt", 1.0)
    e = (3 * g - 1) / 2

    def f(t, y):
        al, be, G1 = y
        return np.array([
            -al * al - mu * al + be * be * G1 * H0 - dl * be * G1 * H0
            + 1.5 * (g - 1) * Kt * G1 ** e,
            dl * al - mu * be,
            -2 * al * G1,
        ])
    return f


# ------------------------------------------------- constant divergence
def pressure_exponent(p: ParamSet):
    return (p.gamma - 1) * p.D / 2


def force_constant(p: ParamSet):
    # d/dt of the potential energy Ep*Gt^s balances a'*(...) when the
    # force coefficient is s*Ep
    return pressure_exponent(p) * p.k("Ep", 1.0)


def rhs_const_div(p: ParamSet):
    s = pressure_exponent(p)
    kf = force_constant(p)

    def f(t, y):
        a, Gt = y
        return np.array([-a * a + kf * Gt ** (s + 1), -2 * a * Gt])
    return f


def rhs_dry(p: ParamSet):
    s = pressure_exponent(p)
    kf = force_constant(p)
    fr = 0.5 * p.mu * p.k("Ks", 1.0)

    def f(t, y):
        a, Gt = y
        return np.array([-a * a - fr * a + kf * Gt ** (s + 1), -2 * a * Gt])
    return f


def rhs_aero(p: ParamSet):
    s = pressure_exponent(p)
    kf = force_constant(p)
    fr = 0.5 * p.mu1 * p.k("Ks", 1.0)

    def f(t, y):
        a, Gt = y
        if a == 0:
            drag = 0.0
        elif Gt > 0:
            drag = fr * a * abs(a) / np.sqrt(Gt)
        else:
            drag = np.copysign(np.inf, a)
        return np.array([-a * a - drag + kf * Gt ** (s + 1), -2 * a * Gt])
    return f


_RHS = {
    SystemKind.TWO_D_SPECIAL: rhs_2d_special,
    SystemKind.TWO_D_GENERAL: rhs_2d_general,
    SystemKind.TWO_D_WITH_SHIFT: rhs_2d_shift,
    SystemKind.THREE_D: rhs_3d,
    SystemKind.CONST_DIV: rhs_const_div,
    SystemKind.DRY_FRICTION: rhs_dry,
    SystemKind.AERO_FRICTION: rhs_aero,
}


def make_rhs(kind, params: ParamSet):
    kind = SystemKind.parse(kind)
    params.validate(kind)
    return _RHS[kind](params)


def make_monitor(kind, params: ParamSet):
    kind = SystemKind.parse(kind)
    names = STATE_NAMES[kind]
    pos = [names.index(c) for c in POSITIVE[kind]]
    # vacuum lines Gtilde = 0 are invariant, so only negative values are lost
    strict = kind not in (SystemKind.CONST_DIV, SystemKind.DRY_FRICTION, SystemKind.AERO_FRICTION)

    def monitor(t, y):
        for i in pos:
            if y[i] < 0 or (strict and y[i] == 0):
                return ("positivity_loss", f"{names[i]} = {y[i]:.6g}")
        if kind == SystemKind.TWO_D_GENERAL and y[0] * y[1] - y[2] ** 2 <= 0:
            return ("determinant_loss", "G1*G2 - G3^2 <= 0")
        if kind == SystemKind.TWO_D_WITH_SHIFT and 2 * y[0] * params.M - y[1] ** 2 - y[2] ** 2 <= 0:
            return ("determinant_loss", "2 G M - |N|^2 <= 0")
        return None
    return monitor


def check_initial(kind, params: ParamSet, y0):
    kind = SystemKind.parse(kind)
    names = STATE_NAMES[kind]
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (len(names),):
        raise ValidationError(f"{kind.value} expects state {names}, got {y0.size} values")
    if not np.all(np.isfinite(y0)):
        raise ValidationError("initial state must be finite")
    hit = make_monitor(kind, params)(0.0, y0)
    if hit:
        raise ValidationError(f"inadmissible initial state: {hit[1]}")
    return y0
