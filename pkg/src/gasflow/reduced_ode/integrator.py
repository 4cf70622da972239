"""Dormand-Prince 5(4) with a PI step-size controller and dense output.

Coefficients and the continuous extension follow Hairer, Norsett & Wanner,
*Solving ODEs I*, section II.5/II.6.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import StepSizeUnderflow, ValidationError

TOL_MIN, TOL_MAX = 1e-13, 1e-3
MAX_STEPS = 10_000_000
BLOWUP = 1e12

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                          -17253 / 339200, 22 / 525, -1 / 40)
D1, D3, D4, D5, D6, D7 = (-12715105075 / 11282082432, 87487479700 / 32700410799,
                          -10690763975 / 1880347072, 701980252875 / 199316789632,
                          -1453857185 / 822651844, 69997945 / 29380423)

# PI controller (Gustafsson): beta=0.04 as in Hairer's dopri5
BETA = 0.04
EXPO1 = 0.2 - 0.75 * BETA
SAFE, FACMIN, FACMAX = 0.9, 0.2, 10.0


@dataclass
class Event:
    kind: str      # blow_up | positivity_loss | determinant_loss
    t: float
    state: np.ndarray
    detail: str = ""

    def to_dict(self):
        return {"kind": self.kind, "t": self.t, "state": list(map(float, self.state)),
                "detail": self.detail}


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    names: tuple = ()
    events: list = field(default_factory=list)
    nfev: int = 0
    nreject: int = 0
    _dense: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @property
    def y_final(self) -> np.ndarray:
        return self.states[-1]

    def event(self, kind):
        for ev in self.events:
            if ev.kind == kind:
                return ev
        return None

    def __call__(self, t):
        """Dense output, 4th order, anywhere inside the integrated interval."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        ts = self.times
        forward = ts[-1] >= ts[0]
        lo, hi = (ts[0], ts[-1]) if forward else (ts[-1], ts[0])
        span = hi - lo
        if np.any(tt < lo - 1e-12 * span) or np.any(tt > hi + 1e-12 * span):
            raise ValidationError("dense output requested outside the integrated interval")
        if forward:
            idx = np.searchsorted(ts, tt, side="right") - 1
        else:
            idx = len(ts) - 1 - np.searchsorted(ts[::-1], tt, side="left")
        idx = np.clip(idx, 0, len(ts) - 2)
        h = ts[idx + 1] - ts[idx]
        th = (tt - ts[idx]) / h
        r = self._dense[idx]            # (m, 5, n)
        th = th[:, None]
        th1 = 1.0 - th
        out = r[:, 0] + th * (r[:, 1] + th1 * (r[:, 2] + th * (r[:, 3] + th1 * r[:, 4])))
        return out[0] if scalar else out

    def component(self, name):
        return self.states[:, self.names.index(name)]


def _norm(v, sc):
    return float(np.sqrt(np.mean((v / sc) ** 2)))


def _initial_step(f, t, y, f0, direction, tol, hmax):
    sc = tol + tol * np.abs(y)
    d0, d1 = _norm(y, sc), _norm(f0, sc)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, hmax)
    f1 = f(t + direction * h0, y + direction * h0 * f0)
    d2 = _norm(f1 - f0, sc) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, hmax)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: Sequence[float],
    t0: float,
    t1: float,
    tol: float = 1e-10,
    names: Sequence[str] = (),
    monitor: Optional[Callable[[float, np.ndarray], Optional[tuple]]] = None,
    blowup: float = BLOWUP,
    max_steps: int = MAX_STEPS,
    h_init: Optional[float] = None,
    underflow_event: bool = False,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` (either direction).

    ``atol = rtol = tol``. Backward runs integrate ``-rhs`` in the reversed
    time variable. ``monitor(t, y)`` may return ``(kind, detail)`` to stop the
    run with an event; a state larger than ``blowup`` records ``blow_up``.
    """
    if not (TOL_MIN <= tol <= TOL_MAX):
        raise ValidationError(f"tol must lie in [{TOL_MIN}, {TOL_MAX}], got {tol}")
    y = np.array(y0, dtype=float)
    if y.ndim != 1 or not np.all(np.isfinite(y)):
        raise ValidationError("initial state must be a finite 1-d vector")
    t0, t1 = float(t0), float(t1)
    direction = 1.0 if t1 >= t0 else -1.0
    length = abs(t1 - t0)
    traj = Trajectory(np.array([t0]), y[None, :].copy(), tuple(names))
    if length == 0.0:
        traj._dense = np.zeros((0, 5, y.size))
        return traj

    # tau = direction * (t - t0) runs forward; g is the rhs in tau
    def g(tau, yy):
        return direction * np.asarray(rhs(t0 + direction * tau, yy), dtype=float)

    nfev = 0
    times, states, dense = [t0], [y.copy()], []
    tau = 0.0
    k1 = g(tau, y)
    nfev += 1
    h = h_init if h_init else _initial_step(g, tau, y, k1, 1.0, tol, length)
    nfev += 1
    hmin = 1e-14 * max(length, abs(t1))
    err_old = 1e-4
    reject = False
    nrej = 0
    events = []

    for _ in range(max_steps):
        if tau >= length:
            break
        if tau + 1.01 * h >= length:
            h = length - tau
        if h < hmin:
            if underflow_event:
                events.append(Event("blow_up", t0 + direction * tau, y.copy(),
                                    f"step size underflow (h={h:.3e})"))
                break
            raise StepSizeUnderflow(
                f"step size {h:.3e} below {hmin:.3e} at t={t0 + direction * tau:.17g}; "
                "problem may be stiff or singular", t=t0 + direction * tau, h=h)
        k2 = g(tau + C2 * h, y + h * A21 * k1)
        k3 = g(tau + C3 * h, y + h * (A31 * k1 + A32 * k2))
        k4 = g(tau + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = g(tau + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = g(tau + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        ynew = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = g(tau + h, ynew)
        nfev += 6
        errv = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = tol + tol * np.maximum(np.abs(y), np.abs(ynew))
        err = _norm(errv, sc)
        if not np.isfinite(err):
            # non-finite stage (e.g. left the admissible region): shrink
            h *= FACMIN
            reject = True
            nrej += 1
            continue
        fac11 = max(err, 1e-300) ** EXPO1
        if err <= 1.0:
            fac = fac11 / err_old ** BETA
            fac = max(1.0 / FACMAX, min(1.0 / FACMIN, fac / SAFE))
            hnew = h / fac
            if reject:
                hnew = min(hnew, h)
            err_old = max(err, 1e-4)
            # dense output coefficients
            ydiff = ynew - y
            bspl = h * k1 - ydiff
            r = np.empty((5, y.size))
            r[0] = y
            r[1] = ydiff
            r[2] = bspl
            r[3] = ydiff - h * k7 - bspl
            r[4] = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
            dense.append(r)
            tau = tau + h if tau + h < length else length
            y = ynew
            k1 = k7
            t_now = t0 + direction * tau
            times.append(t_now)
            states.append(y.copy())
            reject = False
            h = hnew
            if np.max(np.abs(y)) > blowup:
                events.append(Event("blow_up", t_now, y.copy(),
                                    f"state magnitude exceeded {blowup:.3g}"))
                break
            if monitor is not None:
                hit = monitor(t_now, y)
                if hit:
                    events.append(Event(hit[0], t_now, y.copy(), hit[1] if len(hit) > 1 else ""))
                    break
        else:
            h = h / min(1.0 / FACMIN, fac11 / SAFE)
            reject = True
            nrej += 1
    else:
        raise StepSizeUnderflow(f"maximum number of steps ({max_steps}) exceeded")

    traj.times = np.array(times)
    traj.states = np.array(states)
    traj.events = events
    traj.nfev = nfev
    traj.nreject = nrej
    # dense coefficients are in the tau variable; r[1..4] are increments so
    # they are valid in t as well (theta is direction independent)
    traj._dense = np.array(dense) if dense else np.zeros((0, 5, y.size))
    return traj
