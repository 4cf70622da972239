"""Charts, Christoffel symbols and covariant derivatives of vector fields.

Index conventions
-----------------
``christoffel(chart, x)[k, i, j]`` is the connection coefficient with upper
index ``k`` and lower indices ``i, j`` (symmetric in ``i, j``).

``covariant_derivative(chart, field, x)[i, j]`` is the derivative of the
contravariant component ``i`` in the direction ``j``::

    nabla_j L^i = d L^i / d x^j + Gamma^i_{jk} L^k
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import OutsideDomainError, SingularChartError, ValidationError

H_GEO = 1e-5
H_FIELD = 1e-4
POLE_EPS = 1e-6


@dataclass(frozen=True)
class ChartMetric:
    dim: int
    metric: Callable[[np.ndarray], np.ndarray]
    lo: np.ndarray
    hi: np.ndarray
    kind: str = "custom"
    radius: float = 1.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValidationError(f"chart dimension must be 2 or 3, got {self.dim}")
        if self.kind not in ("euclidean", "sphere", "custom"):
            raise ValidationError(f"unknown chart kind {self.kind!r}")
        if self.kind == "sphere" and (self.dim != 2 or self.radius <= 0):
            raise ValidationError("sphere chart needs dim=2 and radius>0")
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))

    # constructors -------------------------------------------------------
    @classmethod
    def euclidean(cls, dim=2, lo=None, hi=None):
        lo = -np.inf * np.ones(dim) if lo is None else lo
        hi = np.inf * np.ones(dim) if hi is None else hi
        return cls(dim, lambda x: np.eye(dim), lo, hi, kind="euclidean")

    @classmethod
    def sphere(cls, radius=1.0, lo=(-np.pi, 0.0), hi=(np.pi, np.pi)):
        """Sphere of radius r in (longitude, colatitude) = (phi, theta)."""
        r2 = radius * radius

        def g(x):
            s = np.sin(x[1])
            return np.array([[r2 * s * s, 0.0], [0.0, r2]])

        return cls(2, g, lo, hi, kind="sphere", radius=radius)

    @classmethod
    def custom(cls, metric, dim, lo, hi, name=""):
        """Chart with a user metric. Only diagonal metrics are supported."""
        lo_a, hi_a = np.asarray(lo, float), np.asarray(hi, float)
        probe = np.where(np.isfinite(lo_a) & np.isfinite(hi_a), 0.5 * (lo_a + hi_a), 1.0)
        gm = np.asarray(metric(probe), dtype=float)
        if gm.shape != (dim, dim):
            raise ValidationError(f"metric returned shape {gm.shape}, expected {(dim, dim)}")
        off = gm - np.diag(np.diag(gm))
        if np.max(np.abs(off)) > 1e-14 * max(1.0, np.max(np.abs(gm))):
            raise ValidationError("custom charts must have a diagonal metric")
        return cls(dim, metric, lo_a, hi_a, kind="custom", name=name)

    # helpers ------------------------------------------------------------
    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValidationError(f"point has shape {x.shape}, chart dim is {self.dim}")
        if np.any(x < self.lo) or np.any(x > self.hi) or not np.all(np.isfinite(x)):
            raise OutsideDomainError(f"point {x.tolist()} outside chart domain")
        if self.kind == "sphere":
            th = x[1]
            if abs(th) < POLE_EPS or abs(th - np.pi) < POLE_EPS:
                raise SingularChartError(f"sphere chart is singular at theta={th!r}")
        return x

    def g(self, x) -> np.ndarray:
        return np.asarray(self.metric(np.asarray(x, float)), dtype=float)

    def g_inv(self, x) -> np.ndarray:
        return np.linalg.inv(self.g(x))

    def sqrt_det(self, x) -> float:
        return float(np.sqrt(np.linalg.det(self.g(x))))


def _step(x, k, base):
    return base * max(1.0, abs(x[k]))


def metric_derivatives(chart: ChartMetric, x) -> np.ndarray:
    """dg[l, i, j] = d g_ij / d x^l by central differences."""
    x = np.asarray(x, float)
    n = chart.dim
    dg = np.empty((n, n, n))
    for l in range(n):
        h = _step(x, l, H_GEO)
        e = np.zeros(n)
        e[l] = h
        dg[l] = (chart.g(x + e) - chart.g(x - e)) / (2 * h)
    return dg


def christoffel_from_metric(chart: ChartMetric, x) -> np.ndarray:
    """Levi-Civita connection from finite differences of the metric."""
    x = np.asarray(x, float)
    dg = metric_derivatives(chart, x)
    ginv = chart.g_inv(x)
    # lowered: Gamma_{l i j} = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
    low = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    return np.einsum("kl,lij->kij", ginv, low)


def christoffel(chart: ChartMetric, x) -> np.ndarray:
    x = chart.check(x)
    n = chart.dim
    if chart.kind == "euclidean":
        return np.zeros((n, n, n))
    if chart.kind == "sphere":
        th = x[1]
        s, c = np.sin(th), np.cos(th)
        gam = np.zeros((2, 2, 2))
        gam[1, 0, 0] = -s * c
        gam[0, 0, 1] = gam[0, 1, 0] = c / s
        return gam
    return christoffel_from_metric(chart, x)


def field_jacobian(field, x, h=H_FIELD) -> np.ndarray:
    """d L^i / d x^j, from ``field.jacobian`` if provided, else 4th-order FD."""
    jac = getattr(field, "jacobian", None)
    if jac is not None:
        return np.asarray(jac(np.asarray(x, float)), dtype=float)
    return fd_jacobian(field, x, h)


def fd_jacobian(f, x, h=H_FIELD) -> np.ndarray:
    x = np.asarray(x, float)
    n = x.size
    cols = []
    for j in range(n):
        hj = h * max(1.0, abs(x[j]))
        e = np.zeros(n)
        e[j] = hj
        d = (-np.asarray(f(x + 2 * e)) + 8 * np.asarray(f(x + e))
             - 8 * np.asarray(f(x - e)) + np.asarray(f(x - 2 * e))) / (12 * hj)
        cols.append(d)
    return np.stack(cols, axis=-1)


def covariant_derivative(chart: ChartMetric, field, x) -> np.ndarray:
    x = chart.check(x)
    lam = np.asarray(field(x), dtype=float)
    return field_jacobian(field, x) + np.einsum("ijk,k->ij", christoffel(chart, x), lam)


def divergence(chart: ChartMetric, field, x) -> float:
    return float(np.trace(covariant_derivative(chart, field, x)))


def discriminant(chart: ChartMetric, x, mixed=True) -> np.ndarray:
    """Area form with e_12 = +sqrt(det g); mixed form e^i_j = g^ik e_kj."""
    if chart.dim != 2:
        raise ValidationError("discriminant tensor is only defined for dim=2")
    x = chart.check(x)
    e = chart.sqrt_det(x) * np.array([[0.0, 1.0], [-1.0, 0.0]])
    return chart.g_inv(x) @ e if mixed else e
