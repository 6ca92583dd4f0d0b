"""Riemannian metrics on a planar chart.

A :class:`MetricField` evaluates ``g``, its Christoffel symbols and the Gauss
curvature at arrays of chart points. Every method is vectorised over leading
axes: a point array of shape ``(..., 2)`` yields results of shape ``(..., 2, 2)``
and so on.

Three kinds are supported:

* ``euclidean``: ``g = I``.
* ``conformal``: ``g = exp(2 lam) I`` for a scalar function ``lam``.
* ``general``: arbitrary coefficient functions ``g11, g12, g22``.

Derivatives of user-supplied coefficients default to 4th-order central
differences with step ``1e-4``; analytic derivatives can be passed instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConditioningError, DomainError

FD_STEP = 1e-4
DET_TOL = 1e-12

# 90 degree rotation in the plane.
_J = np.array([[0.0, -1.0], [1.0, 0.0]])


def _d1(f, x, y, axis, h=FD_STEP):
    """4th-order central first derivative of ``f(x, y)``."""
    if axis == 0:
        return (-f(x + 2 * h, y) + 8 * f(x + h, y) - 8 * f(x - h, y) + f(x - 2 * h, y)) / (12 * h)
    return (-f(x, y + 2 * h) + 8 * f(x, y + h) - 8 * f(x, y - h) + f(x, y - 2 * h)) / (12 * h)


def _d2(f, x, y, axes, h=FD_STEP):
    """4th-order central second derivative; ``axes`` is (0,0), (1,1) or (0,1)."""
    if axes == (0, 0):
        return (-f(x + 2 * h, y) + 16 * f(x + h, y) - 30 * f(x, y)
                + 16 * f(x - h, y) - f(x - 2 * h, y)) / (12 * h * h)
    if axes == (1, 1):
        return (-f(x, y + 2 * h) + 16 * f(x, y + h) - 30 * f(x, y)
                + 16 * f(x, y - h) - f(x, y - 2 * h)) / (12 * h * h)
    fy = lambda u, v: _d1(f, u, v, 1, h)
    return _d1(fy, x, y, 0, h)


def _const_like(v, x):
    return np.broadcast_to(np.asarray(v, dtype=float), np.shape(x)).astype(float)


@dataclass(frozen=True)
class MetricField:
    """A smooth SPD metric on an open rectangle of the plane.

    Parameters
    ----------
    kind : {'euclidean', 'conformal', 'general'}
    chart : tuple
        ``(xmin, xmax, ymin, ymax)`` of the open chart rectangle.
    lam, dlam, lap_lam : callable, optional
        Conformal factor ``lam(x, y)``; its gradient ``dlam(x, y) -> (lx, ly)``
        and Laplacian. Missing derivatives fall back to finite differences.
    coeffs : callable, optional
        ``coeffs(x, y) -> (g11, g12, g22)`` for the general kind.
    dcoeffs : callable, optional
        ``dcoeffs(x, y) -> array (3, 2, ...)`` of first derivatives
        ``d g_c / d x_i``.
    name : str
        Label used in reports.
    """

    kind: str
    chart: tuple = (-np.inf, np.inf, -np.inf, np.inf)
    lam: Optional[Callable] = None
    dlam: Optional[Callable] = None
    lap_lam: Optional[Callable] = None
    coeffs: Optional[Callable] = None
    dcoeffs: Optional[Callable] = None
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("euclidean", "conformal", "general"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "conformal" and self.lam is None:
            raise ValueError("conformal metric needs lam")
        if self.kind == "general" and self.coeffs is None:
            raise ValueError("general metric needs coeffs")

    # ------------------------------------------------------------------ chart
    def in_chart(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        x0, x1, y0, y1 = self.chart
        return (p[..., 0] > x0) & (p[..., 0] < x1) & (p[..., 1] > y0) & (p[..., 1] < y1)

    def _check(self, p):
        p = np.asarray(p, dtype=float)
        if not np.all(self.in_chart(p)):
            raise DomainError("point outside chart domain")
        return p

    # ----------------------------------------------------------- components
    def _components(self, x, y):
        if self.kind == "euclidean":
            one = np.ones_like(x)
            return one, np.zeros_like(x), one
        if self.kind == "conformal":
            e = np.exp(2.0 * self.lam(x, y))
            return e, np.zeros_like(x), e
        g11, g12, g22 = self.coeffs(x, y)
        return _const_like(g11, x), _const_like(g12, x), _const_like(g22, x)

    def _first(self, x, y):
        """First derivatives ``dg[c, i]`` for c in (11, 12, 22), i in (x, y)."""
        if self.kind == "euclidean":
            z = np.zeros_like(x)
            return np.array([[z, z], [z, z], [z, z]])
        if self.kind == "conformal":
            lx, ly = self._dlam(x, y)
            e = np.exp(2.0 * self.lam(x, y))
            z = np.zeros_like(x)
            return np.array([[2 * e * lx, 2 * e * ly], [z, z], [2 * e * lx, 2 * e * ly]])
        if self.dcoeffs is not None:
            return np.asarray(self.dcoeffs(x, y), dtype=float)
        out = []
        for c in range(3):
            fc = lambda u, v, c=c: _const_like(self.coeffs(u, v)[c], u)
            out.append([_d1(fc, x, y, 0), _d1(fc, x, y, 1)])
        return np.array(out)

    def _dlam(self, x, y):
        if self.dlam is not None:
            lx, ly = self.dlam(x, y)
            return _const_like(lx, x), _const_like(ly, x)
        f = lambda u, v: _const_like(self.lam(u, v), u)
        return _d1(f, x, y, 0), _d1(f, x, y, 1)

    def _lap_lam(self, x, y):
        if self.lap_lam is not None:
            return _const_like(self.lap_lam(x, y), x)
        f = lambda u, v: _const_like(self.lam(u, v), u)
        return _d2(f, x, y, (0, 0)) + _d2(f, x, y, (1, 1))

    # ------------------------------------------------------------ public API
    def metric_at(self, p) -> np.ndarray:
        """Metric matrix ``g(p)``, shape ``(..., 2, 2)``."""
        p = self._check(p)
        g11, g12, g22 = self._components(p[..., 0], p[..., 1])
        return np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)

    def christoffel(self, p) -> np.ndarray:
        """Christoffel symbols ``G[..., k, i, j]`` (symmetric in i, j)."""
        return self._christoffel(self._check(p))

    def _christoffel(self, p):
        x, y = p[..., 0], p[..., 1]
        if self.kind == "euclidean":
            return np.zeros(p.shape[:-1] + (2, 2, 2))
        if self.kind == "conformal":
            l = np.stack(self._dlam(x, y), -1)
            d = np.eye(2)
            # G^k_ij = d_ik l_j + d_jk l_i - d_ij l_k
            return (np.einsum("ik,...j->...kij", d, l) + np.einsum("jk,...i->...kij", d, l)
                    - np.einsum("ij,...k->...kij", d, l))
        g11, g12, g22 = self._components(x, y)
        g = np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)
        det = np.linalg.det(g)
        if np.any(det < DET_TOL):
            raise ConditioningError("metric nearly singular")
        ginv = np.linalg.inv(g)
        dg1 = self._first(x, y)  # (3, 2, ...)
        # dg[..., i, a, b] = d_i g_ab
        dg = np.empty(p.shape[:-1] + (2, 2, 2))
        for i in range(2):
            dg[..., i, 0, 0] = dg1[0, i]
            dg[..., i, 0, 1] = dg[..., i, 1, 0] = dg1[1, i]
            dg[..., i, 1, 1] = dg1[2, i]
        # Gamma_{l,ij} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
        low = 0.5 * (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg)
                     - np.einsum("...lij->...lij", dg))
        return np.einsum("...kl,...lij->...kij", ginv, low)

    def gauss_curvature(self, p) -> np.ndarray:
        """Gauss curvature. Conformal: ``-exp(-2 lam) Lap lam``; general: Brioschi."""
        p = self._check(p)
        x, y = p[..., 0], p[..., 1]
        if self.kind == "euclidean":
            return np.zeros(p.shape[:-1])
        if self.kind == "conformal":
            return -np.exp(-2.0 * self.lam(x, y)) * self._lap_lam(x, y)
        return self._brioschi(x, y)

    def _brioschi(self, x, y):
        E = lambda u, v: _const_like(self.coeffs(u, v)[0], u)
        F = lambda u, v: _const_like(self.coeffs(u, v)[1], u)
        G = lambda u, v: _const_like(self.coeffs(u, v)[2], u)
        e, f, g = E(x, y), F(x, y), G(x, y)
        det = e * g - f * f
        if np.any(det < DET_TOL):
            raise ConditioningError("metric nearly singular")
        Eu, Ev = _d1(E, x, y, 0), _d1(E, x, y, 1)
        Fu, Fv = _d1(F, x, y, 0), _d1(F, x, y, 1)
        Gu, Gv = _d1(G, x, y, 0), _d1(G, x, y, 1)
        Evv = _d2(E, x, y, (1, 1))
        Guu = _d2(G, x, y, (0, 0))
        Fuv = _d2(F, x, y, (0, 1))
        m1 = np.array([[-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev],
                       [Fv - 0.5 * Gu, e, f],
                       [0.5 * Gv, f, g]])
        m2 = np.array([[np.zeros_like(e), 0.5 * Ev, 0.5 * Gu],
                       [0.5 * Ev, e, f],
                       [0.5 * Gu, f, g]])
        d1 = np.linalg.det(np.moveaxis(m1, (0, 1), (-2, -1)))
        d2 = np.linalg.det(np.moveaxis(m2, (0, 1), (-2, -1)))
        return (d1 - d2) / det**2

    # ------------------------------------------------------- vector algebra
    def geodesic_acceleration(self, x, v) -> np.ndarray:
        """``-Gamma^k_ij v^i v^j`` at points ``x`` with velocities ``v``."""
        if self.kind == "euclidean":
            return np.zeros_like(v)
        if self.kind == "conformal":
            l = np.stack(self._dlam(x[..., 0], x[..., 1]), -1)
            lv = np.sum(l * v, -1, keepdims=True)
            vv = np.sum(v * v, -1, keepdims=True)
            return -(2.0 * lv * v - vv * l)
        G = self._christoffel(np.asarray(x, dtype=float))
        return -np.einsum("...kij,...i,...j->...k", G, v, v)

    def inner(self, p, u, v) -> np.ndarray:
        g = self.metric_at(p)
        return np.einsum("...i,...ij,...j->...", u, g, v)

    def norm(self, p, u) -> np.ndarray:
        return np.sqrt(self.inner(p, u, u))

    def normalize(self, p, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return u / self.norm(p, u)[..., None]

    def rot90(self, p, v) -> np.ndarray:
        """Rotate ``v`` by +90 degrees in the g-orthonormal sense.

        ``n = J g v / sqrt(det g)`` is g-orthogonal to ``v``, has the same
        g-length and ``(v, n)`` is positively oriented.
        """
        g = self.metric_at(p)
        det = np.linalg.det(g)
        gv = np.einsum("...ij,...j->...i", g, v)
        return np.einsum("ij,...j->...i", _J, gv) / np.sqrt(det)[..., None]

    def frame_vector(self, p, omega, nu, theta) -> np.ndarray:
        """Unit vector ``cos(theta) omega + sin(theta) nu`` in a g-orthonormal frame."""
        theta = np.asarray(theta, dtype=float)
        return np.cos(theta)[..., None] * omega + np.sin(theta)[..., None] * nu

    def angle_in_frame(self, p, u, omega, nu) -> np.ndarray:
        """Angle of ``u`` in the g-orthonormal frame ``(omega, nu)`` at ``p``."""
        return np.arctan2(self.inner(p, u, nu), self.inner(p, u, omega))

    def grad(self, p, dphi) -> np.ndarray:
        """Metric gradient ``g^{-1} dphi`` of a covector."""
        return np.linalg.solve(self.metric_at(p), np.asarray(dphi, dtype=float)[..., None])[..., 0]


def euclidean(chart=(-10.0, 10.0, -10.0, 10.0)) -> MetricField:
    return MetricField("euclidean", chart=tuple(chart), name="euclidean")


def poincare_disk(half_width=0.7) -> MetricField:
    """Poincare disk model ``g = 4/(1-|z|^2)^2 I`` on a square inside the unit disk."""
    if not 0 < half_width < np.sqrt(0.5):
        raise ValueError("chart square must lie inside the unit disk")

    def lam(x, y):
        return np.log(2.0) - np.log1p(-(x * x + y * y))

    def dlam(x, y):
        s = 1.0 - (x * x + y * y)
        return 2 * x / s, 2 * y / s

    def lap(x, y):
        s = 1.0 - (x * x + y * y)
        return 4.0 / (s * s)

    w = float(half_width)
    return MetricField("conformal", chart=(-w, w, -w, w), lam=lam, dlam=dlam, lap_lam=lap,
                       name="poincare")


def conformal(lam, chart, dlam=None, lap_lam=None, name="conformal") -> MetricField:
    return MetricField("conformal", chart=tuple(chart), lam=lam, dlam=dlam, lap_lam=lap_lam,
                       name=name)


def general(coeffs, chart, dcoeffs=None, name="general") -> MetricField:
    return MetricField("general", chart=tuple(chart), coeffs=coeffs, dcoeffs=dcoeffs, name=name)
