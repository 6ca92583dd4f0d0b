"""Planar domains with strictly convex boundary and convex foliations.

The boundary is given by a defining function ``rho`` (positive inside) and,
for closed curves, a periodic parametrisation ``s -> point(s)`` on ``[0, 1)``.
Curvature ``kappa`` and jerk ``j`` at a boundary point are the second and third
Taylor coefficients ``h''(0)``, ``h'''(0)`` of the boundary written as a graph
``y = h(x)`` in Riemannian normal coordinates adapted to ``(omega, nu)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar, newton
from shapely import contains_xy
from shapely.geometry import Polygon

from .errors import ConvexityError, DomainError, FoliationError
from .geodesic import DEFAULT_STEP, exp_map, shoot_many
from .metric import MetricField

KAPPA_TOL = 1e-8


def _fd_grad(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    return np.stack([(f(x + ex) - f(x - ex)) / (2 * h), (f(x + ey) - f(x - ey)) / (2 * h)], -1)


# ------------------------------------------------------------------ curves
class Boundary:
    """Boundary curve interface: ``rho``, ``grad_rho``, ``point``, ``param_of``."""

    closed = True
    scale = 1.0

    def rho(self, x):
        raise NotImplementedError

    def grad_rho(self, x):
        return _fd_grad(self.rho, x)

    def point(self, s):
        raise NotImplementedError

    def tangent(self, s, h=1e-6):
        return (self.point(np.asarray(s) + h) - self.point(np.asarray(s) - h)) / (2 * h)

    def param_of(self, p) -> float:
        raise NotImplementedError

    def sample(self, n):
        return self.point(np.arange(n) / n)


@dataclass
class Circle(Boundary):
    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        self.c = np.asarray(self.center, dtype=float)
        self.scale = 2.0 * self.radius

    def rho(self, x):
        d = np.asarray(x, dtype=float) - self.c
        return (self.radius**2 - np.sum(d * d, -1)) / (2 * self.radius)

    def grad_rho(self, x):
        return -(np.asarray(x, dtype=float) - self.c) / self.radius

    def point(self, s):
        a = 2 * np.pi * np.asarray(s, dtype=float)
        return self.c + self.radius * np.stack([np.cos(a), np.sin(a)], -1)

    def tangent(self, s):
        a = 2 * np.pi * np.asarray(s, dtype=float)
        return 2 * np.pi * self.radius * np.stack([-np.sin(a), np.cos(a)], -1)

    def param_of(self, p):
        d = np.asarray(p, dtype=float) - self.c
        return float(np.mod(np.arctan2(d[1], d[0]) / (2 * np.pi), 1.0))


@dataclass
class Ellipse(Boundary):
    a: float = 2.0
    b: float = 1.0
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        self.c = np.asarray(self.center, dtype=float)
        self.scale = 2.0 * max(self.a, self.b)

    def rho(self, x):
        d = np.asarray(x, dtype=float) - self.c
        return 0.5 * min(self.a, self.b) * (1.0 - (d[..., 0] / self.a) ** 2 - (d[..., 1] / self.b) ** 2)

    def grad_rho(self, x):
        d = np.asarray(x, dtype=float) - self.c
        k = min(self.a, self.b)
        return -k * np.stack([d[..., 0] / self.a**2, d[..., 1] / self.b**2], -1)

    def point(self, s):
        t = 2 * np.pi * np.asarray(s, dtype=float)
        return self.c + np.stack([self.a * np.cos(t), self.b * np.sin(t)], -1)

    def tangent(self, s):
        t = 2 * np.pi * np.asarray(s, dtype=float)
        return 2 * np.pi * np.stack([-self.a * np.sin(t), self.b * np.cos(t)], -1)

    def param_of(self, p):
        d = np.asarray(p, dtype=float) - self.c
        return float(np.mod(np.arctan2(d[1] / self.b, d[0] / self.a) / (2 * np.pi), 1.0))


class ImplicitCurve(Boundary):
    """Boundary known only through ``rho`` (optionally a parametrisation).

    Used for local, non-closed boundary pieces such as a graph near a point.
    """

    def __init__(self, rho, grad_rho=None, point=None, param_of=None, closed=False, scale=1.0):
        self._rho = rho
        self._grad = grad_rho
        self._point = point
        self._param_of = param_of
        self.closed = closed
        self.scale = scale

    def rho(self, x):
        return self._rho(np.asarray(x, dtype=float))

    def grad_rho(self, x):
        if self._grad is not None:
            return self._grad(np.asarray(x, dtype=float))
        return _fd_grad(self._rho, x)

    def point(self, s):
        if self._point is None:
            raise DomainError("boundary has no parametrisation")
        return self._point(np.asarray(s, dtype=float))

    def param_of(self, p):
        if self._param_of is None:
            raise DomainError("boundary has no parametrisation")
        return float(self._param_of(np.asarray(p, dtype=float)))


class SplineBoundary(Boundary):
    """Closed periodic cubic spline through control points.

    ``rho`` is a signed approximate distance from a closest-point projection.
    """

    def __init__(self, points):
        P = np.asarray(points, dtype=float)
        if np.allclose(P[0], P[-1]):
            P = P[:-1]
        P = np.vstack([P, P[:1]])
        seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
        u = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
        self._spl = CubicSpline(u, P, bc_type="periodic")
        self._dense_u = np.linspace(0.0, 1.0, 4001)[:-1]
        self._dense = self._spl(self._dense_u)
        self._poly = Polygon(self._dense)
        self.scale = float(np.max(np.ptp(self._dense, axis=0)))

    def point(self, s):
        return self._spl(np.mod(np.asarray(s, dtype=float), 1.0))

    def tangent(self, s):
        return self._spl(np.mod(np.asarray(s, dtype=float), 1.0), 1)

    def param_of(self, p):
        p = np.asarray(p, dtype=float)
        k = int(np.argmin(np.sum((self._dense - p) ** 2, -1)))
        u0 = self._dense_u[k]
        du = 1.0 / len(self._dense_u)
        res = minimize_scalar(lambda u: float(np.sum((self.point(u) - p) ** 2)),
                              bounds=(u0 - du, u0 + du), method="bounded",
                              options={"xatol": 1e-14})
        return float(np.mod(res.x, 1.0))

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        out = np.empty(len(flat))
        inside = contains_xy(self._poly, flat[:, 0], flat[:, 1])
        for i, q in enumerate(flat):
            u = self.param_of(q)
            d = float(np.linalg.norm(self.point(u) - q))
            out[i] = d if inside[i] else -d
        return out.reshape(x.shape[:-1])


# ---------------------------------------------------------------- domains
@dataclass
class DomainGeometry:
    """Domain ``{rho > 0}`` with a strictly convex foliation ``phi``.

    Parameters
    ----------
    metric : MetricField
    boundary : Boundary
    phi, dphi, hess_phi : callable, optional
        Foliation function of chart points, its coordinate gradient (shape
        ``(..., 2)``) and coordinate Hessian (shape ``(..., 2, 2)``).
    step : float
        Integration step for geodesics in this domain.
    """

    metric: MetricField
    boundary: Boundary
    phi: Optional[Callable] = None
    dphi: Optional[Callable] = None
    hess_phi: Optional[Callable] = None
    step: float = DEFAULT_STEP
    stop_margin: float = 0.02
    _frame_cache: dict = field(default_factory=dict, repr=False)

    @property
    def diameter(self) -> float:
        return float(self.boundary.scale)

    def rho(self, x):
        return self.boundary.rho(x)

    def inside(self, x, tol=0.0):
        return self.rho(x) >= -tol

    def stop(self, x):
        """Stop predicate for integration: well outside the domain."""
        return self.rho(x) < -self.stop_margin * self.diameter

    @property
    def phi_range(self):
        if self.phi is None or not self.boundary.closed:
            return (np.nan, np.nan)
        pts = self.boundary.sample(256)
        return float(np.min(self.phi(pts))), float(np.max(self.phi(pts)))

    def grad_phi(self, p):
        if self.dphi is not None:
            return np.asarray(self.dphi(np.asarray(p, dtype=float)), dtype=float)
        return _fd_grad(self.phi, p)

    def shoot_chords(self, P, V, length=None):
        """Shoot geodesics both ways until they leave the domain."""
        L = length if length is not None else 4.0 * self._metric_diameter()
        return shoot_many(self.metric, P, V, (-L, L), self.step, self.stop)

    def _metric_diameter(self):
        if "mdiam" not in self._frame_cache:
            if self.boundary.closed:
                pts = self.boundary.sample(64)
                g = self.metric.metric_at(pts)
                lam = np.sqrt(np.max(np.linalg.eigvalsh(g)))
                self._frame_cache["mdiam"] = float(lam * self.diameter)
            else:
                self._frame_cache["mdiam"] = float(self.diameter)
        return self._frame_cache["mdiam"]

    # ---------------------------------------------------------- frames
    def boundary_frame(self, p):
        """g-orthonormal ``(omega, nu)`` at a boundary point; ``nu`` points inward."""
        p = np.asarray(p, dtype=float)
        m = self.metric
        nu = m.normalize(p, m.grad(p, self.boundary.grad_rho(p)))
        omega = -m.rot90(p, nu)
        return omega, nu

    def level_frame(self, p):
        """Frame at a level-set point of ``phi``; ``nu = -grad phi`` (toward lower phi)."""
        p = np.asarray(p, dtype=float)
        m = self.metric
        gr = m.grad(p, self.grad_phi(p))
        if m.norm(p, gr) < 1e-12:
            raise DomainError("foliation gradient vanishes")
        nu = -m.normalize(p, gr)
        omega = -m.rot90(p, nu)
        return omega, nu

    def project_to_boundary(self, p, iters=50):
        """Newton projection of a nearby point onto ``rho = 0``."""
        q = np.asarray(p, dtype=float).copy()
        for _ in range(iters):
            r = float(self.rho(q))
            gr = self.boundary.grad_rho(q)
            dq = -r * gr / float(gr @ gr)
            q = q + dq
            if np.linalg.norm(dq) < 1e-15:
                break
        return q


# ------------------------------------------------------ normal coordinates
class NormalChart:
    """Riemannian normal coordinates at ``p`` in the g-orthonormal frame ``(omega, nu)``."""

    def __init__(self, metric: MetricField, p, omega, nu, step=DEFAULT_STEP):
        self.metric = metric
        self.p = np.asarray(p, dtype=float)
        self.E = np.column_stack([omega, nu])
        self.step = step

    def exp(self, coords):
        c = np.atleast_2d(np.asarray(coords, dtype=float))
        V = c @ self.E.T
        P = np.broadcast_to(self.p, V.shape)
        q, _ = exp_map(self.metric, P, V, min(self.step, 1e-3))
        return q

    def log(self, q, tol=1e-13, maxit=30):
        """Inverse of :meth:`exp` by Newton iteration (raises on divergence)."""
        q = np.asarray(q, dtype=float)
        c = np.linalg.solve(self.E, q - self.p)
        h = 1e-7
        probe = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h]], float)
        for _ in range(maxit):
            Q = self.exp(c + probe)
            f = Q[0] - q
            if np.linalg.norm(f) < tol:
                return c
            Jc = np.column_stack([(Q[1] - Q[2]) / (2 * h), (Q[3] - Q[4]) / (2 * h)])
            c = c + np.linalg.solve(Jc, -f)
            if not np.all(np.isfinite(c)) or np.linalg.norm(c) > 1e3:
                break
        f = self.exp(c)[0] - q
        if np.linalg.norm(f) < 1e3 * tol:
            return c
        raise DomainError("normal-coordinate inverse did not converge (outside injectivity range)")


def normal_coordinates(m: MetricField, p, omega=None, nu=None, step=DEFAULT_STEP) -> NormalChart:
    """Normal chart at ``p``; default frame is the g-orthonormalised coordinate frame."""
    p = np.asarray(p, dtype=float)
    if omega is None:
        omega = m.normalize(p, np.array([1.0, 0.0]))
        nu = m.rot90(p, omega)
    return NormalChart(m, p, np.asarray(omega, float), np.asarray(nu, float), step)


# ------------------------------------------------------ boundary Taylor data
def _graph(d: DomainGeometry, p, omega, nu, xs):
    """Solve ``rho(exp_p(x omega + y nu)) = 0`` for ``y`` at each ``x``."""
    chart = NormalChart(d.metric, p, omega, nu, d.step)
    xs = np.asarray(xs, dtype=float)

    def F(y):
        return d.rho(chart.exp(np.column_stack([xs, y])))

    y0 = np.zeros_like(xs)
    y = newton(F, y0, tol=1e-14, maxiter=60)
    return np.asarray(y)


def _taylor(d, p, omega, nu, w, deg=4, n=41):
    xs = w * np.cos(np.pi * (np.arange(n) + 0.5) / n)
    ys = _graph(d, p, omega, nu, xs)
    c = np.polynomial.polynomial.polyfit(xs / w, ys, deg)
    c = c / w ** np.arange(deg + 1)
    return c


@dataclass(frozen=True)
class BoundaryTaylor:
    kappa: float
    jerk: float
    window: float
    estimates: tuple


def boundary_taylor(d: DomainGeometry, p, omega=None, factors=(0.05, 0.1, 0.2)) -> BoundaryTaylor:
    """Curvature and jerk at a boundary point by degree-4 graph fits.

    The fit window is picked by a plateau test over ``factors * L`` with
    ``L`` the local feature scale ``1/kappa``.
    """
    p = np.asarray(p, dtype=float)
    if abs(float(d.rho(p))) > 1e-9 * max(1.0, d.diameter):
        raise DomainError("point is not on the boundary")
    om, nu = d.boundary_frame(p)
    if omega is not None:
        om = np.asarray(omega, dtype=float)
    c0 = _taylor(d, p, om, nu, factors[0] * d.diameter / 2)
    k0 = 2 * c0[2]
    if k0 <= KAPPA_TOL:
        raise ConvexityError(f"boundary curvature {k0:.3e} is not positive")
    L = min(d.diameter / 2, 1.0 / k0)
    est = []
    for f in factors:
        c = _taylor(d, p, om, nu, f * L)
        est.append((f * L, 2 * c[2], 6 * c[3]))
    # Plateau: choose the window whose estimate agrees best with its neighbour.
    dj = [abs(est[i][2] - est[i + 1][2]) for i in range(len(est) - 1)]
    i = int(np.argmin(dj))
    w, _, jerk = est[i]
    # Windows 1 and 2 differ by a factor 2; the kappa bias scales like w^4.
    kappa = (16.0 * est[0][1] - est[1][1]) / 15.0
    if kappa <= KAPPA_TOL:
        raise ConvexityError(f"boundary curvature {kappa:.3e} is not positive")
    return BoundaryTaylor(float(kappa), float(jerk), float(w), tuple(est))


def boundary_curvature(d: DomainGeometry, p) -> float:
    """Geodesic curvature ``kappa = h''(0)`` of the boundary at ``p``."""
    return boundary_taylor(d, p).kappa


def boundary_curvature_samples(d: DomainGeometry, n: int = 64, h: float = 1e-4) -> np.ndarray:
    """Geodesic curvature at ``n`` boundary samples from the covariant acceleration of the
    boundary parametrisation (positive when curving toward the interior)."""
    m = d.metric
    s = np.arange(n) / n
    x = d.boundary.point(s)
    d1 = (d.boundary.point(s + h) - d.boundary.point(s - h)) / (2 * h)
    d2 = (d.boundary.point(s + h) - 2 * x + d.boundary.point(s - h)) / h**2
    cov = d2 - m.geodesic_acceleration(x, d1)
    sp = m.norm(x, d1)
    nu = m.normalize(x, m.grad(x, d.boundary.grad_rho(x)))
    return np.asarray(m.inner(x, cov, nu) / sp**2, float)


def boundary_jerk(d: DomainGeometry, p, omega) -> float:
    """Jerk ``j = h'''(0)`` of the boundary at ``p`` along the unit tangent ``omega``."""
    return boundary_taylor(d, p, omega).jerk


# -------------------------------------------------------------- foliation
@dataclass
class FoliationReport:
    n_geodesics: int
    min_second_derivative: float
    max_critical_points: int
    per_geodesic_min: np.ndarray
    per_geodesic_crit: np.ndarray
    boundary_level_spread: float
    ok: bool
    offending: Optional[int] = None

    def to_dict(self):
        return {
            "n_geodesics": self.n_geodesics,
            "min_second_derivative": self.min_second_derivative,
            "max_critical_points": self.max_critical_points,
            "boundary_level_spread": self.boundary_level_spread,
            "ok": self.ok,
            "offending": self.offending,
        }


def geodesic_battery(d: DomainGeometry, n=200, seed=0):
    """Random boundary-to-boundary geodesics (random boundary point, inward direction)."""
    rng = np.random.default_rng(seed)
    s = rng.random(n)
    P = d.boundary.point(s)
    ang = rng.uniform(0.05, np.pi - 0.05, n)
    V = np.empty_like(P)
    for i in range(n):
        om, nu = d.boundary_frame(P[i])
        V[i] = np.cos(ang[i]) * om + np.sin(ang[i]) * nu
    return d.shoot_chords(P, V)


def foliation_report(d: DomainGeometry, battery=None, n=200, seed=0, tol=1e-10,
                     raise_on_violation=True) -> FoliationReport:
    """Check that ``phi`` is strictly convex along every geodesic of a battery.

    For each geodesic the second derivative of ``phi o gamma`` is
    ``Hess phi(v, v) + dphi . a`` (``a`` the coordinate acceleration); its
    minimum over the in-domain samples must be positive and ``d/dt phi o gamma``
    may change sign at most once.
    """
    if d.phi is None or d.hess_phi is None:
        raise FoliationError("domain has no foliation")
    if battery is None:
        battery = geodesic_battery(d, n, seed)
    mins, crits = [], []
    for tr in battery:
        ins = d.rho(tr.x) >= 0
        x, v, a = tr.x[ins], tr.v[ins], tr.a[ins]
        if len(x) < 3:
            mins.append(np.inf)
            crits.append(0)
            continue
        H = d.hess_phi(x)
        g = d.grad_phi(x)
        second = np.einsum("...i,...ij,...j->...", v, H, v) + np.sum(g * a, -1)
        first = np.sum(g * v, -1)
        sgn = np.sign(first)
        sgn = sgn[sgn != 0]
        crits.append(int(np.count_nonzero(np.diff(sgn))))
        mins.append(float(np.min(second)))
    mins = np.array(mins)
    crits = np.array(crits)
    spread = 0.0
    if d.boundary.closed:
        vals = d.phi(d.boundary.sample(256))
        spread = float(np.ptp(vals))
    bad = np.flatnonzero((mins <= tol) | (crits > 1))
    rep = FoliationReport(len(battery), float(np.min(mins)), int(np.max(crits)), mins, crits,
                          spread, bad.size == 0, int(bad[0]) if bad.size else None)
    if bad.size and raise_on_violation:
        raise FoliationError(
            f"foliation not strictly convex along geodesic {int(bad[0])} "
            f"(min second derivative {mins[bad[0]]:.3e}, {crits[bad[0]]} critical points)",
            report=rep, geodesic=int(bad[0]))
    return rep
