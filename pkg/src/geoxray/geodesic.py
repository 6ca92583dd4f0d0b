"""Geodesics, Jacobi fields, parallel transport and hitting times.

Geodesics are integrated with fixed-step classical RK4 in the chart and
stored as :class:`GeodesicTrace` objects with cubic Hermite dense output.
Euclidean metrics take an exact straight-line path.

Jacobi fields use the scalar decomposition available in dimension two::

    J(t) = (alpha + beta t) gdot(t) + j(t) n(t),      j'' + K(gamma(t)) j = 0

where ``n`` is the g-rotation of ``gdot`` by +90 degrees (parallel along a
geodesic).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import ConjugacyError, DomainError
from .metric import MetricField

DEFAULT_STEP = 2e-3


# ---------------------------------------------------------------- Hermite
def _hermite(t, tk, y, dy):
    """Cubic Hermite interpolation of samples ``y`` with derivatives ``dy``."""
    t = np.asarray(t, dtype=float)
    n = len(tk)
    if t.size == 1 and y.ndim == 2:
        return _hermite_point(float(t.reshape(-1)[0]), tk, y, dy).reshape(t.shape + (2,))
    k = np.clip(np.searchsorted(tk, t, side="right") - 1, 0, n - 2)
    h = tk[k + 1] - tk[k]
    s = ((t - tk[k]) / h)[..., None] if y.ndim == 2 else (t - tk[k]) / h
    hh = h[..., None] if y.ndim == 2 else h
    s2, s3 = s * s, s * s * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * y[k] + h10 * hh * dy[k] + h01 * y[k + 1] + h11 * hh * dy[k + 1]


def _hermite_point(t, tk, y, dy):
    """Scalar-time fast path of :func:`_hermite` for vector samples."""
    k = min(max(bisect.bisect_right(tk, t) - 1, 0), len(tk) - 2)
    t0, t1 = tk[k], tk[k + 1]
    h = t1 - t0
    s = (t - t0) / h
    s2 = s * s
    s3 = s2 * s
    c = np.array([2 * s3 - 3 * s2 + 1, (s3 - 2 * s2 + s) * h, -2 * s3 + 3 * s2, (s3 - s2) * h])
    return c @ np.array([y[k], dy[k], y[k + 1], dy[k + 1]])


# ------------------------------------------------------------------ traces
@dataclass(frozen=True)
class GeodesicTrace:
    """Sampled geodesic with dense output.

    Attributes
    ----------
    t : ndarray (n,)
        Strictly increasing sample times; ``t = 0`` is the initial point.
    x, v, a : ndarray (n, 2)
        Positions, velocities and accelerations at the samples.
    step : float
        Integration step.
    exit_lo, exit_hi : bool
        True when the corresponding end was truncated by leaving the chart.
    """

    metric: MetricField
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    step: float
    exit_lo: bool = False
    exit_hi: bool = False

    @property
    def t_range(self):
        return float(self.t[0]), float(self.t[-1])

    def position(self, t):
        return _hermite(t, self.t, self.x, self.v)

    def velocity(self, t):
        return _hermite(t, self.t, self.v, self.a)

    def __call__(self, t):
        return self.position(t)

    def normal(self, t):
        """Unit g-normal ``n = rot90(gdot)`` at time ``t``."""
        p = self.position(t)
        return self.metric.rot90(p, self.velocity(t))

    def speed_drift(self) -> float:
        return float(np.max(np.abs(self.metric.norm(self.x, self.v) - 1.0)))

    def to_csv(self, path):
        data = np.column_stack([self.t, self.x, self.v])
        np.savetxt(path, data, delimiter=",", header="t,x,y,vx,vy", comments="")


# -------------------------------------------------------------- integrator
def _accel(m: MetricField, x, v):
    with np.errstate(all="ignore"):
        return m.geodesic_acceleration(x, v)


def _integrate(m: MetricField, x0, v0, h, nsteps, stop=None):
    """Batched RK4 for ``x'' = -Gamma(x', x')``.

    Returns positions, velocities, accelerations of shape (nsteps+1, B, 2),
    the number of valid samples per geodesic and a chart-exit flag.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    v0 = np.atleast_2d(np.asarray(v0, dtype=float))
    B = x0.shape[0]
    X = np.empty((nsteps + 1, B, 2))
    V = np.empty_like(X)
    A = np.empty_like(X)
    X[0], V[0] = x0, v0
    A[0] = _accel(m, x0, v0)
    count = np.full(B, nsteps + 1)
    chart_exit = np.zeros(B, dtype=bool)
    alive = np.ones(B, dtype=bool)
    if m.kind == "euclidean":
        tt = h * np.arange(nsteps + 1)
        X[:] = x0[None] + tt[:, None, None] * v0[None]
        V[:] = v0[None]
        A[:] = 0.0
        bad = ~m.in_chart(X)
        if stop is not None:
            bad |= stop(X.reshape(-1, 2)).reshape(nsteps + 1, B)
        for b in range(B):
            idx = np.flatnonzero(bad[1:, b])
            if idx.size:
                k = idx[0] + 1
                if not m.in_chart(X[k, b]):
                    chart_exit[b] = True
                    count[b] = k
                else:
                    count[b] = k + 1
        return X, V, A, count, chart_exit
    x, v, a = x0.copy(), v0.copy(), A[0].copy()
    for n in range(nsteps):
        k1x, k1v = v, a
        k2x = v + 0.5 * h * k1v
        k2v = _accel(m, x + 0.5 * h * k1x, k2x)
        k3x = v + 0.5 * h * k2v
        k3v = _accel(m, x + 0.5 * h * k2x, k3x)
        k4x = v + h * k3v
        k4v = _accel(m, x + h * k3x, k4x)
        xn = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        an = _accel(m, xn, vn)
        ok = m.in_chart(xn) & np.all(np.isfinite(xn), -1) & np.all(np.isfinite(an), -1)
        newly_out = alive & ~ok
        chart_exit |= newly_out
        count[newly_out] = n + 1
        alive &= ok
        X[n + 1] = np.where(alive[:, None], xn, X[n])
        V[n + 1] = np.where(alive[:, None], vn, V[n])
        A[n + 1] = np.where(alive[:, None], an, A[n])
        if stop is not None:
            hit = alive & stop(xn)
            count[hit] = n + 2
            alive &= ~hit
        if not alive.any():
            break
        x, v, a = X[n + 1], V[n + 1], A[n + 1]
    return X, V, A, count, chart_exit


def _nsteps(t_end, h):
    return max(1, int(math.ceil(abs(t_end) / h - 1e-9)))


def shoot_many(m: MetricField, P, Vel, t_range=(0.0, 4.0), step=DEFAULT_STEP,
               stop: Optional[Callable] = None, normalize=True):
    """Shoot a batch of geodesics; returns a list of :class:`GeodesicTrace`.

    ``stop(x) -> bool mask`` truncates each direction one sample after it
    first returns True (so the crossing is bracketed).
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Vel = np.atleast_2d(np.asarray(Vel, dtype=float))
    if not np.all(m.in_chart(P)):
        raise DomainError("initial point outside chart")
    if normalize:
        Vel = m.normalize(P, Vel)
    a, b = t_range
    h = float(step)
    B = P.shape[0]
    fwd = bwd = None
    if b > 0:
        fwd = _integrate(m, P, Vel, h, _nsteps(b, h), stop)
    if a < 0:
        bwd = _integrate(m, P, -Vel, h, _nsteps(a, h), stop)
    traces = []
    for i in range(B):
        ts, xs, vs, acs = [], [], [], []
        lo_exit = hi_exit = False
        if bwd is not None:
            X, V, A, cnt, ce = bwd
            c = cnt[i]
            ts.append(-h * np.arange(c - 1, 0, -1))
            xs.append(X[c - 1:0:-1, i])
            vs.append(-V[c - 1:0:-1, i])
            acs.append(A[c - 1:0:-1, i])
            lo_exit = bool(ce[i])
        if fwd is not None:
            X, V, A, cnt, ce = fwd
            c = cnt[i]
            ts.append(h * np.arange(c))
            xs.append(X[:c, i])
            vs.append(V[:c, i])
            acs.append(A[:c, i])
            hi_exit = bool(ce[i])
        else:
            ts.append(np.zeros(1))
            xs.append(P[i:i + 1])
            vs.append(Vel[i:i + 1])
            acs.append(_accel(m, P[i:i + 1], Vel[i:i + 1]))
        t = np.concatenate(ts)
        if t.size < 2:
            raise DomainError("geodesic leaves the chart immediately")
        traces.append(GeodesicTrace(m, t, np.concatenate(xs), np.concatenate(vs),
                                    np.concatenate(acs), h, lo_exit, hi_exit))
    return traces


def shoot(m: MetricField, p, v, t_range=(0.0, 1.0), step=DEFAULT_STEP, stop=None) -> GeodesicTrace:
    """Integrate the unit-speed geodesic with ``gamma(0) = p``, ``gamma'(0) = v``.

    ``v`` is normalised to unit g-length. If the chart is left the trace is
    truncated and ``exit_lo`` / ``exit_hi`` is set.
    """
    return shoot_many(m, [p], [v], t_range, step, stop)[0]


def exp_map(m: MetricField, P, V, step=DEFAULT_STEP):
    """Exponential map ``exp_P(V)`` (batched); returns endpoints and end velocities."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if m.kind == "euclidean":
        return P + V, V.copy()
    speed = np.max(m.norm(P, V)) if len(P) else 0.0
    n = max(8, int(math.ceil(speed / step)))
    X, Vv, _, cnt, ce = _integrate(m, P, V, 1.0 / n, n)
    if np.any(ce):
        raise DomainError("exponential map leaves the chart")
    return X[-1], Vv[-1]


# ------------------------------------------------------------ Jacobi fields
@dataclass(frozen=True)
class JacobiTrace:
    """Jacobi field along a trace in scalar form ``(alpha + beta t) gdot + j n``."""

    along: GeodesicTrace
    alpha: float
    beta: float
    j: np.ndarray
    dj: np.ndarray
    ddj: np.ndarray

    def normal_part(self, t):
        return _hermite(t, self.along.t, self.j, self.dj)

    def normal_part_derivative(self, t):
        return _hermite(t, self.along.t, self.dj, self.ddj)

    def J(self, t):
        t = np.asarray(t, dtype=float)
        tr = self.along
        tang = (self.alpha + self.beta * t)[..., None]
        return tang * tr.velocity(t) + self.normal_part(t)[..., None] * tr.normal(t)

    def DJ(self, t):
        t = np.asarray(t, dtype=float)
        tr = self.along
        return self.beta * tr.velocity(t) + self.normal_part_derivative(t)[..., None] * tr.normal(t)

    @property
    def J_samples(self):
        return self.J(self.along.t)

    @property
    def DJ_samples(self):
        return self.DJ(self.along.t)


def _scalar_jacobi(trace: GeodesicTrace, j0, dj0):
    """Integrate ``j'' + K j = 0`` on the trace grid from ``t = 0``."""
    m = trace.metric
    t = trace.t
    i0 = int(np.argmin(np.abs(t)))
    if abs(t[i0]) > 1e-12:
        raise ValueError("trace has no sample at t = 0")
    K = m.gauss_curvature(trace.x) if m.kind != "euclidean" else np.zeros(len(t))
    tm = 0.5 * (t[1:] + t[:-1])
    Km = (m.gauss_curvature(trace.position(tm)) if m.kind != "euclidean"
          else np.zeros(len(tm)))
    j = np.empty(len(t))
    dj = np.empty(len(t))
    j[i0], dj[i0] = j0, dj0

    def step(y, yd, h, ka, kmid, kb):
        k1, l1 = yd, -ka * y
        k2, l2 = yd + 0.5 * h * l1, -kmid * (y + 0.5 * h * k1)
        k3, l3 = yd + 0.5 * h * l2, -kmid * (y + 0.5 * h * k2)
        k4, l4 = yd + h * l3, -kb * (y + h * k3)
        return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), yd + h / 6 * (l1 + 2 * l2 + 2 * l3 + l4)

    for k in range(i0, len(t) - 1):
        j[k + 1], dj[k + 1] = step(j[k], dj[k], t[k + 1] - t[k], K[k], Km[k], K[k + 1])
    for k in range(i0, 0, -1):
        j[k - 1], dj[k - 1] = step(j[k], dj[k], t[k - 1] - t[k], K[k], Km[k - 1], K[k - 1])
    return j, dj, -K * j


def jacobi(m: MetricField, trace: GeodesicTrace, J0, DJ0) -> JacobiTrace:
    """Jacobi field along ``trace`` with ``J(0) = J0`` and ``D_t J(0) = DJ0``."""
    p0, v0 = trace.position(0.0), trace.velocity(0.0)
    n0 = m.rot90(p0, v0)
    J0, DJ0 = np.asarray(J0, float), np.asarray(DJ0, float)
    alpha = float(m.inner(p0, J0, v0))
    beta = float(m.inner(p0, DJ0, v0))
    j, dj, ddj = _scalar_jacobi(trace, float(m.inner(p0, J0, n0)), float(m.inner(p0, DJ0, n0)))
    return JacobiTrace(trace, alpha, beta, j, dj, ddj)


def nonvanishing_jacobi(m: MetricField, trace: GeodesicTrace, v, t0: float,
                        inside: Optional[Callable] = None) -> JacobiTrace:
    """Jacobi field with ``J(0) = v`` and ``J(t0) = 0``, found by shooting on ``D_t J(0)``.

    ``inside(x) -> bool mask`` marks the part of the trace where ``J`` must
    not vanish; a zero there, or a singular shooting system, raises
    :class:`ConjugacyError`.
    """
    p0, v0 = trace.position(0.0), trace.velocity(0.0)
    n0 = m.rot90(p0, v0)
    v = np.asarray(v, float)
    if not trace.t[0] <= t0 <= trace.t[-1] or t0 == 0:
        raise ValueError("t0 outside trace range")
    alpha = float(m.inner(p0, v, v0))
    beta = -alpha / t0
    j0 = float(m.inner(p0, v, n0))
    y1, _, _ = _scalar_jacobi(trace, 1.0, 0.0)
    y2, _, _ = _scalar_jacobi(trace, 0.0, 1.0)
    y1t0 = float(np.interp(t0, trace.t, y1))
    y2t0 = float(np.interp(t0, trace.t, y2))
    # Shooting system: [[1, 0], [y1(t0), y2(t0)]] (j(0), j'(0)) = (j0, 0).
    shoot_mat = np.array([[1.0, 0.0], [y1t0, y2t0]])
    if abs(np.linalg.det(shoot_mat)) < 1e-10 * max(1.0, abs(y1t0)):
        raise ConjugacyError("conjugate point: two-point Jacobi problem is singular")
    j0_, dj0 = np.linalg.solve(shoot_mat, [j0, 0.0])
    j, dj, ddj = _scalar_jacobi(trace, j0_, dj0)
    jt = JacobiTrace(trace, alpha, beta, j, dj, ddj)
    mask = (trace.t < t0) if t0 > 0 else (trace.t > t0)
    if inside is not None:
        mask &= inside(trace.x)
    if np.any(mask):
        Jn = m.norm(trace.x[mask], jt.J(trace.t[mask]))
        if np.min(Jn) <= 1e-12:
            raise ConjugacyError("Jacobi field vanishes inside the domain")
    return jt


def variation_check(m: MetricField, trace: GeodesicTrace, J: JacobiTrace, eps_grid) -> np.ndarray:
    """Deviation ``sup_t |(gamma_eps(t) - gamma(t))/eps - J(t)|`` per ``eps``.

    ``gamma_eps`` starts at ``exp_p(eps J0)`` with velocity the parallel
    transport of ``gdot(0) + eps DJ0`` along that short geodesic. Only the
    forward part ``t >= 0`` of the trace is compared.
    """
    p0, v0 = trace.position(0.0), trace.velocity(0.0)
    J0, DJ0 = J.J(0.0), J.DJ(0.0)
    tpos = trace.t[trace.t >= 0]
    h = trace.step
    out = []
    for eps in np.atleast_1d(eps_grid):
        eps = float(eps)
        q, w = _transported_start(m, p0, eps * J0, v0 + eps * DJ0, h)
        X, _, _, cnt, _ = _integrate(m, q[None], w[None], h, len(tpos) - 1)
        n = min(cnt[0], len(tpos))
        dev = (X[:n, 0] - trace.x[trace.t >= 0][:n]) / eps - J.J(tpos[:n])
        out.append(float(np.max(np.linalg.norm(dev, axis=-1))))
    return np.array(out)


# ---------------------------------------------------------- transport
def _transport_along(m: MetricField, pos: Callable, vel: Callable, w, T, h):
    """RK4 for ``W' = -Gamma(gdot, W)`` from 0 to ``T`` along ``(pos, vel)``."""
    w = np.asarray(w, float).copy()
    n = max(1, int(math.ceil(abs(T) / h)))
    dt = T / n

    def rhs(s, W):
        x = pos(s)
        if m.kind == "euclidean":
            return np.zeros_like(W)
        G = m.christoffel(x)
        return -np.einsum("kij,i,j->k", G, vel(s), W)

    s = 0.0
    for _ in range(n):
        k1 = rhs(s, w)
        k2 = rhs(s + dt / 2, w + dt / 2 * k1)
        k3 = rhs(s + dt / 2, w + dt / 2 * k2)
        k4 = rhs(s + dt, w + dt * k3)
        w = w + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s += dt
    return w


def parallel_transport(m: MetricField, trace: GeodesicTrace, w, distance: float) -> np.ndarray:
    """Parallel transport of ``w`` (at ``t = 0``) along ``trace`` to ``t = distance``."""
    lo, hi = trace.t_range
    if not lo - 1e-12 <= distance <= hi + 1e-12:
        raise ValueError("distance outside trace range")
    return _transport_along(m, trace.position, trace.velocity, w, distance,
                            min(trace.step, abs(distance) / 4 if distance else 1.0))


def _transported_start(m: MetricField, p, u, w, h):
    """Return ``exp_p(u)`` and the parallel transport of ``w`` along ``s -> exp_p(s u)``."""
    p = np.asarray(p, float)
    u = np.asarray(u, float)
    w = np.asarray(w, float)
    if m.kind == "euclidean":
        return p + u, w.copy()
    speed = float(m.norm(p, u))
    if speed == 0.0:
        return p.copy(), w.copy()
    n = max(16, int(math.ceil(speed / min(h, 1e-3))))
    X, V, A, cnt, ce = _integrate(m, p[None], u[None], 1.0 / n, n)
    if ce[0]:
        raise DomainError("variation start leaves the chart")
    tt = np.linspace(0.0, 1.0, n + 1)
    pos = lambda s: _hermite(s, tt, X[:, 0], V[:, 0])
    vel = lambda s: _hermite(s, tt, V[:, 0], A[:, 0])
    return X[-1, 0], _transport_along(m, pos, vel, w, 1.0, 1.0 / n)


def corner_variation(m: MetricField, p, theta: float, eps: float, omega, nu,
                     t_range=(-4.0, 4.0), step=DEFAULT_STEP, stop=None) -> GeodesicTrace:
    """Geodesic through ``w_theta(eps)``.

    The start point is ``exp_p(eps w_{theta+pi/2})``; the velocity is the
    parallel transport of ``w_theta`` along that short geodesic. Here
    ``w_phi = cos(phi) omega + sin(phi) nu`` in a g-orthonormal frame.
    """
    q, w = variation_initial_data(m, p, theta, eps, omega, nu, step)
    return shoot(m, q, w, t_range, step, stop)


def variation_initial_data(m: MetricField, p, theta, eps, omega, nu, step=DEFAULT_STEP):
    """Initial point and unit velocity of the corner variation (see :func:`corner_variation`)."""
    p = np.asarray(p, float)
    w_t = np.cos(theta) * omega + np.sin(theta) * nu
    w_n = -np.sin(theta) * omega + np.cos(theta) * nu
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    q, w = _transported_start(m, p, eps * w_n, w_t, step)
    if not m.in_chart(q):
        raise DomainError("variation start leaves the chart")
    return q, m.normalize(q, w)


# -------------------------------------------------------------- hitting
def hitting_time(trace: GeodesicTrace, rho: Callable, t_guess: float = 0.0,
                 direction: int = 1, both: bool = False):
    """Root of ``rho(gamma(t)) = 0`` searched from ``t_guess``.

    Parameters
    ----------
    rho : callable
        Vectorised implicit function of chart points.
    direction : {1, -1}
        Search forward or backward in ``t``.
    both : bool
        Return the pair ``(t_back, t_fwd)`` of nearest roots on each side.

    Returns
    -------
    float or None
        ``None`` signals no sign change in the trace (a clean no-hit). If
        ``gamma(t_guess)`` lies on the curve, the trivial root is skipped by
        working with ``rho(gamma(t)) / (t - t_guess)``.
    """
    if both:
        return (hitting_time(trace, rho, t_guess, -1), hitting_time(trace, rho, t_guess, 1))
    t = trace.t
    r0 = float(rho(trace.position(np.array([t_guess])))[0])
    scale = 1.0
    on_curve = abs(r0) < 1e-10 * scale
    if on_curve:
        def f(s):
            s = np.atleast_1d(s)
            d = s - t_guess
            return float(rho(trace.position(s))[0] / d[0]) if d[0] != 0 else np.nan
    else:
        def f(s):
            return float(rho(trace.position(np.atleast_1d(s)))[0])
    if direction > 0:
        sel = np.flatnonzero(t > t_guess + (1e-9 if on_curve else 0))
    else:
        sel = np.flatnonzero(t < t_guess - (1e-9 if on_curve else 0))[::-1]
    if sel.size == 0:
        return None
    ts = t[sel]
    vals = rho(trace.x[sel])
    if on_curve:
        vals = vals / (ts - t_guess)
        # The quotient at t_guess is the directional derivative; seed with it.
        start = np.array([t_guess + direction * 1e-9])
        seed = f(start[0])
    else:
        seed = r0
    prev_t, prev_v = t_guess + (direction * 1e-9 if on_curve else 0.0), seed
    for tk, vk in zip(ts, vals):
        if prev_v == 0:
            return float(prev_t)
        if prev_v * vk <= 0:
            a, b = sorted((prev_t, tk))
            fa, fb = f(a), f(b)
            if fa * fb > 0:
                prev_t, prev_v = tk, vk
                continue
            if fa == 0:
                return float(a)
            if fb == 0:
                return float(b)
            return float(brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
        prev_t, prev_v = tk, vk
    return None
