"""Recovery near the boundary: tangent tiles, ending times and boundary corners.

A chord leaving a boundary point ``p`` at a small angle ``eps`` to the
boundary has length ``(2/kappa) eps + O(eps^2)``, so the value of a tile
containing all such chords is ``(kappa/2) lim If/eps``. Chords parallel to the
boundary at depth ``eps`` end after ``sqrt(2 eps/kappa) - (j/(3 kappa^2)) eps``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .domain import DomainGeometry, boundary_taylor
from .errors import AsymptoticsError, EpsilonTooLargeError, TangencyError
from .forward import Region, meeting_times, restricted_integral
from .geodesic import GeodesicTrace, JacobiTrace, hitting_time, variation_initial_data
from .tiling import PiecewiseField, Tiling


# ------------------------------------------------------------ tangent tiles
def tangent_probe(domain: DomainGeometry, p, side: int, eps):
    """Start points and unit velocities ``side*omega + eps*nu`` of boundary probes."""
    p = np.asarray(p, float)
    om, nu = domain.boundary_frame(p)
    eps = np.atleast_1d(np.asarray(eps, float))
    V = side * om[None] + eps[:, None] * nu[None]
    V = domain.metric.normalize(np.broadcast_to(p, V.shape), V)
    return np.broadcast_to(p, V.shape).copy(), V


def check_probes(domain: DomainGeometry, tiling: Tiling, p, side: int, eps, tile: int):
    """Raise :class:`EpsilonTooLargeError` if a probe chord leaves ``tile``."""
    Q, W = tangent_probe(domain, p, side, eps)
    for e, tr in zip(np.atleast_1d(eps), domain.shoot_chords(Q, W)):
        mt = meeting_times(domain, tiling, tr)
        if any(lab != tile for lab in mt.labels):
            raise EpsilonTooLargeError(
                f"probe at eps={e:.2e} leaves tile {tiling.tile_names[tile]} before returning "
                "to the boundary")


def one_sided_fit(eps, y, degree: int = 1, intercept: bool = False):
    """Polynomial LS fit in ``eps``; returns the coefficients of ``eps^k`` (k from 0 or 1)."""
    eps = np.asarray(eps, float)
    s = float(eps.max())
    k0 = 0 if intercept else 1
    V = np.stack([(eps / s) ** k for k in range(k0, degree + 1)], -1)
    c, *_ = np.linalg.lstsq(V, np.asarray(y, float), rcond=None)
    c = c / s ** np.arange(k0, degree + 1)
    resid = np.asarray(y, float) - V @ (c * s ** np.arange(k0, degree + 1))
    return c, resid


@dataclass(frozen=True)
class TangentEstimate:
    value: float
    slope: float
    kappa: float
    eps: np.ndarray
    If: np.ndarray
    degree: int
    residual: float

    def to_dict(self):
        return {"value": self.value, "slope": self.slope, "kappa": self.kappa,
                "eps": self.eps.tolist(), "If": self.If.tolist(), "degree": self.degree,
                "residual": self.residual}


def tangent_tile_value(domain: DomainGeometry, p, eps, If, kappa: Optional[float] = None,
                       degree: int = 1) -> TangentEstimate:
    """Tangent-tile value ``(kappa/2) * dIf/deps(0)`` from probe integrals.

    ``If[k]`` is the integral along the probe with parameter ``eps[k]``; the
    slope comes from a one-sided LS fit through the origin (``degree = 1`` is a
    plain linear fit, higher degrees remove the higher-order remainder).
    """
    if kappa is None:
        kappa = boundary_taylor(domain, p).kappa
    eps = np.asarray(eps, float)
    If = np.asarray(If, float)
    c, resid = one_sided_fit(eps, If, degree)
    scale = max(float(np.max(np.abs(If))), 1e-300)
    return TangentEstimate(0.5 * kappa * float(c[0]), float(c[0]), float(kappa), eps, If, degree,
                           float(np.max(np.abs(resid))) / scale)


# ------------------------------------------------------------ ending times
def ending_time_transversal(domain: DomainGeometry, trace: GeodesicTrace, J: JacobiTrace,
                            t_end: float) -> float:
    """First-order motion ``t'(0) = -<J, nu> / <gdot, nu>`` of a transversal boundary exit."""
    m = domain.metric
    x = trace.position(np.array([t_end]))[0]
    q = domain.project_to_boundary(x)
    _, nu = domain.boundary_frame(q)
    v = trace.velocity(np.array([t_end]))[0]
    Jt = J.J(np.array([t_end]))[0]
    den = float(m.inner(x, v, nu))
    if abs(den) < 1e-10:
        raise TangencyError("geodesic leaves the boundary tangentially; use the tangential model")
    return -float(m.inner(x, Jt, nu)) / den


@dataclass(frozen=True)
class TangentialFit:
    """Fitted and predicted coefficients of ``t(eps) = c_half sqrt(eps) + c_one eps``."""

    c_half: float
    c_one: float
    predicted_half: float
    predicted_one: float
    kappa: float
    jerk: float
    eps: np.ndarray
    times: np.ndarray
    residual_over_eps: np.ndarray  # (t - predicted model)/eps per eps
    fit_residual: float

    @property
    def residual_decreasing(self) -> bool:
        r = np.abs(self.residual_over_eps)
        order = np.argsort(self.eps)
        return bool(np.all(np.diff(r[order]) >= -1e-12 * max(r.max(), 1e-300)))

    def to_dict(self):
        return {"c_half": self.c_half, "c_one": self.c_one,
                "predicted_half": self.predicted_half, "predicted_one": self.predicted_one,
                "kappa": self.kappa, "jerk": self.jerk, "eps": self.eps.tolist(),
                "times": self.times.tolist(),
                "residual_over_eps": self.residual_over_eps.tolist(),
                "fit_residual": self.fit_residual}


def tangential_ending_times(domain: DomainGeometry, p, eps, omega=None) -> np.ndarray:
    """Exit times of the chords through ``exp_p(eps nu)`` with velocity (transported) ``omega``."""
    p = np.asarray(p, float)
    om, nu = domain.boundary_frame(p)
    if omega is not None:
        om = np.asarray(omega, float)
        nu = domain.metric.rot90(p, om)
        if domain.metric.inner(p, nu, domain.boundary_frame(p)[1]) < 0:
            nu = -nu
    starts = [variation_initial_data(domain.metric, p, 0.0, float(e), om, nu, domain.step)
              for e in np.atleast_1d(eps)]
    Q = np.array([s[0] for s in starts])
    W = np.array([s[1] for s in starts])
    L = 8.0 * float(np.sqrt(2 * np.max(eps) * domain.diameter)) + 0.1
    out = []
    step = min(domain.step, 1e-3)
    from .geodesic import shoot_many

    for tr in shoot_many(domain.metric, Q, W, (0.0, L), step):
        t = hitting_time(tr, domain.rho, 0.0, +1)
        if t is None:
            raise AsymptoticsError("tangential chord did not reach the boundary")
        out.append(t)
    return np.array(out)


def ending_time_tangential(domain: DomainGeometry, p, eps=None, omega=None,
                           tol: float = 1e-3) -> TangentialFit:
    """Fit ``{sqrt(eps), eps}`` to tangential exit times; curvature and jerk come from the domain."""
    if eps is None:
        eps = np.geomspace(1e-6, 1e-5, 8)
    eps = np.asarray(eps, float)
    p = np.asarray(p, float)
    om = domain.boundary_frame(p)[0] if omega is None else np.asarray(omega, float)
    bt = boundary_taylor(domain, p, om)
    kappa, jerk = bt.kappa, bt.jerk
    times = tangential_ending_times(domain, p, eps, om)
    V = np.stack([np.sqrt(eps), eps], -1)
    c, *_ = np.linalg.lstsq(V, times, rcond=None)
    fit_res = float(np.max(np.abs(V @ c - times)) / np.max(times))
    if fit_res > tol:
        raise AsymptoticsError(f"exit times do not follow the sqrt model (residual {fit_res:.2e})")
    ph, p1 = float(np.sqrt(2.0 / kappa)), float(-jerk / (3.0 * kappa**2))
    r = (times - ph * np.sqrt(eps) - p1 * eps) / eps
    return TangentialFit(float(c[0]), float(c[1]), ph, p1, kappa, jerk, eps, times, r, fit_res)


# ------------------------------------------------------- boundary corners
@dataclass(frozen=True)
class CornerGrid:
    """Corner integrals on a ``(theta, eps)`` grid at a vertex."""

    thetas: np.ndarray
    eps: np.ndarray
    I_C: np.ndarray
    If: np.ndarray
    known: np.ndarray
    cross_check: Optional[np.ndarray] = None  # direct restricted integrals when available

    @property
    def max_disagreement(self) -> float:
        if self.cross_check is None:
            return float("nan")
        return float(np.max(np.abs(self.I_C - self.cross_check)))


def corner_chords(domain: DomainGeometry, p, omega, nu, thetas, eps):
    """Start points and velocities of the corner variation on a ``(theta, eps)`` grid (row-major)."""
    Q, W = [], []
    for th in thetas:
        for e in eps:
            q, w = variation_initial_data(domain.metric, p, float(th), float(e), omega, nu,
                                          domain.step)
            Q.append(q)
            W.append(w)
    return np.array(Q), np.array(W)


def known_part(mt, known: dict) -> float:
    """Contribution of tiles with known values to a segmented chord."""
    return float(sum(known[k] * dt for k, dt in zip(mt.labels, mt.lengths) if k in known))


def corner_grid(domain: DomainGeometry, tiling: Tiling, p, omega, nu, thetas, eps, sinogram,
                known: dict, corner_tiles: Sequence[int] = (), radius: Optional[float] = None,
                true_field: Optional[PiecewiseField] = None, coincident: str = "raise") -> CornerGrid:
    """``I_C = If - (known tiles' contribution)`` with meeting times found by root finding.

    With ``true_field`` the corner integral is also computed directly over the
    corner tiles inside the ball ``B(p, radius)`` as a cross-check.
    """
    thetas = np.asarray(thetas, float)
    eps = np.asarray(eps, float)
    Q, W = corner_chords(domain, p, omega, nu, thetas, eps)
    If = np.asarray(sinogram(Q, W), float)
    traces = domain.shoot_chords(Q, W)
    kn = np.empty(len(traces))
    direct = np.empty(len(traces)) if true_field is not None else None
    region = (Region.corner(corner_tiles, domain.metric, p, radius)
              if true_field is not None and radius is not None else None)
    for i, tr in enumerate(traces):
        mt = meeting_times(domain, tiling, tr, 0.0, coincident)
        kn[i] = known_part(mt, known)
        if direct is not None:
            direct[i] = (restricted_integral(true_field, mt, region) if region is not None else
                         restricted_integral(true_field, mt, Region(frozenset(corner_tiles))))
    shape = (len(thetas), len(eps))
    return CornerGrid(thetas, eps, (If - kn).reshape(shape), If.reshape(shape), kn.reshape(shape),
                      None if direct is None else direct.reshape(shape))


def boundary_corner_integrals(domain: DomainGeometry, tiling: Tiling, p, thetas, eps, sinogram,
                              known: dict, corner_tiles: Sequence[int], radius: float,
                              true_field: Optional[PiecewiseField] = None) -> CornerGrid:
    """Corner integrals at a boundary vertex in the boundary frame (tangent tiles known)."""
    om, nu = domain.boundary_frame(p)
    return corner_grid(domain, tiling, p, om, nu, thetas, eps, sinogram, known, corner_tiles,
                       radius, true_field)
