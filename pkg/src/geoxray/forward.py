"""Geodesic X-ray transform of piecewise constant fields.

A chord is segmented exactly at its crossings with the edge skeleton; on each
open interval the field is constant, so the transform is a finite sum of
value times interval length (traces are unit speed, so ``ds = dt``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import shapely
import shapely.ops
from scipy.optimize import brentq
from shapely.geometry import LineString

from .domain import DomainGeometry
from .errors import DomainError, RegionError, TangencyError
from .geodesic import GeodesicTrace, JacobiTrace
from .tiling import PiecewiseField, Tiling

TANGENCY_ANGLE = 1e-6  # crossing angles below this are tangencies
DEDUP_TOL = 1e-12
ON_BOUNDARY = 1e-10


@dataclass(frozen=True)
class Crossing:
    """One transversal meeting of a chord with an edge."""

    t: float
    edge: int
    s: float
    angle: float  # g-angle between the chord and the edge, in (0, pi/2]


@dataclass(frozen=True)
class MeetingTimes:
    """Segmentation of a chord ``[t_lo, t_hi]`` by the edge skeleton.

    ``labels[i]`` is the tile on the open interval ``(times[i], times[i+1])``
    (``-1`` where the chord runs along an edge).
    """

    trace: GeodesicTrace
    t_lo: float
    t_hi: float
    crossings: tuple
    labels: tuple

    @property
    def times(self) -> np.ndarray:
        return np.array([self.t_lo] + [c.t for c in self.crossings] + [self.t_hi])

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def length(self) -> float:
        return self.t_hi - self.t_lo

    def tile_lengths(self, n_tiles: int) -> np.ndarray:
        """Total chord length inside each tile."""
        out = np.zeros(n_tiles)
        for lab, dt in zip(self.labels, self.lengths):
            if lab >= 0:
                out[lab] += dt
        return out


# ---------------------------------------------------------------- endpoints
def chord_endpoints(domain: DomainGeometry, trace: GeodesicTrace, t0: float = 0.0):
    """Boundary times of the component of ``{rho >= 0}`` containing ``t0``."""
    from .geodesic import hitting_time

    rho = domain.rho
    r0 = float(rho(trace.position(np.array([t0])))[0])
    scale = domain.boundary.scale
    if r0 < -ON_BOUNDARY * scale:
        raise DomainError("chord starts outside the domain")
    lo = hitting_time(trace, rho, t0, -1)
    hi = hitting_time(trace, rho, t0, +1)
    on = abs(r0) <= ON_BOUNDARY * scale
    if lo is None:
        if not on and not trace.exit_lo:
            raise DomainError("chord does not reach the boundary (trace too short)")
        lo = t0 if on else float(trace.t[0])
    if hi is None:
        if not on and not trace.exit_hi:
            raise DomainError("chord does not reach the boundary (trace too short)")
        hi = t0 if on else float(trace.t[-1])
    if on and hi - lo > 0:
        # the start is on the boundary: keep the inward side only
        mid_fwd = float(rho(trace.position(np.array([0.5 * (t0 + hi)])))[0]) if hi > t0 else -1
        mid_bwd = float(rho(trace.position(np.array([0.5 * (t0 + lo)])))[0]) if lo < t0 else -1
        if mid_fwd < 0:
            hi = t0
        if mid_bwd < 0:
            lo = t0
    return float(lo), float(hi)


# ---------------------------------------------------------------- crossings
def _cum_lengths(P):
    return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(P, axis=0).T))])


def _refine(edge, trace, s, t, iters=30):
    """Newton on ``sigma(s) = gamma(t)``; returns ``(s, t, converged)``."""
    for _ in range(iters):
        F = edge.point(s) - trace.position(np.array([t]))[0]
        Jm = np.column_stack([edge.deriv(s), -trace.velocity(np.array([t]))[0]])
        try:
            ds, dt = np.linalg.solve(Jm, -F)
        except np.linalg.LinAlgError:
            return s, t, False
        s, t = s + ds, t + dt
        if abs(ds) < 1e-15 and abs(dt) < 1e-14:
            break
    F = edge.point(s) - trace.position(np.array([t]))[0]
    return float(s), float(t), bool(np.hypot(*F) < 1e-11)


def crossing_angle(m, trace, t, edge, s) -> float:
    """g-angle in ``[0, pi/2]`` between the chord at ``t`` and the edge at ``s``."""
    p = trace.position(np.array([t]))[0]
    v = trace.velocity(np.array([t]))[0]
    u = np.asarray(edge.deriv(s), float)
    n = m.rot90(p, v)
    un = float(m.norm(p, u))
    sin = abs(float(m.inner(p, u, n))) / un
    cos = abs(float(m.inner(p, u, v))) / un / float(m.norm(p, v))
    return math.atan2(sin, cos)


def _segment_crossings(tiling: Tiling, trace: GeodesicTrace, t_lo, t_hi, coincident):
    m = tiling.metric
    inner_t = trace.t[(trace.t > t_lo) & (trace.t < t_hi)]
    ts = np.concatenate([[t_lo], inner_t, [t_hi]])
    P = trace.position(ts)
    line = LineString(P)
    cum = _cum_lengths(P)
    found, overlaps = [], []
    cand = tiling.edge_tree.query(line, predicate="dwithin", distance=1e-7)
    for e in np.unique(cand):
        e = int(e)
        edge = tiling.edges[e]
        if edge.kind == "boundary":
            continue
        eline = tiling.edge_line(e)
        ecum = _cum_lengths(edge.polyline)
        inter = line.intersection(eline)
        geoms = list(getattr(inter, "geoms", [inter])) if not inter.is_empty else []
        pts = []
        for g in geoms:
            if g.geom_type == "Point":
                pts.append(np.array(g.coords[0]))
            elif g.geom_type == "LineString" and g.length > 1e-9:
                if coincident == "raise":
                    raise TangencyError(f"chord runs along edge {tiling.edge_names[e]}", edge=e)
                a, b = np.array(g.coords[0]), np.array(g.coords[-1])
                ta = float(np.interp(line.project(shapely.points(a)), cum, ts))
                tb = float(np.interp(line.project(shapely.points(b)), cum, ts))
                overlaps.append((min(ta, tb), max(ta, tb), e))
            else:
                pts.extend(np.array(c) for c in g.coords[:1])
        if not pts and not overlaps:
            # near miss: a touching edge shows up as a tiny closest distance
            d = line.distance(eline)
            if d < 1e-7:
                q = np.array(shapely.ops.nearest_points(line, eline)[0].coords[0])
                pts.append(q)
        for q in pts:
            t0 = float(np.interp(line.project(shapely.points(q)), cum, ts))
            s0 = float(np.interp(eline.project(shapely.points(q)), ecum, edge.s_samples))
            s, t, ok = _refine(edge, trace, s0, t0)
            if not ok:
                ang = crossing_angle(m, trace, t0, edge, min(max(s0, 0.0), 1.0))
                if ang < 1e-3:
                    raise TangencyError(
                        f"chord touches edge {tiling.edge_names[e]} tangentially", edge=e)
                continue
            if not (-1e-12 <= s <= 1 + 1e-12) or not (t_lo + DEDUP_TOL < t < t_hi - DEDUP_TOL):
                continue
            ang = crossing_angle(m, trace, t, edge, s)
            if ang < TANGENCY_ANGLE and not any(a <= t <= b for a, b, _ in overlaps):
                raise TangencyError(
                    f"chord is tangent to edge {tiling.edge_names[e]} (angle {ang:.1e})", edge=e)
            found.append(Crossing(t, e, min(max(s, 0.0), 1.0), ang))
    return found, overlaps


def meeting_times(domain: DomainGeometry, tiling: Tiling, trace: GeodesicTrace,
                  t0: float = 0.0, coincident: str = "raise") -> MeetingTimes:
    """All crossings of the chord through ``trace(t0)`` with the edge skeleton.

    Parameters
    ----------
    coincident : {'raise', 'skip'}
        Chords running along an edge raise :class:`TangencyError` by default;
        with ``'skip'`` the shared stretch is labelled ``-1`` (the field
        vanishes on edges).
    """
    t_lo, t_hi = chord_endpoints(domain, trace, t0)
    if t_hi - t_lo <= 0:
        return MeetingTimes(trace, t_lo, t_hi, (), ())
    found, overlaps = _segment_crossings(tiling, trace, t_lo, t_hi, coincident)
    found.sort(key=lambda c: (c.t, c.edge))
    dedup = []
    for c in found:
        if dedup and abs(c.t - dedup[-1].t) < DEDUP_TOL and c.edge == dedup[-1].edge:
            continue
        dedup.append(c)
    for a, b, e in overlaps:
        dedup = [c for c in dedup if not (a - DEDUP_TOL <= c.t <= b + DEDUP_TOL and c.edge == e)]
        dedup.append(Crossing(a, e, float("nan"), 0.0))
        dedup.append(Crossing(b, e, float("nan"), 0.0))
    dedup.sort(key=lambda c: (c.t, c.edge))
    times = [t_lo] + [c.t for c in dedup] + [t_hi]
    labels = _label_intervals(tiling, trace, times, dedup, overlaps)
    return MeetingTimes(trace, t_lo, t_hi, tuple(dedup), tuple(labels))


def _label_intervals(tiling, trace, times, crossings, overlaps):
    labels = []
    mids = [0.5 * (a + b) for a, b in zip(times[:-1], times[1:])]
    for i, tm in enumerate(mids):
        if times[i + 1] - times[i] < DEDUP_TOL:
            labels.append(labels[-1] if labels else -1)
            continue
        if any(a - DEDUP_TOL <= times[i] and times[i + 1] <= b + DEDUP_TOL for a, b, _ in overlaps):
            labels.append(-1)
            continue
        q = trace.position(np.array([tm]))[0]
        lab = _interval_point_label(tiling, q)
        labels.append(lab if lab is not None else _side_label(tiling, trace, crossings, i))
    return labels


def _interval_point_label(tiling, q):
    """Tile of a point known not to lie on the skeleton (it is inside a crossing-free interval)."""
    try:
        loc = tiling.locate(q)
    except DomainError:
        return None
    if loc.kind == "tile":
        return loc.id
    if loc.kind == "edge":
        adj = tiling.edge_tiles(loc.id)
        if len(adj) == 1:
            return adj[0][0]
        sd = tiling.edges[loc.id].closest(q)[2]
        if sd != 0.0:
            for k, left in adj:
                if left == (sd > 0):
                    return k
    return None


def _side_label(tiling, trace, crossings, i):
    """Tile entered through the crossing before interval ``i`` (fallback for slivers)."""
    if i == 0:
        if not crossings:
            return -1
        c, forward = crossings[0], False
    else:
        c, forward = crossings[i - 1], True
    v = trace.velocity(np.array([c.t]))[0] * (1 if forward else -1)
    u = tiling.edges[c.edge].deriv(c.s)
    left = float(u[0] * v[1] - u[1] * v[0]) > 0
    for k, on_left in tiling.edge_tiles(c.edge):
        if on_left == left:
            return k
    return -1


# ---------------------------------------------------------------- integrals
def ray_transform(f: PiecewiseField, mt: MeetingTimes) -> float:
    """Exact integral of ``f`` along the chord: sum of value times interval length."""
    vals = np.array([f.values[k] if k >= 0 else 0.0 for k in mt.labels])
    return float(np.sum(vals * mt.lengths)) if len(vals) else 0.0


@dataclass(frozen=True)
class Region:
    """Union of tiles, optionally intersected with a ball ``|x - center|_{g(center)} < radius``."""

    tiles: frozenset
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None
    gram: Optional[np.ndarray] = None

    @classmethod
    def corner(cls, tiles: Iterable[int], metric, center, radius):
        c = np.asarray(center, float)
        return cls(frozenset(int(k) for k in tiles), c, float(radius), metric.metric_at(c))

    def ball_level(self, X):
        """Positive inside the ball."""
        d = np.asarray(X, float) - self.center
        return self.radius - np.sqrt(np.einsum("...i,ij,...j->...", d, self.gram, d))


def _ball_roots(region: Region, trace, a, b):
    ts = trace.t[(trace.t > a) & (trace.t < b)]
    grid = np.concatenate([[a], ts, [b]])
    vals = region.ball_level(trace.position(grid))
    f = lambda s: float(region.ball_level(trace.position(np.array([s])))[0])
    roots = []
    for k in range(len(grid) - 1):
        if vals[k] == 0:
            roots.append(grid[k])
        elif vals[k] * vals[k + 1] < 0:
            roots.append(brentq(f, grid[k], grid[k + 1], xtol=1e-15))
    return np.array(sorted(set(roots)))


def restricted_integral(f: PiecewiseField, mt: MeetingTimes, region: Region) -> float:
    """Integral of ``f`` over the part of the chord lying in ``region``."""
    n = len(f.tiling.tiles)
    if any(not 0 <= k < n for k in region.tiles):
        raise RegionError("region names tiles that are not in the tiling")
    total = 0.0
    times = mt.times
    for lab, a, b in zip(mt.labels, times[:-1], times[1:]):
        if lab < 0 or lab not in region.tiles or b <= a:
            continue
        if region.center is None:
            total += f.values[lab] * (b - a)
            continue
        cuts = np.concatenate([[a], _ball_roots(region, mt.trace, a, b), [b]])
        mids = 0.5 * (cuts[1:] + cuts[:-1])
        inside = region.ball_level(mt.trace.position(mids)) > 0
        total += f.values[lab] * float(np.sum(np.diff(cuts)[inside]))
    return float(total)


# ----------------------------------------------------------- derivatives
def meeting_time_derivative(m, trace: GeodesicTrace, J: JacobiTrace, t0: float, u):
    """First-order motion ``(s'(0), t'(0))`` of a crossing under the variation with field ``J``.

    ``u`` is the edge tangent at the crossing. Writing
    ``u = u1 gdot(t0) + u2 J(t0)/|J(t0)|`` gives ``s' = J0/u2``, ``t' = J0 u1/u2``.
    """
    p = trace.position(np.array([t0]))[0]
    v = trace.velocity(np.array([t0]))[0]
    Jt = J.J(np.array([t0]))[0]
    J0 = float(m.norm(p, Jt))
    if J0 < 1e-14:
        raise TangencyError("Jacobi field vanishes at the crossing")
    basis = np.column_stack([v, Jt / J0])
    if abs(np.linalg.det(basis)) < 1e-14:
        raise TangencyError("Jacobi field is tangent to the geodesic at the crossing")
    u1, u2 = np.linalg.solve(basis, np.asarray(u, float))
    if abs(u2) < 1e-12 * max(1.0, abs(u1)):
        raise TangencyError("edge is tangent to the geodesic at the crossing")
    return J0 / u2, J0 * u1 / u2


# ---------------------------------------------------------------- forward
@dataclass
class ForwardModel:
    """Sinogram access: chords given by initial point and velocity map to ``If``.

    Calls are batched: ``model(Q, W)`` shoots all chords in one integration.
    ``t0`` is always ``0`` (the chord through ``Q``).
    """

    domain: DomainGeometry
    field: PiecewiseField
    coincident: str = "raise"
    calls: int = 0

    @property
    def tiling(self) -> Tiling:
        return self.field.tiling

    def traces(self, Q, W):
        return self.domain.shoot_chords(np.atleast_2d(Q), np.atleast_2d(W))

    def meeting(self, Q, W):
        return [meeting_times(self.domain, self.tiling, tr, 0.0, self.coincident)
                for tr in self.traces(Q, W)]

    def __call__(self, Q, W) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(Q, float))
        self.calls += len(Q)
        return np.array([ray_transform(self.field, mt) for mt in self.meeting(Q, W)])


SINOGRAM_COLUMNS = ("geodesic_id", "qx", "qy", "wx", "wy", "theta", "eps", "If", "tangency_flag")


def sinogram_rows(model, Q, W, meta: Optional[Sequence[tuple]] = None):
    """Rows in :data:`SINOGRAM_COLUMNS` order; tangent chords give ``NaN`` with flag ``1``."""
    Q = np.atleast_2d(np.asarray(Q, float))
    W = np.atleast_2d(np.asarray(W, float))
    try:
        vals, flags = np.asarray(model(Q, W), float), np.zeros(len(Q), int)
    except TangencyError:
        vals, flags = np.empty(len(Q)), np.zeros(len(Q), int)
        for i in range(len(Q)):
            try:
                vals[i] = float(model(Q[i:i + 1], W[i:i + 1])[0])
            except TangencyError:
                vals[i], flags[i] = float("nan"), 1
    rows = []
    for i in range(len(Q)):
        th, ep = meta[i] if meta is not None else (float("nan"), float("nan"))
        rows.append((i, *Q[i], *W[i], th, ep, float(vals[i]), int(flags[i])))
    return rows


def _chord_key(q, w):
    return tuple(np.round(np.concatenate([q, w]), 10).tolist())


class RecordingSinogram:
    """Wraps a sinogram callable and keeps every chord it was asked for."""

    def __init__(self, inner):
        self.inner = inner
        self.Q, self.W, self.values = [], [], []

    def __call__(self, Q, W):
        Q, W = np.atleast_2d(Q), np.atleast_2d(W)
        out = np.asarray(self.inner(Q, W), float)
        self.Q += list(Q)
        self.W += list(W)
        self.values += list(out)
        return out


class TableSinogram:
    """Sinogram callable backed by recorded rows (e.g. a CSV written by ``geoxray forward``)."""

    def __init__(self, rows):
        self.table = {}
        for r in rows:
            self.table[_chord_key(np.array(r[1:3], float), np.array(r[3:5], float))] = float(r[7])

    @classmethod
    def from_csv(cls, path):
        return cls(read_csv(path)[1])

    def __call__(self, Q, W):
        out = []
        for q, w in zip(np.atleast_2d(Q), np.atleast_2d(W)):
            key = _chord_key(q, w)
            if key not in self.table:
                raise DomainError(f"sinogram has no entry for the chord through {q.tolist()} "
                                  f"with velocity {w.tolist()}")
            val = self.table[key]
            if not np.isfinite(val):
                raise TangencyError("sinogram entry is flagged as tangent")
            out.append(val)
        return np.array(out)


def write_csv(path, columns, rows, header: Optional[dict] = None):
    """CSV with ``# key: value`` provenance lines before the column header."""
    with open(path, "w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def read_csv(path):
    """Inverse of :func:`write_csv`: returns ``(header dict, rows)`` with numeric cells as floats."""
    header, rows, columns = {}, [], None
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].partition(":")
                header[k.strip()] = v.strip()
                continue
            break
        else:
            return header, rows
        columns = next(csv.reader([line]))
        for r in csv.reader(fh):
            rows.append([float(x) for x in r])
    header["columns"] = columns
    return header, rows


# ---------------------------------------------------------------- oracle
def _bisect(label, inside, outside, lab, tol):
    """Boundary of the run of ``lab`` starting at ``inside`` in the direction of ``outside``."""
    lo, hi = inside, outside
    while abs(hi - lo) > tol:
        c = 0.5 * (lo + hi)
        if label(c) == lab:
            lo = c
        else:
            hi = c
    return 0.5 * (lo + hi)


def quadrature_oracle(domain: DomainGeometry, f: PiecewiseField, trace: GeodesicTrace,
                      n: int = 10_000, t0: float = 0.0) -> float:
    """Midpoint rule with ``n`` nodes; cells where the tile label jumps are split at the
    jump, located by bisection on point location alone."""
    t_lo, t_hi = chord_endpoints(domain, trace, t0)
    if t_hi <= t_lo:
        return 0.0
    tiling = f.tiling
    g = np.linspace(t_lo, t_hi, n + 1)
    mids = 0.5 * (g[1:] + g[:-1])
    labs = tiling.locate_many(trace.position(mids))
    val = lambda k: f.values[k] if k >= 0 else 0.0

    def label(t):
        try:
            loc = tiling.locate(trace.position(np.array([t]))[0])
        except DomainError:
            return -1
        return loc.id if loc.kind == "tile" else -1

    total = val(labs[0]) * (mids[0] - g[0]) + val(labs[-1]) * (g[-1] - mids[-1])
    for k in range(n - 1):
        a, b = mids[k], mids[k + 1]
        la, lb = labs[k], labs[k + 1]
        if la == lb:
            total += val(la) * (b - a)
            continue
        # bisect from both sides; the skeleton band between them is symmetric about the edge
        c1 = _bisect(label, a, b, la, tol=1e-13 * (t_hi - t_lo))
        c2 = _bisect(label, b, a, lb, tol=1e-13 * (t_hi - t_lo))
        cut = 0.5 * (c1 + c2)
        total += val(la) * (cut - a) + val(lb) * (b - cut)
    return float(total)
