"""Regular tilings by curvilinear triangles and piecewise constant fields.

Edges are parametrised curves on ``[0, 1]``. Each tile is a closed loop of
three edges; the loop is oriented counter-clockwise in the chart so the tile
interior lies to the left. Tangent cones at vertices are measured in a
g-orthonormal frame ``(omega, nu)``; since ``nu`` is the g-rotation of
``omega`` by +90 degrees, frame angles increase counter-clockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import shapely
from shapely.geometry import LineString, Polygon
from shapely.strtree import STRtree

from .domain import Boundary
from .errors import DegenerateTileError, DomainError, TangencyAmbiguityError, TilingError
from .geodesic import DEFAULT_STEP, GeodesicTrace, exp_map, shoot, shoot_many
from .metric import MetricField

EDGE_TOL = 1e-9  # skeleton band
NEAR_BAND = 1e-5  # polyline distance below which the exact curve is consulted
SNAP_TOL = 1e-9  # cone edges this close to the level tangent count as on it
AMBIG_TOL = 1e-8


# ------------------------------------------------------------------- edges
class Edge:
    """A parametrised curve ``sigma: [0, 1] -> chart`` between two vertices."""

    kind = "general"
    n_samples = 1000

    def __init__(self, v0: int, v1: int, kind: Optional[str] = None, name: str = ""):
        self.v0, self.v1 = int(v0), int(v1)
        if kind is not None:
            self.kind = kind
        self.name = name
        self._poly = None

    def point(self, s):
        raise NotImplementedError

    def deriv(self, s):
        raise NotImplementedError

    def deriv2(self, s, h=1e-5):
        s = np.asarray(s, dtype=float)
        return (self.deriv(s + h) - self.deriv(s - h)) / (2 * h)

    @property
    def s_samples(self):
        return np.linspace(0.0, 1.0, self.n_samples + 1)

    @property
    def polyline(self) -> np.ndarray:
        if self._poly is None:
            self._poly = np.asarray(self.point(self.s_samples), dtype=float)
        return self._poly

    def outgoing(self, vertex: int):
        """Outgoing tangent (chart vector) at an endpoint."""
        if vertex == self.v0:
            return np.asarray(self.deriv(0.0), float)
        if vertex == self.v1:
            return -np.asarray(self.deriv(1.0), float)
        raise TilingError(f"vertex {vertex} is not an endpoint of edge {self.name}")

    def closest(self, p):
        """Parameter, point and signed distance (left positive) of the closest curve point."""
        p = np.asarray(p, dtype=float)
        P = self.polyline
        seg = P[1:] - P[:-1]
        w = p - P[:-1]
        L2 = np.sum(seg * seg, -1)
        u = np.clip(np.sum(w * seg, -1) / np.where(L2 > 0, L2, 1), 0, 1)
        dist2 = np.sum((w - u[:, None] * seg) ** 2, -1)
        k = int(np.argmin(dist2))
        ss = self.s_samples
        s = ss[k] + u[k] * (ss[k + 1] - ss[k])
        for _ in range(8):
            q, d1, d2 = self.point(s), self.deriv(s), self.deriv2(s)
            r = q - p
            f = float(r @ d1)
            fp = float(d1 @ d1 + r @ d2)
            if fp <= 0:
                break
            ds = -f / fp
            s = min(1.0, max(0.0, s + ds))
            if abs(ds) < 1e-14:
                break
        q, d1 = self.point(s), self.deriv(s)
        r = p - q
        dist = float(np.hypot(*r))
        side = float(d1[0] * r[1] - d1[1] * r[0])
        return float(s), q, math.copysign(dist, side) if side != 0 else 0.0


class SegmentEdge(Edge):
    """Straight chart segment (a geodesic edge in a Euclidean metric)."""

    kind = "geodesic"
    n_samples = 2

    def __init__(self, A, B, v0, v1, kind="geodesic", name=""):
        super().__init__(v0, v1, kind, name)
        self.A = np.asarray(A, float)
        self.B = np.asarray(B, float)

    def point(self, s):
        s = np.asarray(s, float)
        return self.A + s[..., None] * (self.B - self.A)

    def deriv(self, s):
        s = np.asarray(s, float)
        return np.broadcast_to(self.B - self.A, s.shape + (2,)).copy()

    def deriv2(self, s, h=None):
        s = np.asarray(s, float)
        return np.zeros(s.shape + (2,))


class TraceEdge(Edge):
    """Geodesic edge stored as a geodesic trace of length ``L``."""

    kind = "geodesic"

    def __init__(self, trace: GeodesicTrace, length: float, v0, v1, name=""):
        super().__init__(v0, v1, "geodesic", name)
        self.trace = trace
        self.length = float(length)

    def point(self, s):
        return self.trace.position(np.asarray(s, float) * self.length)

    def deriv(self, s):
        return self.length * self.trace.velocity(np.asarray(s, float) * self.length)

    def deriv2(self, s, h=None):
        t = np.asarray(s, float) * self.length
        return self.length**2 * self.trace.metric.geodesic_acceleration(
            self.trace.position(t), self.trace.velocity(t))


class BoundaryArcEdge(Edge):
    """Piece of the domain boundary between parameters ``s0`` and ``s1``."""

    kind = "boundary"

    def __init__(self, boundary: Boundary, s0: float, s1: float, v0, v1, name=""):
        super().__init__(v0, v1, "boundary", name)
        self.boundary = boundary
        self.s0, self.s1 = float(s0), float(s1)

    def point(self, s):
        return self.boundary.point(self.s0 + np.asarray(s, float) * (self.s1 - self.s0))

    def deriv(self, s):
        return (self.s1 - self.s0) * self.boundary.tangent(
            self.s0 + np.asarray(s, float) * (self.s1 - self.s0))


class ArcEdge(Edge):
    """Circular arc in chart coordinates from angle ``a0`` to ``a1``."""

    def __init__(self, center, radius, a0, a1, v0, v1, kind="general", name=""):
        super().__init__(v0, v1, kind, name)
        self.c = np.asarray(center, float)
        self.r = float(radius)
        self.a0, self.a1 = float(a0), float(a1)

    def point(self, s):
        a = self.a0 + np.asarray(s, float) * (self.a1 - self.a0)
        return self.c + self.r * np.stack([np.cos(a), np.sin(a)], -1)

    def deriv(self, s):
        a = self.a0 + np.asarray(s, float) * (self.a1 - self.a0)
        return self.r * (self.a1 - self.a0) * np.stack([-np.sin(a), np.cos(a)], -1)

    def deriv2(self, s, h=None):
        a = self.a0 + np.asarray(s, float) * (self.a1 - self.a0)
        return -self.r * (self.a1 - self.a0) ** 2 * np.stack([np.cos(a), np.sin(a)], -1)


class SplineEdge(Edge):
    """Cubic spline through control points (chord-length parametrised)."""

    def __init__(self, points, v0, v1, kind="general", name=""):
        from scipy.interpolate import CubicSpline

        super().__init__(v0, v1, kind, name)
        P = np.asarray(points, float)
        seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
        u = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
        self._spl = CubicSpline(u, P)

    def point(self, s):
        return self._spl(np.asarray(s, float))

    def deriv(self, s):
        return self._spl(np.asarray(s, float), 1)

    def deriv2(self, s, h=None):
        return self._spl(np.asarray(s, float), 2)


def geodesics_between(m: MetricField, pairs, step=DEFAULT_STEP, names=None, tol=1e-13, maxit=30):
    """Geodesic edges for a batch of ``(A, B, v0, v1)``; Newton on the exponential map."""
    n = len(pairs)
    names = names or [""] * n
    if m.kind == "euclidean":
        return [SegmentEdge(A, B, v0, v1, "geodesic", nm) for (A, B, v0, v1), nm in zip(pairs, names)]
    A = np.array([p[0] for p in pairs], float)
    B = np.array([p[1] for p in pairs], float)
    V = B - A  # chart velocity of exp_A; Newton corrects it
    h = 1e-7
    probe = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h]], float)
    hstep = min(step, 1e-3)
    for _ in range(maxit):
        Q, _ = exp_map(m, np.repeat(A, 5, 0), (V[:, None, :] + probe[None]).reshape(-1, 2), hstep)
        Q = Q.reshape(n, 5, 2)
        f = Q[:, 0] - B
        if np.max(np.hypot(f[:, 0], f[:, 1])) < tol:
            break
        Jc = np.stack([(Q[:, 1] - Q[:, 2]) / (2 * h), (Q[:, 3] - Q[:, 4]) / (2 * h)], -1)
        V = V + np.linalg.solve(Jc, -f[..., None])[..., 0]
        if not np.all(np.isfinite(V)):
            raise DomainError("geodesic edge shooting diverged")
    else:
        if np.max(np.hypot(*(exp_map(m, A, V, hstep)[0] - B).T)) > 1e3 * tol:
            raise DomainError("geodesic edge shooting did not converge")
    L = m.norm(A, V)
    sh = min(step, float(L.min()) / 50)
    traces = shoot_many(m, A, V, (0.0, float(L.max()) + 2 * sh), sh)
    return [TraceEdge(tr, Li, p[2], p[3], nm) for tr, Li, p, nm in zip(traces, L, pairs, names)]


def geodesic_between(m: MetricField, A, B, v0: int, v1: int, step=DEFAULT_STEP, name=""):
    """Geodesic edge from ``A`` to ``B``."""
    return geodesics_between(m, [(A, B, v0, v1)], step, [name])[0]


# ------------------------------------------------------------------ tiling
@dataclass(frozen=True)
class Location:
    kind: str  # 'tile' | 'edge' | 'vertex'
    id: int


@dataclass
class Tiling:
    """Vertices, edges and curvilinear-triangle tiles.

    Parameters
    ----------
    vertices : array (nv, 2)
    edges : list of Edge
    tiles : list of edge-id triples
    metric : MetricField
        Used for g-angles in tangent cones.
    boundary : Boundary, optional
        Domain boundary (points outside raise :class:`DomainError` in locate).
    """

    vertices: np.ndarray
    edges: list
    tiles: list
    metric: MetricField
    boundary: Optional[Boundary] = None
    vertex_names: Optional[list] = None
    edge_names: Optional[list] = None
    tile_names: Optional[list] = None
    _built: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, float)
        self.tiles = [tuple(int(e) for e in t) for t in self.tiles]
        nv, ne, nt = len(self.vertices), len(self.edges), len(self.tiles)
        self.vertex_names = self.vertex_names or [f"v{i}" for i in range(nv)]
        self.edge_names = self.edge_names or [f"e{i}" for i in range(ne)]
        self.tile_names = self.tile_names or [f"T{i}" for i in range(nt)]
        for e in self.edges:
            if not (0 <= e.v0 < nv and 0 <= e.v1 < nv):
                raise TilingError(f"edge {e.name} references an unknown vertex")
        for t in self.tiles:
            if len(t) != 3 or any(not 0 <= e < ne for e in t):
                raise TilingError(f"tile {t} must reference three known edges")
        self._loops = [self._loop(k) for k in range(nt)]

    # ------------------------------------------------------------ structure
    def _loop(self, k):
        """Ordered (edge, forward) pairs and vertices of tile ``k``, CCW in the chart."""
        ids = list(self.tiles[k])
        e0 = ids.pop(0)
        order = [(e0, True)]
        cur = self.edges[e0].v1
        start = self.edges[e0].v0
        while ids:
            for i, e in enumerate(ids):
                E = self.edges[e]
                if E.v0 == cur:
                    order.append((e, True))
                    cur = E.v1
                    ids.pop(i)
                    break
                if E.v1 == cur:
                    order.append((e, False))
                    cur = E.v0
                    ids.pop(i)
                    break
            else:
                raise TilingError(f"tile {self.tile_names[k]} edges do not form a closed loop")
        if cur != start:
            raise TilingError(f"tile {self.tile_names[k]} edges do not form a closed loop")
        pts = self._loop_points(order)
        if Polygon(pts).exterior.is_ccw:
            return order
        return [(e, not f) for e, f in reversed(order)]

    def _loop_points(self, order):
        parts = []
        for e, fwd in order:
            P = self.edges[e].polyline
            parts.append(P[:-1] if fwd else P[::-1][:-1])
        return np.vstack(parts)

    def loop(self, k):
        return self._loops[k]

    def polygon(self, k) -> Polygon:
        key = ("poly", k)
        if key not in self._built:
            poly = Polygon(self._loop_points(self._loops[k]))
            shapely.prepare(poly)
            self._built[key] = poly
        return self._built[key]

    def edge_line(self, e) -> LineString:
        key = ("line", e)
        if key not in self._built:
            self._built[key] = LineString(self.edges[e].polyline)
        return self._built[key]

    @property
    def edge_tree(self) -> STRtree:
        if "tree" not in self._built:
            self._built["tree"] = STRtree([self.edge_line(e) for e in range(len(self.edges))])
        return self._built["tree"]

    @property
    def segment_tree(self):
        """STRtree over individual polyline segments; ``segment_edge`` maps hits to edges."""
        if "segtree" not in self._built:
            segs, owner = [], []
            for e in range(len(self.edges)):
                P = self.edges[e].polyline
                segs.append(np.stack([P[:-1], P[1:]], 1))
                owner.append(np.full(len(P) - 1, e))
            self._built["segtree"] = STRtree(shapely.linestrings(np.concatenate(segs)))
            self._built["segowner"] = np.concatenate(owner)
        return self._built["segtree"]

    @property
    def segment_edge(self) -> np.ndarray:
        self.segment_tree
        return self._built["segowner"]

    def edge_tiles(self, e):
        """Tiles adjacent to edge ``e`` as ``(tile, interior_on_left_of_edge)`` pairs."""
        key = ("adj", e)
        if key not in self._built:
            out = []
            for k, lp in enumerate(self._loops):
                for ee, fwd in lp:
                    if ee == e:
                        out.append((k, fwd))
            self._built[key] = out
        return self._built[key]

    def tile_vertices(self, k):
        out = []
        for e, fwd in self._loops[k]:
            out.append(self.edges[e].v0 if fwd else self.edges[e].v1)
        return out

    def vertex_tiles(self, v):
        return [k for k in range(len(self.tiles)) if v in self.tile_vertices(k)]

    def vertex_edges(self, v):
        return [i for i, e in enumerate(self.edges) if v in (e.v0, e.v1)]

    def is_boundary_vertex(self, v):
        return any(self.edges[e].kind == "boundary" for e in self.vertex_edges(v))

    def tile_edges_at(self, k, v):
        """The two edges of tile ``k`` at vertex ``v``: (leaving CCW, arriving CCW)."""
        lp = self._loops[k]
        out_e = in_e = None
        for e, fwd in lp:
            E = self.edges[e]
            start, end = (E.v0, E.v1) if fwd else (E.v1, E.v0)
            if start == v:
                out_e = e
            if end == v:
                in_e = e
        if out_e is None or in_e is None:
            raise TilingError(f"vertex {v} is not a vertex of tile {self.tile_names[k]}")
        return out_e, in_e

    # --------------------------------------------------------------- locate
    def locate(self, p) -> Location:
        """Classify a chart point as vertex, edge or tile (band ``1e-9`` around the skeleton)."""
        p = np.asarray(p, float)
        if self.boundary is not None and float(self.boundary.rho(p)) < -EDGE_TOL:
            raise DomainError("point outside the domain")
        dv = np.hypot(*(self.vertices - p).T)
        if dv.min() <= EDGE_TOL:
            return Location("vertex", int(np.argmin(dv)))
        hits = self.segment_tree.query(shapely.points(p), predicate="dwithin", distance=NEAR_BAND)
        near = np.unique(self.segment_edge[hits])
        if len(near):
            best = None
            for e in near:
                s, q, sd = self.edges[int(e)].closest(p)
                if best is None or abs(sd) < abs(best[2]):
                    best = (int(e), s, sd)
            e, s, sd = best
            if abs(sd) <= EDGE_TOL:
                return Location("edge", e)
            want_left = sd > 0
            for k, left in self.edge_tiles(e):
                if left == want_left:
                    return Location("tile", k)
            raise DomainError("point outside the domain")
        for k in range(len(self.tiles)):
            if shapely.contains_xy(self.polygon(k), p[0], p[1]):
                return Location("tile", k)
        raise DomainError("point not covered by any tile")

    def locate_many(self, P) -> np.ndarray:
        """Vectorised locate returning tile ids, or -1 for the skeleton.

        Raises :class:`DomainError` for points outside the domain.
        """
        P = np.atleast_2d(np.asarray(P, float))
        out = np.full(len(P), -2, dtype=int)
        near = np.zeros(len(P), bool)
        pts = shapely.points(P)
        idx = self.segment_tree.query(pts, predicate="dwithin", distance=NEAR_BAND)
        near[np.unique(idx[0])] = True
        dv = np.min(np.hypot(P[:, None, 0] - self.vertices[None, :, 0],
                             P[:, None, 1] - self.vertices[None, :, 1]), axis=1)
        near |= dv <= NEAR_BAND
        far = np.flatnonzero(~near)
        for k in range(len(self.tiles)):
            inside = shapely.contains_xy(self.polygon(k), P[far, 0], P[far, 1])
            out[far[inside]] = k
        for i in np.flatnonzero(near | (out == -2)):
            loc = self.locate(P[i])
            out[i] = loc.id if loc.kind == "tile" else -1
        return out

    # -------------------------------------------------------------- cones
    def tangent_cone(self, v: int, k: int, omega, nu):
        """Sector ``(lo, hi)`` of tile ``k`` at vertex ``v`` in the frame ``(omega, nu)``.

        ``lo`` lies in ``[-pi, pi)`` and ``hi = lo + aperture``.
        """
        m = self.metric
        p = self.vertices[v]
        out_e, in_e = self.tile_edges_at(k, v)
        a = float(m.angle_in_frame(p, self.edges[out_e].outgoing(v), omega, nu))
        b = float(m.angle_in_frame(p, self.edges[in_e].outgoing(v), omega, nu))
        ap = (b - a) % (2 * np.pi)
        if ap < 1e-8 or ap > 2 * np.pi - 1e-8:
            raise DegenerateTileError(f"tile {self.tile_names[k]} has a degenerate cone at "
                                      f"vertex {self.vertex_names[v]}")
        lo = (a + np.pi) % (2 * np.pi) - np.pi
        return lo, lo + ap

    def fan(self, v: int, omega, nu):
        """All cones at ``v`` sorted by start angle: list of ``(lo, hi, tile)``."""
        cones = [(*self.tangent_cone(v, k, omega, nu), k) for k in self.vertex_tiles(v)]
        return sorted(cones)

    def classify_cones(self, cones):
        """Classify cones ``(lo, hi, tile)`` against the upper half plane ``(0, pi)``.

        Returns ``{tile: 'first' | 'tangent' | 'corner'}``: a cone meeting the
        lower half plane is first-type, a cone inside the closed upper half
        plane touching the axis is tangent, and a cone inside the open upper
        half plane (apart from the apex) is a corner.
        """
        out = {}
        for lo, hi, k in cones:
            lo_n = (lo + np.pi) % (2 * np.pi) - np.pi
            hi_n = lo_n + (hi - lo)
            # snap near-axis edges onto the axis
            for val in (lo_n, hi_n):
                for axis in (0.0, np.pi, -np.pi, 2 * np.pi):
                    dist = abs(val - axis)
                    if SNAP_TOL < dist <= AMBIG_TOL:
                        raise TangencyAmbiguityError(
                            f"cone of tile {self.tile_names[k]} is within {dist:.1e} of the "
                            "level-set tangent")
            if abs(lo_n + np.pi) <= SNAP_TOL:
                lo_n, hi_n = np.pi, np.pi + (hi - lo)
            if abs(lo_n) <= SNAP_TOL:
                lo_n = 0.0
            if abs(hi_n - np.pi) <= SNAP_TOL:
                hi_n = np.pi
            if lo_n >= 0.0 and hi_n <= np.pi:
                touches = lo_n == 0.0 or hi_n == np.pi
                out[k] = "tangent" if touches else "corner"
            else:
                out[k] = "first"
        return out

    def classify_at_vertex(self, v: int, omega, nu):
        return self.classify_cones(self.fan(v, omega, nu))

    # ------------------------------------------------------------ validate
    def validate(self, n_samples=100_000, seed=0, geodesic_tol=1e-6, metric_step=DEFAULT_STEP):
        """Check incidence, overlaps, cover, T-junctions and geodesic edges.

        Returns a dict with ``ok`` and a list of ``violations``; each violation
        has an ``item`` key naming the broken tiling requirement.
        """
        viol = []
        nv = len(self.vertices)
        # endpoints
        for i, e in enumerate(self.edges):
            for end, v in ((0.0, e.v0), (1.0, e.v1)):
                if np.hypot(*(e.point(end) - self.vertices[v])) > 1e-7:
                    viol.append({"item": "incidence", "edge": self.edge_names[i],
                                 "message": "edge endpoint does not match its vertex"})
        # edge sharing
        for i, e in enumerate(self.edges):
            n = len(self.edge_tiles(i))
            need = 1 if e.kind == "boundary" else 2
            if n != need and not (e.kind != "boundary" and n == 1 and self.boundary is None):
                viol.append({"item": "incidence", "edge": self.edge_names[i],
                             "message": f"edge bounds {n} tiles (expected {need})"})
        # T-junctions: a vertex in the interior of a non-incident edge
        for v in range(nv):
            p = self.vertices[v]
            near = self.edge_tree.query(shapely.points(p), predicate="dwithin", distance=NEAR_BAND)
            for e in near:
                E = self.edges[int(e)]
                if v in (E.v0, E.v1):
                    continue
                if abs(E.closest(p)[2]) < 1e-7:
                    viol.append({"item": "depth", "vertex": self.vertex_names[v],
                                 "edge": self.edge_names[int(e)],
                                 "message": "vertex lies in the interior of an edge (T-junction)"})
        # overlaps
        for a in range(len(self.tiles)):
            for b in range(a + 1, len(self.tiles)):
                ar = self.polygon(a).intersection(self.polygon(b)).area
                if ar > 1e-9 * max(self.polygon(a).area, 1e-12):
                    viol.append({"item": "disjoint", "tiles": [self.tile_names[a], self.tile_names[b]],
                                 "message": f"tile interiors overlap (area {ar:.3e})"})
        # Monte-Carlo cover
        misses = multi = 0
        if n_samples and self.boundary is not None:
            rng = np.random.default_rng(seed)
            allpts = np.vstack([lp for lp in (self.polygon(k).exterior.coords for k in range(len(self.tiles)))])
            lo, hi = allpts.min(0), allpts.max(0)
            P = lo + (hi - lo) * rng.random((n_samples, 2))
            P = P[self.boundary.rho(P) > 1e-7]
            counts = np.zeros(len(P), int)
            for k in range(len(self.tiles)):
                counts += shapely.contains_xy(self.polygon(k), P[:, 0], P[:, 1])
            bad = np.flatnonzero(counts != 1)
            for i in bad:
                try:
                    self.locate(P[i])
                except DomainError:
                    misses += 1
                    continue
                if counts[i] > 1:
                    d = min(abs(self.edges[e].closest(P[i])[2]) for e in range(len(self.edges)))
                    if d > NEAR_BAND:
                        multi += 1
            if misses:
                viol.append({"item": "cover", "message": f"{misses} sample points in no tile"})
            if multi:
                viol.append({"item": "disjoint", "message": f"{multi} sample points in several tiles"})
        # geodesic edges re-shot
        for i, e in enumerate(self.edges):
            if e.kind != "geodesic" or self.metric.kind == "euclidean":
                continue
            v = e.deriv(0.0)
            L = float(self.metric.norm(e.point(0.0), v))
            tr = shoot(self.metric, e.point(0.0), v, (0.0, L + 4 * metric_step), min(metric_step, L / 50))
            err = float(np.hypot(*(tr.position(np.array([L]))[0] - e.point(1.0))))
            if err > geodesic_tol:
                viol.append({"item": "geodesic", "edge": self.edge_names[i],
                             "message": f"re-shot geodesic misses its endpoint by {err:.2e}"})
        return {"ok": not viol, "violations": viol, "cover_misses": misses}


@dataclass
class PiecewiseField:
    """Per-tile constant values; zero on the edge skeleton."""

    tiling: Tiling
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if self.values.shape != (len(self.tiling.tiles),):
            raise TilingError("one value per tile is required")

    def __call__(self, p):
        loc = self.tiling.locate(p)
        return float(self.values[loc.id]) if loc.kind == "tile" else 0.0

    def scaled(self, lam):
        return PiecewiseField(self.tiling, lam * self.values)


def tangent_function(tiling: Tiling, f: PiecewiseField, v: int, omega, nu):
    """Conical description of ``f`` at vertex ``v``: list of ``(lo, hi, tile, value)``."""
    return [(lo, hi, k, float(f.values[k])) for lo, hi, k in tiling.fan(v, omega, nu)]


def classify_at_level(tiling: Tiling, v: int, omega, nu):
    """Partition tiles at vertex ``v`` into first-type, tangent and corner tiles."""
    return tiling.classify_at_vertex(v, omega, nu)
