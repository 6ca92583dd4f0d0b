"""Layer stripping: recover tile values level by level from the boundary inward.

Tiles are bucketed by ``max_tile phi``. At every anchor (a point of the level
set where some tile of the current level attains its maximum) the tiles
touching the anchor are classified against the level-set tangent:

* first-type tiles reach ``{phi > c}`` and are already known;
* tangent tiles are recovered from chords leaving the anchor almost along
  the level set (boundary anchors use the curvature limit, interior anchors a
  single-unknown division);
* corner tiles are recovered together from the corner integrals
  ``I_C(theta, eps)`` through the tangent-plane solver.

In ``simple_geodesic`` mode, ``d/deps I_C`` at interior vertices is assembled
from first-order meeting-time data (Jacobi fields) instead of root finding on
every perturbed chord.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import shapely
from scipy.optimize import minimize_scalar
from shapely.geometry import LineString

from .boundary import (corner_chords, corner_grid, ending_time_transversal, known_part,
                       one_sided_fit, tangent_probe, tangent_tile_value)
from .corner import CornerSystem, derivatives_at_zero, eps_slopes, F_normalize, recover_values
from .domain import DomainGeometry, boundary_taylor
from .errors import (ConjugacyError, DerivativeUnstableError, GeoXrayError,
                     ReconstructionError, TangencyError)
from .forward import _interval_point_label, chord_endpoints, meeting_time_derivative, meeting_times
from .geodesic import _transported_start, nonvanishing_jacobi
from .tiling import Tiling

LEVEL_TOL = 1e-9
ROUNDOFF = 1e-12  # level differences below this are float noise, merged silently
MODES = ("general", "simple_geodesic")


# -------------------------------------------------------------------- plan
@dataclass(frozen=True)
class Anchor:
    """A level-set point where tiles of the current level attain their maximum."""

    id: int
    name: str
    point: np.ndarray
    level: int
    vertex: Optional[int]
    on_boundary: bool
    edge: Optional[int] = None  # for anchors inside an edge


@dataclass
class LayerPlan:
    levels: list  # c_1 > ... > c_K
    tile_level: np.ndarray
    tile_max: np.ndarray
    anchors: list
    worklist: list  # per level: list of (tile, anchor id)
    mode: str = "general"
    top_on_boundary: bool = True
    merged_levels: int = 0

    def to_dict(self, tiling: Tiling) -> dict:
        return {"levels": self.levels, "mode": self.mode,
                "top_level_on_boundary": self.top_on_boundary,
                "tiles": {tiling.tile_names[k]: {"level": int(self.tile_level[k]),
                                                 "max_phi": float(self.tile_max[k])}
                          for k in range(len(tiling.tiles))},
                "anchors": [{"name": a.name, "level": a.level, "point": a.point.tolist(),
                             "boundary": a.on_boundary} for a in self.anchors]}


def _tile_max(domain: DomainGeometry, tiling: Tiling, k: int):
    """Max of phi over a tile (attained on its boundary) with its location."""
    best = (-np.inf, None, None)
    for e, _ in tiling.loop(k):
        E = tiling.edges[e]
        ss = E.s_samples if len(E.s_samples) > 50 else np.linspace(0, 1, 201)
        vals = domain.phi(E.point(ss))
        i = int(np.argmax(vals))
        s_best, v_best = float(ss[i]), float(vals[i])
        if 0 < i < len(ss) - 1:
            r = minimize_scalar(lambda s: -float(domain.phi(E.point(np.array([s])))[0]),
                                bounds=(ss[i - 1], ss[i + 1]), method="bounded",
                                options={"xatol": 1e-12})
            if -r.fun > v_best:
                s_best, v_best = float(r.x), float(-r.fun)
        if v_best > best[0]:
            best = (v_best, e, s_best)
    return best


def plan(tiling: Tiling, domain: DomainGeometry, mode: str = "general") -> LayerPlan:
    """Bucket tiles by ``max phi`` and choose anchors (vertices preferred)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if domain.phi is None:
        raise ReconstructionError("the domain has no foliation")
    nt = len(tiling.tiles)
    vphi = domain.phi(tiling.vertices)
    tmax = np.empty(nt)
    tloc = []
    for k in range(nt):
        v, e, s = _tile_max(domain, tiling, k)
        tmax[k] = v
        tloc.append((e, s))
    order = np.sort(np.unique(tmax))[::-1]
    levels, merged = [], 0
    for c in order:
        if levels and abs(levels[-1] - c) <= LEVEL_TOL * max(1.0, abs(c)):
            merged += abs(levels[-1] - c) > ROUNDOFF * max(1.0, abs(c))
            continue
        levels.append(float(c))
    if merged:
        warnings.warn(f"{merged} foliation levels within {LEVEL_TOL} were merged", stacklevel=2)
    lev = np.array([int(np.argmin(np.abs(np.array(levels) - c))) for c in tmax])
    anchors, index, work = [], {}, [[] for _ in levels]

    def add_anchor(key, name, point, level, vertex, on_boundary, edge=None):
        if key not in index:
            index[key] = len(anchors)
            anchors.append(Anchor(len(anchors), name, np.asarray(point, float), level, vertex,
                                  on_boundary, edge))
        return index[key]

    for L, c in enumerate(levels):
        for k in np.flatnonzero(lev == L):
            tol = 1e-9 * max(1.0, abs(c))
            verts = [v for v in tiling.tile_vertices(k) if abs(vphi[v] - tmax[k]) <= tol]
            if verts:
                for v in verts:
                    a = add_anchor(("v", v), tiling.vertex_names[v], tiling.vertices[v], L, v,
                                   tiling.is_boundary_vertex(v))
                    work[L].append((int(k), a))
            else:
                e, s = tloc[k]
                E = tiling.edges[e]
                a = add_anchor(("e", e, round(s, 9)), f"{tiling.edge_names[e]}@{s:.4f}",
                               E.point(np.array([s]))[0], L, None, E.kind == "boundary", e)
                work[L].append((int(k), a))
        work[L].sort(key=lambda ka: (ka[1], ka[0]))
    top = all(a.on_boundary for a in anchors if a.level == 0)
    return LayerPlan(levels, lev, tmax, anchors, work, mode, top, merged)


# --------------------------------------------------------------- certificate
@dataclass
class TileResult:
    value: float
    method: str
    anchor: str
    residuals: dict = field(default_factory=dict)
    condition: Optional[float] = None
    alternatives: list = field(default_factory=list)  # values found again at later anchors


@dataclass
class Reconstruction:
    values: np.ndarray
    tiles: dict  # tile id -> TileResult
    anchors: list  # per-anchor diagnostics
    plan: LayerPlan
    mode: str
    warnings: list = field(default_factory=list)

    def certificate(self, tiling: Tiling, header: Optional[dict] = None) -> dict:
        out = dict(header or {})
        out.update({
            "mode": self.mode,
            "levels": self.plan.levels,
            "tiles": {tiling.tile_names[k]: {
                "value": r.value, "method": r.method, "anchor": r.anchor,
                "residuals": r.residuals, "condition": r.condition,
                "alternatives": r.alternatives} for k, r in sorted(self.tiles.items())},
            "anchors": self.anchors,
            "warnings": self.warnings,
        })
        return out

    def certificate_json(self, tiling: Tiling, header: Optional[dict] = None) -> str:
        return json.dumps(self.certificate(tiling, header), indent=2, sort_keys=True,
                          default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


# ------------------------------------------------------------------ config
@dataclass(frozen=True)
class ReconstructionConfig:
    n_theta: int = 9
    theta_max_deg: float = 5.0
    n_eps: int = 7
    eps_fraction: float = 1.0 / 20.0  # eps_max = fraction * ball radius
    eps_degree: int = 3
    theta_extra_degree: int = 3  # theta fit degree is N + this
    tangent_eps_max: float = 2e-3
    tangent_degree: int = 3
    interior_tangent_eps: tuple = (0.3, 0.2, 0.1, 0.05, 0.02)  # largest admissible is used
    retries: int = 3
    derivative_tol: float = 1e-2
    threads: int = 1


def ball_radius(tiling: Tiling, v: int) -> float:
    """Half the g(p)-distance to the nearest non-incident edge, capped by half that to other vertices."""
    p = tiling.vertices[v]
    g = tiling.metric.metric_at(p)
    Lc = np.linalg.cholesky(g)  # |x|_g = |L^T x|
    T = lambda X: (np.asarray(X) - p) @ Lc
    inc = set(tiling.vertex_edges(v))
    pt = shapely.points([0.0, 0.0])
    d_edge = min((LineString(T(tiling.edges[e].polyline)).distance(pt)
                  for e in range(len(tiling.edges)) if e not in inc), default=np.inf)
    others = np.delete(tiling.vertices, v, axis=0)
    d_vert = float(np.min(np.linalg.norm(T(others), axis=1))) if len(others) else np.inf
    return 0.5 * min(d_edge, d_vert)


@dataclass(frozen=True)
class AnchorGeometry:
    """Frame, cone fan and tile classes at a vertex anchor."""

    omega: np.ndarray
    nu: np.ndarray
    fan: list
    classes: dict
    tangent: list  # (tile, side): side +1 touches angle 0, -1 touches pi
    corner_tiles: list
    system: Optional[CornerSystem]
    min_aperture: float
    radius: float


def anchor_frame(domain: DomainGeometry, anchor: Anchor):
    p = anchor.point
    return domain.boundary_frame(p) if anchor.on_boundary else domain.level_frame(p)


def anchor_geometry(domain: DomainGeometry, tiling: Tiling, anchor: Anchor) -> AnchorGeometry:
    om, nu = anchor_frame(domain, anchor)
    v = anchor.vertex
    fan = tiling.fan(v, om, nu)
    classes = tiling.classify_cones(fan)
    tangent = []
    for lo, hi, k in fan:
        if classes[k] == "tangent":
            tangent.append((k, 1 if abs(((lo + np.pi) % (2 * np.pi)) - np.pi) < 1e-6 else -1))
    corner = sorted((lo, hi, k) for lo, hi, k in fan if classes[k] == "corner")
    cs = None
    if corner:
        for (_, hi, _), (lo2, _, _) in zip(corner[:-1], corner[1:]):
            if abs(hi - lo2) > 1e-8:
                raise ReconstructionError(f"corner cones at {anchor.name} are not contiguous",
                                          anchor.name)
        cs = CornerSystem.from_angles([corner[0][0]] + [hi for _, hi, _ in corner])
    return AnchorGeometry(om, nu, fan, classes, tangent, [k for _, _, k in corner], cs,
                          min(hi - lo for lo, hi, _ in fan), ball_radius(tiling, v))


def corner_windows(geo: AnchorGeometry, cfg: ReconstructionConfig, attempt: int = 0):
    """theta and eps grids of a corner solve; each retry shrinks both windows."""
    half = min(math.radians(cfg.theta_max_deg), geo.min_aperture / 3.0) * 0.6 ** attempt
    thetas = np.linspace(-half, half, cfg.n_theta)
    eps_max = cfg.eps_fraction * geo.radius * 0.5 ** attempt
    return thetas, eps_max * 2.0 ** -np.arange(cfg.n_eps)


# ------------------------------------------------------------- reconstruct
class _AnchorSolver:
    """All work done at one anchor; reads only values fixed before the current level."""

    def __init__(self, domain, tiling, sinogram, known, level_tiles, anchor, mode, cfg,
                 truth=None):
        self.d = domain
        self.t = tiling
        self.m = domain.metric
        self.sino = sinogram
        self.known = dict(known)
        self.level_tiles = set(level_tiles)
        self.a = anchor
        self.mode = mode
        self.cfg = cfg
        self.results = {}
        self.diag = {"anchor": anchor.name, "level": anchor.level, "boundary": anchor.on_boundary}
        self.warnings = []

    def run(self):
        if self.a.vertex is None:
            self.omega, self.nu = anchor_frame(self.d, self.a)
            return self._edge_anchor()
        geo = anchor_geometry(self.d, self.t, self.a)
        self.omega, self.nu = geo.omega, geo.nu
        self.diag["classes"] = {self.t.tile_names[k]: c for k, c in geo.classes.items()}
        for k, c in geo.classes.items():
            if c == "first" and k not in self.known:
                raise ReconstructionError(
                    f"first-type tile {self.t.tile_names[k]} at {self.a.name} is not known yet",
                    self.a.name)
        for k, side in geo.tangent:
            if self.a.on_boundary:
                self._tangent_boundary(k, side)
            else:
                self._tangent_interior(k, side)
            self.known[k] = self.results[k].value
        if geo.corner_tiles:
            self._corner(geo)
        return self

    # -- tangent tiles at boundary anchors
    def _tangent_boundary(self, k, side):
        p = self.a.point
        eps = self.cfg.tangent_eps_max * 2.0 ** -np.arange(self.cfg.n_eps)
        Q, W = tangent_probe(self.d, p, side, eps)
        If = np.asarray(self.sino(Q, W), float)
        bt = boundary_taylor(self.d, p)
        est = tangent_tile_value(self.d, p, eps, If, bt.kappa, self.cfg.tangent_degree)
        # single-unknown division on the same probes (known geometry)
        lens = []
        for tr in self.d.shoot_chords(Q, W):
            mt = meeting_times(self.d, self.t, tr)
            lens.append(mt.tile_lengths(len(self.t.tiles))[k])
            if any(lab not in (k,) and lab not in self.known for lab in mt.labels if lab >= 0):
                raise ReconstructionError(f"probe at {self.a.name} meets an unknown tile",
                                          self.a.name)
        lens = np.array(lens)
        div = If / np.where(lens > 0, lens, np.nan)
        self.results[k] = TileResult(est.value, "tangent-boundary", self.a.name, {
            "kappa": bt.kappa, "fit_residual": est.residual,
            "division_value": float(np.nanmedian(div)),
            "division_spread": float(np.nanmax(div) - np.nanmin(div)),
            "eps_max": float(eps.max())})

    # -- tangent tiles at interior anchors
    def _tangent_interior(self, k, side):
        p = self.a.point
        vals = []
        for e in self.cfg.interior_tangent_eps:
            V = side * self.omega + e * self.nu
            tr = self.d.shoot_chords(p[None], V[None])[0]
            mt = meeting_times(self.d, self.t, tr)
            L = mt.tile_lengths(len(self.t.tiles))[k]
            unknown = [lab for lab in mt.labels if lab >= 0 and lab != k and lab not in self.known]
            if unknown or L <= 0:
                continue
            If = float(self.sino(p[None], V[None])[0])
            vals.append((If - known_part(mt, self.known)) / L)
        if not vals:
            raise ReconstructionError(f"no admissible probe for tangent tile "
                                      f"{self.t.tile_names[k]} at {self.a.name}", self.a.name)
        vals = np.array(vals)
        self.results[k] = TileResult(float(vals[0]), "tangent-interior", self.a.name,
                                     {"spread": float(vals.max() - vals.min()),
                                      "n_probes": int(len(vals))})

    def _edge_anchor(self):
        """Anchor inside an edge: the tile(s) of this level there are tangent tiles."""
        e = self.a.edge
        om, nu = self.omega, self.nu
        for k, left in self.t.edge_tiles(e):
            if k not in self.level_tiles or k in self.known:
                continue
            side = None
            for sd in (1, -1):
                q = self.a.point + 1e-6 * (sd * om + 0.05 * nu)
                if _interval_point_label(self.t, q) == k:
                    side = sd
            if side is None:
                raise ReconstructionError(f"cannot orient tile {self.t.tile_names[k]} at "
                                          f"{self.a.name}", self.a.name)
            if self.a.on_boundary:
                self._tangent_boundary(k, side)
            else:
                self._tangent_interior(k, side)
            self.known[k] = self.results[k].value
        return self

    # -- corner tiles
    def _corner(self, geo):
        cs, tiles = geo.system, geo.corner_tiles
        mode = self.mode if not self.a.on_boundary else "general"
        last = None
        for attempt in range(self.cfg.retries + 1):
            thetas, eps = corner_windows(geo, self.cfg, attempt)
            r = geo.radius
            try:
                if mode == "simple_geodesic":
                    try:
                        slopes, extra = self._simple_slopes(thetas, eps, tiles, cs, r)
                    except ConjugacyError as exc:
                        self.warnings.append(f"{self.a.name}: {exc}; falling back to general mode")
                        mode = "general"
                        slopes, extra = self._general_slopes(thetas, eps, tiles, r)
                else:
                    slopes, extra = self._general_slopes(thetas, eps, tiles, r)
                t, F = F_normalize(thetas, slopes)
                der = derivatives_at_zero(t, F, cs.N - 1, cs.N + self.cfg.theta_extra_degree,
                                          self.cfg.derivative_tol)
                break
            except (TangencyError, DerivativeUnstableError) as exc:
                last = exc
                self.warnings.append(f"{self.a.name}: attempt {attempt} regridded ({exc})")
        else:
            raise ReconstructionError(f"corner solve at {self.a.name} failed: {last}", self.a.name)
        vals = recover_values(cs, der.values)
        self.diag["corner"] = {"system": cs.to_dict(), "thetas": thetas.tolist(),
                               "eps": eps.tolist(), "ball_radius": r, "b_raw": der.values.tolist(),
                               "values": vals.tolist(), "theta_disagreement": der.disagreement,
                               "mode": mode, "attempts": attempt + 1, **extra}
        for k, a in zip(tiles, vals):
            self.results[k] = TileResult(float(a), "corner", self.a.name,
                                         {"theta_disagreement": der.disagreement,
                                          "eps_disagreement": extra.get("eps_disagreement"),
                                          "mode": mode}, cs.condition)

    def _general_slopes(self, thetas, eps, tiles, r):
        grid = corner_grid(self.d, self.t, self.a.point, self.omega, self.nu, thetas, eps,
                           self.sino, self.known)
        viol = self._ball_violations(thetas, eps, tiles, r)
        slopes, dis = eps_slopes(eps, grid.I_C, self.cfg.eps_degree, intercept=True)
        return slopes, {"eps_disagreement": dis, "ball_violations": viol}

    def _ball_violations(self, thetas, eps, tiles, r):
        """Chords that meet an unknown tile away from the corner ball."""
        Q, W = corner_chords(self.d, self.a.point, self.omega, self.nu, thetas[[0, -1]],
                             eps[[0]])
        g = self.m.metric_at(self.a.point)
        bad = 0
        for tr in self.d.shoot_chords(Q, W):
            mt = meeting_times(self.d, self.t, tr)
            tm = 0.5 * (mt.times[1:] + mt.times[:-1])
            X = tr.position(tm) - self.a.point
            dist = np.sqrt(np.einsum("ni,ij,nj->n", X, g, X))
            for lab, dd in zip(mt.labels, dist):
                if lab >= 0 and lab not in self.known and (lab not in tiles or dd > r):
                    bad += 1
        return bad

    def _simple_slopes(self, thetas, eps, tiles, cs, r):
        """``d/deps I_C(theta, 0)`` from If fits and Jacobi meeting-time derivatives."""
        m, d, p = self.m, self.d, self.a.point
        om, nu = self.omega, self.nu
        slopes, residuals = [], []
        for th in thetas:
            w_t = math.cos(th) * om + math.sin(th) * nu
            w_n = -math.sin(th) * om + math.cos(th) * nu
            base = d.shoot_chords(p[None], w_t[None])[0]
            t_lo, t_hi = chord_endpoints(d, base)
            t_end = float(base.t[-1])
            if t_end <= t_hi:
                raise ConjugacyError("trace too short to place the focal point outside the domain")
            t0 = 0.5 * (t_hi + t_end)
            J = nonvanishing_jacobi(m, base, w_n, t0, inside=lambda X: d.rho(X) > 0)
            dj0 = float(J.dj[int(np.argmin(np.abs(base.t)))])
            # If along the Jacobi family
            Q, W = [], []
            for e in eps:
                q, w = _transported_start(m, p, e * w_n, w_t + e * dj0 * w_n, d.step)
                Q.append(q)
                W.append(m.normalize(q, w))
            If = np.asarray(self.sino(np.array(Q), np.array(W)), float)
            c, res = one_sided_fit(eps, If, self.cfg.eps_degree, intercept=True)
            c1 = float(c[1])
            known_rate = self._known_rate(base, J, t_lo, t_hi, th, tiles, r)
            slopes.append(c1 - known_rate)
            residuals.append(float(np.max(np.abs(res))))
        return np.array(slopes), {"eps_disagreement": float(max(residuals)),
                                  "ball_violations": 0}

    def _known_rate(self, base, J, t_lo, t_hi, th, tiles, r):
        """``sum_known a (t'_end - t'_start)`` over the intervals of the base chord."""
        m, d, v = self.m, self.d, self.a.vertex
        inc = set(self.t.vertex_edges(v))
        cross = []  # (t0, t', edge)
        mt = meeting_times(d, self.t, base)
        for c in mt.crossings:
            if c.edge in inc and abs(c.t) < 1e-7:
                continue
            u = self.t.edges[c.edge].deriv(c.s)
            _, tp = meeting_time_derivative(m, base, J, c.t, u)
            cross.append((c.t, tp, c.edge))
        for e in inc:
            E = self.t.edges[e]
            if E.kind == "boundary":
                continue
            psi = float(m.angle_in_frame(self.a.point, E.outgoing(v), self.omega, self.nu)) - th
            psi = (psi + np.pi) % (2 * np.pi) - np.pi
            if 0 < psi < np.pi:
                cross.append((0.0, 1.0 / math.tan(psi), e))
        cross.sort(key=lambda c: (round(c[0], 12), c[1]))
        ends = [(t_lo, ending_time_transversal(d, base, J, t_lo), -1)] + cross + \
               [(t_hi, ending_time_transversal(d, base, J, t_hi), -1)]
        delta = 1e-5 * r
        total = 0.0
        for (ta, pa, _), (tb, pb, _) in zip(ends[:-1], ends[1:]):
            tau = 0.5 * (ta + tb) + delta * 0.5 * (pa + pb)
            q = base.position(np.array([tau]))[0] + delta * J.J(np.array([tau]))[0]
            lab = _interval_point_label(self.t, q)
            if lab is None:
                raise TangencyError(f"cannot label a first-order interval at {self.a.name}")
            if lab in self.known:
                total += self.known[lab] * (pb - pa)
            elif lab not in tiles:
                raise ReconstructionError(f"chord at {self.a.name} meets unknown tile "
                                          f"{self.t.tile_names[lab]}", self.a.name)
        return total


def reconstruct(domain: DomainGeometry, tiling: Tiling, sinogram: Callable, mode: str = "general",
                config: Optional[ReconstructionConfig] = None, layer_plan: Optional[LayerPlan] = None,
                threads: Optional[int] = None) -> Reconstruction:
    """Recover all tile values from ray-transform data.

    Parameters
    ----------
    sinogram : callable
        ``sinogram(Q, W) -> If`` for chords through points ``Q`` with velocities ``W``.
    mode : {'general', 'simple_geodesic'}
    threads : int, optional
        Anchors of one level run concurrently; results are merged in anchor
        order, so the output does not depend on the thread count.
    """
    cfg = config or ReconstructionConfig()
    if mode == "simple_geodesic":
        bad = [tiling.edge_names[i] for i, e in enumerate(tiling.edges)
               if e.kind not in ("geodesic", "boundary")]
        if bad:
            raise ReconstructionError(f"simple_geodesic mode needs a geodesic tiling; "
                                      f"non-geodesic edges: {bad[:5]}")
    lp = layer_plan or plan(tiling, domain, mode)
    known: dict = {}
    tiles: dict = {}
    diags, warns = [], []
    nthreads = threads if threads is not None else cfg.threads
    for L, c in enumerate(lp.levels):
        level_tiles = [k for k, _ in lp.worklist[L]]
        anchor_ids = sorted({a for _, a in lp.worklist[L]})
        solvers = [_AnchorSolver(domain, tiling, sinogram, known, level_tiles, lp.anchors[a], mode,
                                 cfg) for a in anchor_ids]

        def work(s):
            try:
                return s.run()
            except ReconstructionError:
                raise
            except GeoXrayError as exc:
                raise ReconstructionError(f"anchor {s.a.name}: {exc}", s.a.name) from exc

        if nthreads > 1 and len(solvers) > 1:
            with ThreadPoolExecutor(nthreads) as ex:
                done = list(ex.map(work, solvers))
        else:
            done = [work(s) for s in solvers]
        for s in done:
            diags.append(s.diag)
            warns.extend(s.warnings)
            for k, res in sorted(s.results.items()):
                if k in known:
                    continue
                if k in tiles:
                    tiles[k].alternatives.append({"anchor": res.anchor, "value": res.value,
                                                  "difference": res.value - tiles[k].value})
                elif k in level_tiles:
                    tiles[k] = res
        for k in level_tiles:
            if k not in tiles:
                raise ReconstructionError(f"tile {tiling.tile_names[k]} was not recovered at "
                                          f"level {c}", None)
            known[k] = tiles[k].value
    values = np.array([tiles[k].value for k in range(len(tiling.tiles))])
    return Reconstruction(values, tiles, diags, lp, mode, warns)
