"""Explicit stability quantities: corner condition numbers, windowed C^k norms and bounds.

Norm convention: ``||I||_{C^k}`` is the sum over multi-indices ``|beta| <= k``
of ``sup |d^beta I|`` over the sampling window. Derivatives come from the same
kind of polynomial fits the reconstruction uses and are evaluated on the grid
nodes and on the ``eps = 0`` edge of the window (where the reconstruction reads
them off).

Corner constant: with ``F(t) = cos^2(theta) g(theta)``, ``theta = arctan t`` and
``g = d/deps I_C(., 0)``,

    [t^k] F = sum_j M_kj g^(j)(0),   M_kj = [t^k] (1 + t^2)^-1 (arctan t)^j / j!,

so ``|a| <= ||A^-1||_inf * max_k sum_j |M_kj| * ||I_C||_{C^N}``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .boundary import corner_chords, tangent_probe
from .corner import CornerSystem
from .domain import DomainGeometry, boundary_curvature_samples, boundary_taylor
from .forward import Region, _ball_roots, _interval_point_label, meeting_times
from .layers import (LayerPlan, ReconstructionConfig, anchor_frame, anchor_geometry,
                     corner_windows, plan)
from .svg import bar_chart
from .tiling import Tiling


# ------------------------------------------------------------- constants
def corner_condition(cs: CornerSystem) -> float:
    """``||A^-1||_inf`` from the explicit inverse."""
    return float(np.max(np.sum(np.abs(cs.A_inv), axis=1)))


def dense_condition(cs: CornerSystem) -> float:
    """``||A^-1||_inf`` from an LU-based dense inverse (cross-check)."""
    return float(np.max(np.sum(np.abs(np.linalg.inv(cs.A)), axis=1)))


def _series_mul(a, b, n):
    out = [Fraction(0)] * n
    for i, x in enumerate(a[:n]):
        if x:
            for j, y in enumerate(b[:n - i]):
                out[i + j] += x * y
    return out


@lru_cache(maxsize=None)
def reparam_matrix(n: int) -> tuple:
    """Exact ``M_kj = [t^k] (1+t^2)^-1 (arctan t)^j / j!`` for ``0 <= j, k < n``."""
    inv = [Fraction((-1) ** (k // 2)) if k % 2 == 0 else Fraction(0) for k in range(n)]
    atan = [Fraction((-1) ** (k // 2), k) if k % 2 == 1 else Fraction(0) for k in range(n)]
    rows = [[Fraction(0)] * n for _ in range(n)]
    power = [Fraction(1)] + [Fraction(0)] * (n - 1)
    for j in range(n):
        col = _series_mul(inv, power, n)
        for k in range(n):
            rows[k][j] = col[k] / math.factorial(j)
        power = _series_mul(power, atan, n)
    return tuple(tuple(r) for r in rows)


def reparam_constant(n: int) -> float:
    """``max_k sum_j |M_kj|``."""
    M = reparam_matrix(n)
    return float(max(sum(abs(x) for x in row) for row in M))


def corner_constant(cs: CornerSystem) -> float:
    """``C_C`` in ``|a| <= C_C ||I_C||_{C^N}``."""
    return corner_condition(cs) * reparam_constant(cs.N)


# ----------------------------------------------------------------- norms
@dataclass(frozen=True)
class NormEstimate:
    value: float
    uncertainty: float
    order: int
    sups: dict  # "d_theta^i d_eps^j" -> sup

    def to_dict(self):
        return asdict(self)

    def scaled(self, s: float) -> "NormEstimate":
        return NormEstimate(s * self.value, s * self.uncertainty, self.order,
                            {k: s * v for k, v in self.sups.items()})


def _fit2(u, s, I, dth, deps, intercept):
    j0 = 0 if intercept else 1
    U, S = np.meshgrid(u, s, indexing="ij")
    cols = [(i, j) for i in range(dth + 1) for j in range(j0, deps + 1)]
    V = np.stack([U.ravel() ** i * S.ravel() ** j for i, j in cols], -1)
    c, *_ = np.linalg.lstsq(V, I.ravel(), rcond=None)
    return dict(zip(cols, c))


def _deriv2(coef, u, s, bi, bj):
    """``d_u^bi d_s^bj`` of the fitted polynomial at points ``(u, s)``."""
    out = np.zeros(np.broadcast(u, s).shape)
    for (i, j), c in coef.items():
        if i < bi or j < bj:
            continue
        fi = math.factorial(i) / math.factorial(i - bi)
        fj = math.factorial(j) / math.factorial(j - bj)
        out = out + c * fi * fj * u ** (i - bi) * s ** (j - bj)
    return out


def restricted_norms(I, eps, order: int, thetas=None, theta_degree: Optional[int] = None,
                     eps_degree: int = 3, intercept: bool = True) -> NormEstimate:
    """Windowed sum-of-sups ``C^order`` norm of samples on an ``eps`` or ``(theta, eps)`` grid.

    ``I`` has shape ``(n_eps,)`` or ``(n_theta, n_eps)``. The order-0 term is
    the plain sup of the samples; derivative terms come from a tensor
    polynomial fit evaluated on the nodes and on the ``eps = 0`` edge. The
    uncertainty is the change when both fit degrees drop by one.
    """
    eps = np.asarray(eps, float)
    I = np.asarray(I, float)
    one_d = thetas is None
    if one_d:
        thetas = np.zeros(1)
        I = I[None]
        theta_degree = 0
    thetas = np.asarray(thetas, float)
    if theta_degree is None:
        theta_degree = min(len(thetas) - 1, order + 2)
    wt = float(np.max(np.abs(thetas))) or 1.0
    we = float(np.max(eps))
    u, s = thetas / wt, eps / we
    U = np.concatenate([np.repeat(u, len(s)), u, [0.0]])
    S = np.concatenate([np.tile(s, len(u)), np.zeros(len(u)), [0.0]])

    def norm(dth, deps):
        coef = _fit2(u, s, I, dth, deps, intercept)
        sups = {"d_theta^0 d_eps^0": float(np.max(np.abs(I)))}
        total = sups["d_theta^0 d_eps^0"]
        for k in range(1, order + 1):
            for bi in range(k + 1):
                bj = k - bi
                if one_d and bi:
                    continue
                d = _deriv2(coef, U, S, bi, bj) / (wt ** bi * we ** bj)
                val = float(np.max(np.abs(d)))
                sups[f"d_theta^{bi} d_eps^{bj}"] = val
                total += val
        return total, sups

    total, sups = norm(theta_degree, eps_degree)
    alt, _ = norm(max(theta_degree - 1, 0) if not one_d else 0, max(eps_degree - 1, 1))
    return NormEstimate(total, abs(total - alt), order, sups)


def edge_curvature(tiling: Tiling, e: int, p) -> float:
    """Geodesic curvature of edge ``e`` at its point nearest ``p`` (unsigned)."""
    m = tiling.metric
    E = tiling.edges[e]
    s = E.closest(np.asarray(p, float))[0]
    x = E.point(np.array([s]))[0]
    d1 = E.deriv(np.array([s]))[0]
    d2 = E.deriv2(np.array([s]))[0]
    cov = d2 - m.geodesic_acceleration(x[None], d1[None])[0]
    sp = float(m.norm(x, d1))
    n = m.rot90(x, d1 / sp)
    return abs(float(m.inner(x, cov, n))) / sp ** 2


# --------------------------------------------------------------- geometry
@dataclass
class TangentGeometry:
    tile: int
    anchor: str
    kappa: float
    boundary: bool
    eps: np.ndarray
    lengths: np.ndarray  # length of each probe inside the tile


@dataclass
class CornerGeometry:
    anchor: str
    tiles: list
    system: CornerSystem
    thetas: np.ndarray
    eps: np.ndarray
    radius: float
    lengths: np.ndarray  # (n_theta, n_eps, n_corner_tiles), restricted to the corner ball


@dataclass
class StabilityGeometry:
    """Value-independent data; any field on the tiling is evaluated linearly from it."""

    tangents: list
    corners: list
    n_tiles: int
    boundary_kappa_max: float
    config: ReconstructionConfig


def _tile_lengths_in_ball(mt, tiles, region):
    out = np.zeros(len(tiles))
    idx = {k: i for i, k in enumerate(tiles)}
    times = mt.times
    for lab, a, b in zip(mt.labels, times[:-1], times[1:]):
        if lab not in idx or b <= a:
            continue
        cuts = np.concatenate([[a], _ball_roots(region, mt.trace, a, b), [b]])
        mids = 0.5 * (cuts[1:] + cuts[:-1])
        inside = region.ball_level(mt.trace.position(mids)) > 0
        out[idx[lab]] += float(np.sum(np.diff(cuts)[inside]))
    return out


def stability_geometry(domain: DomainGeometry, tiling: Tiling,
                       layer_plan: Optional[LayerPlan] = None,
                       config: Optional[ReconstructionConfig] = None,
                       n_boundary: int = 64) -> StabilityGeometry:
    """Probe and corner-grid geometry at every anchor, on the reconstruction's own windows."""
    cfg = config or ReconstructionConfig()
    lp = layer_plan or plan(tiling, domain)
    nt = len(tiling.tiles)
    tangents, corners, seen = [], [], set()
    for a in lp.anchors:
        level_tiles = {k for k, aid in lp.worklist[a.level] if aid == a.id}
        if a.vertex is None:
            om, nu = anchor_frame(domain, a)
            items = []
            for k, _ in tiling.edge_tiles(a.edge):
                if k in level_tiles:
                    for sd in (1, -1):
                        q = a.point + 1e-6 * (sd * om + 0.05 * nu)
                        if _interval_point_label(tiling, q) == k:
                            items.append((k, sd))
            geo = None
        else:
            geo = anchor_geometry(domain, tiling, a)
            om, nu, items = geo.omega, geo.nu, geo.tangent
        for k, side in items:
            if (k, a.id) in seen:
                continue
            seen.add((k, a.id))
            if a.on_boundary:
                eps = cfg.tangent_eps_max * 2.0 ** -np.arange(cfg.n_eps)
                Q, W = tangent_probe(domain, a.point, side, eps)
                kappa = boundary_taylor(domain, a.point).kappa
            else:
                eps = max(cfg.interior_tangent_eps) * 2.0 ** -np.arange(cfg.n_eps)
                V = domain.metric.normalize(np.broadcast_to(a.point, (len(eps), 2)),
                                            side * om[None] + eps[:, None] * nu[None])
                Q, W = np.broadcast_to(a.point, V.shape).copy(), V
                tan_edge = _tangent_edge(tiling, a, k, om)
                kappa = edge_curvature(tiling, tan_edge, a.point) if tan_edge is not None else 0.0
            lens = np.array([meeting_times(domain, tiling, tr).tile_lengths(nt)[k]
                             for tr in domain.shoot_chords(Q, W)])
            tangents.append(TangentGeometry(k, a.name, float(kappa), a.on_boundary, eps, lens))
        if geo is not None and geo.corner_tiles:
            thetas, eps = corner_windows(geo, cfg)
            Q, W = corner_chords(domain, a.point, om, nu, thetas, eps)
            region = Region.corner(geo.corner_tiles, domain.metric, a.point, geo.radius)
            L = np.array([_tile_lengths_in_ball(meeting_times(domain, tiling, tr), geo.corner_tiles,
                                                region) for tr in domain.shoot_chords(Q, W)])
            corners.append(CornerGeometry(a.name, list(geo.corner_tiles), geo.system, thetas, eps,
                                          geo.radius, L.reshape(len(thetas), len(eps), -1)))
    if domain.boundary.closed:
        kb = float(np.max(boundary_curvature_samples(domain, n_boundary)))
    else:
        kb = float("nan")
    return StabilityGeometry(tangents, corners, nt, float(kb), cfg)


def _tangent_edge(tiling: Tiling, a, k: int, omega) -> Optional[int]:
    """Edge of tile ``k`` at the anchor that is tangent to the level set."""
    m = tiling.metric
    if a.vertex is None:
        return a.edge
    best, arg = None, None
    for e, _ in tiling.loop(k):
        E = tiling.edges[e]
        if a.vertex not in (E.v0, E.v1):
            continue
        u = m.normalize(a.point, E.outgoing(a.vertex))
        c = abs(float(m.inner(a.point, u, omega)))
        if best is None or c > best:
            best, arg = c, e
    return arg


# ----------------------------------------------------------------- report
@dataclass
class StabilityReport:
    tangents: list
    corners: list
    global_bound: dict
    boundary_bound: dict
    constants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = all(t["slack"] >= 0 for t in self.tangents)
        ok &= all(tt["slack"] >= 0 for c in self.corners for tt in c["tiles"])
        return bool(ok and self.global_bound["slack"] >= 0)

    def to_dict(self):
        return {"tangent_tiles": self.tangents, "corners": self.corners,
                "global": self.global_bound, "boundary_variant": self.boundary_bound,
                "constants": self.constants, "pass": self.passed}


def stability_report(geometry: StabilityGeometry, values, tile_names: Optional[Sequence] = None
                     ) -> StabilityReport:
    """Per-tile and global inequalities for the field with the given tile values.

    Norms are evaluated on the field divided by ``max |a|`` and scaled back, so the
    report is homogeneous in ``a`` up to one rounding instead of fit roundoff.
    """
    g = geometry
    a = np.asarray(values, float)
    scale = float(np.max(np.abs(a))) if len(a) else 0.0
    unit = a / scale if scale > 0 else a
    name = (lambda k: tile_names[k]) if tile_names is not None else (lambda k: f"T{k}")
    tangents = []
    for tg in g.tangents:
        I = unit[tg.tile] * tg.lengths
        nrm = restricted_norms(I, tg.eps, 1, intercept=False).scaled(scale)
        bound = 0.5 * tg.kappa * nrm.value
        tangents.append({"tile": name(tg.tile), "anchor": tg.anchor, "boundary": tg.boundary,
                         "kappa": tg.kappa, "norm_C1": nrm.value,
                         "norm_uncertainty": nrm.uncertainty, "abs_value": abs(a[tg.tile]),
                         "bound": bound, "slack": bound - abs(a[tg.tile]),
                         "window_eps": [float(tg.eps.min()), float(tg.eps.max())]})
    corners = []
    for cg in g.corners:
        cs = cg.system
        I = cg.lengths @ unit[cg.tiles]
        nrm = restricted_norms(I, cg.eps, cs.N, cg.thetas, cs.N + g.config.theta_extra_degree,
                               g.config.eps_degree, intercept=True).scaled(scale)
        CC = corner_constant(cs)
        bound = CC * nrm.value
        corners.append({
            "anchor": cg.anchor, "m_C": cs.N, "alphas": cs.alphas.tolist(),
            "cond_explicit": corner_condition(cs), "cond_dense": dense_condition(cs),
            "reparam_constant": reparam_constant(cs.N), "C_C": CC,
            "norm": nrm.value, "norm_uncertainty": nrm.uncertainty, "sups": nrm.sups,
            "window": {"theta": [float(cg.thetas.min()), float(cg.thetas.max())],
                       "eps": [float(cg.eps.min()), float(cg.eps.max())], "ball_radius": cg.radius},
            "tiles": [{"tile": name(k), "abs_value": abs(a[k]), "bound": bound,
                       "slack": bound - abs(a[k])} for k in cg.tiles]})
    t_norm = max((t["norm_C1"] for t in tangents), default=0.0)
    c_norm = max((c["norm"] for c in corners), default=0.0)
    C_t = max((t["kappa"] for t in tangents), default=0.0)
    C_c = max((c["C_C"] for c in corners), default=0.0)
    lhs = float(np.max(np.abs(a))) if len(a) else 0.0
    rhs = C_t * t_norm + C_c * c_norm
    gb = {"C_t": C_t, "C_c": C_c, "max_tangent_norm": t_norm, "max_corner_norm": c_norm,
          "max_abs_value": lhs, "bound": rhs, "slack": rhs - lhs}
    bt = [t for t in tangents if t["boundary"]]
    applicable = len(bt) == len(tangents)
    If_norm = max((t["norm_C1"] for t in bt), default=0.0)
    rhs_b = g.boundary_kappa_max * If_norm + C_c * c_norm
    bb = {"applicable": applicable, "C_t_boundary": g.boundary_kappa_max,
          "boundary_data_norm": If_norm, "bound": rhs_b, "slack": rhs_b - lhs}
    consts = {"norm_convention": "sum over |beta| <= k of windowed sups, eps = 0 edge included",
              "reparam_matrix_rows": {str(n): [[str(x) for x in row] for row in reparam_matrix(n)]
                                      for n in sorted({c["m_C"] for c in corners})}}
    return StabilityReport(tangents, corners, gb, bb, consts)


# ----------------------------------------------------------------- output
CSV_COLUMNS = ["kind", "anchor", "tile", "m_C", "cond", "constant", "norm", "abs_value", "bound",
               "slack"]


def write_report(report: StabilityReport, out_dir, header: Optional[dict] = None) -> dict:
    """Write ``stability.json``, ``stability.csv`` and ``condition.svg``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = dict(header or {})
    js = out / "stability.json"
    js.write_text(json.dumps({**header, **report.to_dict()}, indent=2, sort_keys=True))
    cs = out / "stability.csv"
    with cs.open("w", newline="") as fh:
        for k, v in header.items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for t in report.tangents:
            w.writerow(["tangent", t["anchor"], t["tile"], "", "", t["kappa"] / 2, t["norm_C1"],
                        t["abs_value"], t["bound"], t["slack"]])
        for c in report.corners:
            for t in c["tiles"]:
                w.writerow(["corner", c["anchor"], t["tile"], c["m_C"], c["cond_explicit"], c["C_C"],
                            c["norm"], t["abs_value"], t["bound"], t["slack"]])
        gb = report.global_bound
        w.writerow(["global", "", "", "", "", "", "", gb["max_abs_value"], gb["bound"], gb["slack"]])
    sv = out / "condition.svg"
    conds = [c["cond_explicit"] for c in report.corners]
    med = float(np.median(conds)) if conds else 0.0
    sv.write_text(bar_chart([c["anchor"] for c in report.corners], conds,
                            "corner condition numbers ||A^-1||_inf", "||A^-1||_inf",
                            highlight=10 * med if conds else None, header=header, log=True))
    return {"json": str(js), "csv": str(cs), "svg": str(sv)}
