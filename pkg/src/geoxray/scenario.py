"""Scenario files: one YAML document fully determines a run.

Expressions (metric coefficients, conformal factor, foliation, implicit
boundaries) are written in ``x`` and ``y`` and compiled with sympy, which also
supplies their analytic derivatives.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dc_field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import sympy as sp
import yaml

from . import __version__
from .domain import Circle, DomainGeometry, Ellipse, ImplicitCurve, SplineBoundary
from .errors import ScenarioParseError, TilingError
from .metric import MetricField, conformal, euclidean, general, poincare_disk
from .tiling import (ArcEdge, BoundaryArcEdge, PiecewiseField, SegmentEdge, SplineEdge, Tiling,
                     geodesics_between)

_X, _Y = sp.symbols("x y", real=True)


def _expr(text, where):
    try:
        return sp.sympify(str(text), locals={"x": _X, "y": _Y})
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise ScenarioParseError(f"bad expression in {where}: {text!r} ({exc})") from exc


def _fn(expr):
    f = sp.lambdify((_X, _Y), expr, "numpy")
    return lambda x, y: np.broadcast_to(np.asarray(f(x, y), float), np.shape(x)).astype(float)


def _pt_fn(expr):
    f = _fn(expr)
    return lambda P: f(np.asarray(P, float)[..., 0], np.asarray(P, float)[..., 1])


def _grad_fn(expr):
    fx, fy = _fn(sp.diff(expr, _X)), _fn(sp.diff(expr, _Y))
    return lambda P: np.stack([fx(P[..., 0], P[..., 1]), fy(P[..., 0], P[..., 1])], -1)


def _hess_fn(expr):
    h = [[_fn(sp.diff(expr, a, b)) for b in (_X, _Y)] for a in (_X, _Y)]
    return lambda P: np.stack([np.stack([h[i][j](P[..., 0], P[..., 1]) for j in range(2)], -1)
                               for i in range(2)], -2)


# ------------------------------------------------------------------ blocks
def build_metric(block) -> MetricField:
    kind = block.get("kind", "euclidean")
    chart = tuple(block.get("chart", (-10, 10, -10, 10)))
    if kind == "euclidean":
        return euclidean(chart)
    if kind == "poincare":
        return poincare_disk(block.get("half_width", 0.7))
    if kind == "conformal":
        lam = _expr(block["lam"], "metric.lam")
        lx, ly = sp.diff(lam, _X), sp.diff(lam, _Y)
        flx, fly = _fn(lx), _fn(ly)
        return conformal(_fn(lam), chart, dlam=lambda x, y: (flx(x, y), fly(x, y)),
                         lap_lam=_fn(sp.diff(lam, _X, 2) + sp.diff(lam, _Y, 2)))
    if kind == "general":
        gs = [_expr(block[k], f"metric.{k}") for k in ("g11", "g12", "g22")]
        fs = [_fn(g) for g in gs]
        if block.get("analytic_derivatives", True):
            ds = [[_fn(sp.diff(g, v)) for v in (_X, _Y)] for g in gs]
            dco = lambda x, y: np.array([[d(x, y) for d in row] for row in ds])
        else:
            dco = None
        return general(lambda x, y: tuple(f(x, y) for f in fs), chart, dcoeffs=dco)
    raise ScenarioParseError(f"unknown metric kind {kind!r}")


def build_boundary(block):
    shape = block.get("shape")
    if shape == "circle":
        return Circle(tuple(block.get("center", (0.0, 0.0))), float(block["radius"]))
    if shape == "ellipse":
        return Ellipse(float(block["a"]), float(block["b"]), tuple(block.get("center", (0.0, 0.0))))
    if shape == "implicit":
        rho = _expr(block["rho"], "domain.boundary.rho")
        return ImplicitCurve(_pt_fn(rho), _grad_fn(rho), scale=float(block.get("scale", 1.0)))
    if shape == "spline":
        return SplineBoundary(block["points"])
    raise ScenarioParseError(f"unknown boundary shape {shape!r}")


def build_domain(block, metric) -> DomainGeometry:
    bnd = build_boundary(block["boundary"])
    phi = dphi = hess = None
    if "foliation" in block:
        e = _expr(block["foliation"], "domain.foliation")
        phi, dphi, hess = _pt_fn(e), _grad_fn(e), _hess_fn(e)
    return DomainGeometry(metric, bnd, phi, dphi, hess, step=float(block.get("step", 2e-3)),
                          stop_margin=float(block.get("stop_margin", 0.02)))


def build_tiling(block, metric, domain) -> Tiling:
    vnames = list(block["vertices"].keys())
    vid = {n: i for i, n in enumerate(vnames)}
    V = np.array([block["vertices"][n] for n in vnames], float)
    edges, enames, geo = [], [], []
    bnd = domain.boundary

    def vref(name, where):
        if name not in vid:
            raise TilingError(f"{where}: unknown vertex {name!r}")
        return vid[name]

    for eb in block["edges"]:
        name = str(eb["id"])
        a, b = vref(eb["from"], name), vref(eb["to"], name)
        kind = eb.get("kind", "geodesic")
        if kind == "geodesic":
            e = None
            geo.append((len(edges), (V[a], V[b], a, b), name))
        elif kind == "segment":
            e = SegmentEdge(V[a], V[b], a, b, "geodesic" if metric.kind == "euclidean" else "general", name)
        elif kind == "boundary":
            s0, s1 = bnd.param_of(V[a]), bnd.param_of(V[b])
            if eb.get("direction", "ccw") == "ccw":
                s1 = s1 if s1 > s0 else s1 + 1.0
            else:
                s1 = s1 if s1 < s0 else s1 - 1.0
            e = BoundaryArcEdge(bnd, s0, s1, a, b, name)
        elif kind == "arc":
            c = np.asarray(eb["center"], float)
            r = float(np.hypot(*(V[a] - c)))
            a0 = np.arctan2(*(V[a] - c)[::-1])
            a1 = np.arctan2(*(V[b] - c)[::-1])
            if eb.get("direction", "ccw") == "ccw":
                a1 = a1 if a1 > a0 else a1 + 2 * np.pi
            else:
                a1 = a1 if a1 < a0 else a1 - 2 * np.pi
            e = ArcEdge(c, r, a0, a1, a, b, eb.get("geometry", "general"), name)
        elif kind == "spline":
            pts = [V[a]] + [np.asarray(q, float) for q in eb["points"]] + [V[b]]
            e = SplineEdge(pts, a, b, "general", name)
        else:
            raise ScenarioParseError(f"edge {name}: unknown kind {kind!r}")
        edges.append(e)
        enames.append(name)
    if geo:
        built = geodesics_between(metric, [g[1] for g in geo], min(domain.step, 1e-3),
                                  [g[2] for g in geo])
        for (i, _, _), e in zip(geo, built):
            edges[i] = e
    eid = {n: i for i, n in enumerate(enames)}
    tnames = list(block["tiles"].keys())
    tiles = []
    for t in tnames:
        try:
            tiles.append([eid[str(e)] for e in block["tiles"][t]])
        except KeyError as exc:
            raise TilingError(f"tile {t}: unknown edge {exc.args[0]!r}") from exc
    return Tiling(V, edges, tiles, metric, bnd, vnames, enames, tnames)


def build_values(block, tiling) -> np.ndarray:
    if block is None:
        return np.zeros(len(tiling.tiles))
    if isinstance(block, dict) and "random_integers" in block:
        r = block["random_integers"]
        rng = np.random.default_rng(int(r.get("seed", 0)))
        return rng.integers(int(r.get("low", 1)), int(r.get("high", 12)) + 1,
                            len(tiling.tiles)).astype(float)
    if isinstance(block, dict):
        missing = [t for t in tiling.tile_names if t not in block]
        if missing:
            raise ScenarioParseError(f"values missing for tiles {missing}")
        return np.array([float(block[t]) for t in tiling.tile_names])
    vals = np.asarray(block, float)
    if vals.shape != (len(tiling.tiles),):
        raise ScenarioParseError("values list must have one entry per tile")
    return vals


# ---------------------------------------------------------------- scenario
@dataclass
class Scenario:
    name: str
    raw: dict
    hash: str
    metric: MetricField
    domain: DomainGeometry
    tiling: Optional[Tiling] = None
    field: Optional[PiecewiseField] = None
    pipeline: str = "general"
    options: dict = dc_field(default_factory=dict)
    path: Optional[str] = None

    @property
    def header(self) -> dict:
        return {"scenario": self.name, "scenario_hash": self.hash, "tool_version": __version__}

    def with_values(self, values) -> "Scenario":
        from copy import copy

        s = copy(self)
        s.field = PiecewiseField(self.tiling, values)
        return s


def scenario_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def parse_scenario(text: str, path: Optional[str] = None) -> Scenario:
    """Parse a scenario document; YAML errors carry line and column."""
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ScenarioParseError(f"YAML error: {exc.problem}",
                                 line=mark.line + 1 if mark else None,
                                 column=mark.column + 1 if mark else None) from exc
    if not isinstance(raw, dict):
        raise ScenarioParseError("scenario must be a mapping")
    for key in ("metric", "domain"):
        if key not in raw:
            raise ScenarioParseError(f"missing required block {key!r}")
    try:
        metric = build_metric(raw["metric"])
        domain = build_domain(raw["domain"], metric)
        tiling = fld = None
        if raw.get("tiling"):
            tiling = build_tiling(raw["tiling"], metric, domain)
            fld = PiecewiseField(tiling, build_values(raw.get("values"), tiling))
    except KeyError as exc:
        raise ScenarioParseError(f"missing key {exc.args[0]!r}") from exc
    sc = Scenario(str(raw.get("name", Path(path).stem if path else "scenario")), raw,
                  scenario_hash(text), metric, domain, tiling, fld,
                  str(raw.get("pipeline", "general")), dict(raw.get("options", {}) or {}), path)
    return sc


def load_scenario(path) -> Scenario:
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario: {exc}") from exc
    return parse_scenario(text, path)


def builtin_path(name: str) -> Path:
    """Path of a shipped scenario file."""
    ref = resources.files("geoxray") / "scenarios" / f"{name}.yaml"
    return Path(str(ref))


def load_builtin(name: str) -> Scenario:
    return load_scenario(builtin_path(name))


def builtin_names():
    d = resources.files("geoxray") / "scenarios"
    return sorted(p.name[:-5] for p in d.iterdir() if p.name.endswith(".yaml"))
