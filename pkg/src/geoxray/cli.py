"""Command-line front end: ``geoxray {validate,forward,reconstruct,asymptotics,stability}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import corner_grid, ending_time_tangential
from .domain import boundary_curvature_samples, foliation_report, geodesic_battery
from .errors import (ConvexityError, FoliationError, GeoXrayError, ReconstructionError,
                     ScenarioParseError, TilingError)
from .forward import (SINOGRAM_COLUMNS, ForwardModel, RecordingSinogram, TableSinogram,
                      sinogram_rows, write_csv)
from .layers import ReconstructionConfig, anchor_geometry, corner_windows, plan, reconstruct
from .scenario import Scenario, load_scenario
from .stability import stability_geometry, stability_report, write_report
from .svg import line_plot

EXIT_OK, EXIT_NUMERIC, EXIT_TILING, EXIT_FOLIATION, EXIT_PARSE = 0, 1, 2, 3, 4

COLUMNS_HELP = f"""
output columns (stable across versions):
  sinogram.csv     {", ".join(SINOGRAM_COLUMNS)}
  corner_grid.csv  theta, eps, If, I_C_direct, I_C_subtracted
  tiles.csv        tile, true_value, recovered, abs_error, rel_error, method, anchor
  asymptotics.csv  eps, exit_time, model_time, residual_over_eps
  stability.csv    kind, anchor, tile, m_C, cond, constant, norm, abs_value, bound, slack
every file starts with '# key: value' lines carrying the scenario hash and tool version.

exit codes: 0 ok, 1 numerical failure, 2 tiling invalid, 3 foliation invalid, 4 parse error.
"""


# ---------------------------------------------------------------- helpers
def _header(sc: Scenario, **extra) -> dict:
    return {**sc.header, **extra}


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(type(x))


def _parse_grid(text: str) -> dict:
    """``key=value,key=value`` (a bare word maps to ``True``)."""
    out = {}
    for part in filter(None, (text or "").split(",")):
        k, sep, v = part.partition("=")
        out[k.strip()] = v.strip() if sep else True
    return out


def _config(args) -> ReconstructionConfig:
    return ReconstructionConfig(threads=args.threads)


def _require_tiling(sc: Scenario):
    if sc.tiling is None:
        raise TilingError("scenario has no tiling")


def _vertex(sc: Scenario, name: str) -> int:
    if name not in sc.tiling.vertex_names:
        raise ScenarioParseError(f"unknown vertex {name!r}")
    return sc.tiling.vertex_names.index(name)


# ---------------------------------------------------------------- validate
def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    out = _out(args)
    seed = int(sc.options.get("seed", 0))
    n = int(sc.options.get("battery", 200))
    report = {**_header(sc, seed=seed, battery=n), "metric": {}, "boundary": {}}
    d = sc.domain
    code = EXIT_OK
    # metric positivity on domain samples
    box = d.boundary.sample(256) if d.boundary.closed else None
    if box is not None:
        lo, hi = box.min(0), box.max(0)
        g = np.stack(np.meshgrid(np.linspace(lo[0], hi[0], 25), np.linspace(lo[1], hi[1], 25)),
                     -1).reshape(-1, 2)
        g = np.vstack([g[d.rho(g) >= 0], box])
        eig = np.linalg.eigvalsh(d.metric.metric_at(g))
        report["metric"] = {"min_eigenvalue": float(eig.min()), "ok": bool(eig.min() > 0)}
        kappa = boundary_curvature_samples(d, 128)
        report["boundary"] = {"min_curvature": float(kappa.min()), "ok": bool(kappa.min() > 0)}
        if eig.min() <= 0:
            code = EXIT_NUMERIC
        if kappa.min() <= 0:
            code = EXIT_FOLIATION
    if d.phi is not None:
        fr = foliation_report(d, geodesic_battery(d, n, seed), raise_on_violation=False)
        report["foliation"] = fr.to_dict()
        if not fr.ok:
            code = EXIT_FOLIATION
    if sc.tiling is not None:
        tv = sc.tiling.validate(seed=seed)
        report["tiling"] = tv
        if not tv["ok"]:
            code = EXIT_TILING
    report["ok"] = code == EXIT_OK
    _dump(out / "validate.json", report)
    for key in ("tiling", "foliation"):
        if key in report and not report[key]["ok"]:
            for v in report[key].get("violations", [])[:10]:
                print(f"{key}: {v}")
            if key == "foliation":
                print(f"foliation: not strictly convex along geodesic {report[key]['offending']}")
    print(f"validate {sc.name}: {'ok' if code == EXIT_OK else 'FAILED'} (exit {code})")
    return code


# ---------------------------------------------------------------- forward
def _random_chords(sc, n, seed):
    trs = geodesic_battery(sc.domain, n, seed)
    return np.array([tr.position(0.0) for tr in trs]), np.array([tr.velocity(0.0) for tr in trs])


def cmd_forward(args) -> int:
    sc = load_scenario(args.scenario)
    _require_tiling(sc)
    out = _out(args)
    fm = ForwardModel(sc.domain, sc.field)
    opts = _parse_grid(args.grid)
    meta = None
    if args.geodesic:
        x, y, th = (float(v) for v in args.geodesic.split(","))
        p = np.array([x, y])
        w = sc.domain.metric.normalize(p, np.array([np.cos(th), np.sin(th)]))
        Q, W, meta = p[None], w[None], [(th, 0.0)]
    elif "vertex" in opts:
        v = _vertex(sc, opts["vertex"])
        lp = plan(sc.tiling, sc.domain)
        anchor = next(a for a in lp.anchors if a.vertex == v) if any(
            a.vertex == v for a in lp.anchors) else None
        if anchor is None:
            raise ReconstructionError(f"vertex {opts['vertex']} is not an anchor")
        geo = anchor_geometry(sc.domain, sc.tiling, anchor)
        thetas, eps = corner_windows(geo, ReconstructionConfig())
        if "ntheta" in opts:
            thetas = np.linspace(thetas[0], thetas[-1], int(opts["ntheta"]))
        if "neps" in opts:
            eps = eps[0] * 2.0 ** -np.arange(int(opts["neps"]))
        known = {k: sc.field.values[k] for k in range(len(sc.tiling.tiles))
                 if k not in geo.corner_tiles}
        grid = corner_grid(sc.domain, sc.tiling, anchor.point, geo.omega, geo.nu, thetas, eps, fm,
                           known, geo.corner_tiles, geo.radius, sc.field)
        rows = [(th, e, grid.If[i, j], grid.cross_check[i, j], grid.I_C[i, j])
                for i, th in enumerate(thetas) for j, e in enumerate(eps)]
        write_csv(out / "corner_grid.csv", ("theta", "eps", "If", "I_C_direct", "I_C_subtracted"),
                  rows, _header(sc, vertex=opts["vertex"], ball_radius=geo.radius))
        print(f"corner grid at {opts['vertex']}: {len(rows)} nodes, max |direct - subtracted| = "
              f"{grid.max_disagreement:.3e}")
        return EXIT_OK
    elif "recon" in opts:
        rec = RecordingSinogram(fm)
        reconstruct(sc.domain, sc.tiling, rec, opts.get("mode", args.mode), _config(args))
        Q, W = np.array(rec.Q), np.array(rec.W)
    else:
        n, seed = int(opts.get("random", 100)), int(opts.get("seed", 0))
        Q, W = _random_chords(sc, n, seed)
    rows = sinogram_rows(fm, Q, W, meta)
    write_csv(out / "sinogram.csv", SINOGRAM_COLUMNS, rows, _header(sc, grid=args.grid or ""))
    flagged = sum(r[-1] for r in rows)
    print(f"forward {sc.name}: {len(rows)} geodesics, {flagged} tangency-flagged")
    return EXIT_OK


# ------------------------------------------------------------- reconstruct
def cmd_reconstruct(args) -> int:
    sc = load_scenario(args.scenario)
    _require_tiling(sc)
    out = _out(args)
    sino = TableSinogram.from_csv(args.sinogram) if args.sinogram else ForwardModel(sc.domain, sc.field)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rec = reconstruct(sc.domain, sc.tiling, sino, args.mode, _config(args))
    header = _header(sc, mode=args.mode, sinogram=args.sinogram or "internal forward model")
    cert = rec.certificate(sc.tiling, header)
    cert["warnings"] += [str(w.message) for w in caught]
    _dump(out / "certificate.json", cert)
    truth = sc.field.values if "values" in sc.raw else None
    rows, worst = [], 0.0
    for k, name in enumerate(sc.tiling.tile_names):
        r = rec.tiles[k]
        if truth is not None:
            err = abs(r.value - truth[k])
            rel = err / max(abs(truth[k]), 1e-300) if truth[k] != 0 else err
            worst = max(worst, rel)
            rows.append((name, float(truth[k]), r.value, err, rel, r.method, r.anchor))
        else:
            rows.append((name, float("nan"), r.value, float("nan"), float("nan"), r.method, r.anchor))
    write_csv(out / "tiles.csv", ("tile", "true_value", "recovered", "abs_error", "rel_error",
                                  "method", "anchor"), rows, header)
    dt = time.perf_counter() - t0
    if truth is not None:
        print(f"reconstruct {sc.name} ({args.mode}): max relative error {worst:.3e} in {dt:.1f}s")
    else:
        print(f"reconstruct {sc.name} ({args.mode}): {len(rows)} tiles in {dt:.1f}s")
    return EXIT_OK


# ------------------------------------------------------------- asymptotics
def cmd_asymptotics(args) -> int:
    sc = load_scenario(args.scenario)
    out = _out(args)
    d = sc.domain
    omega = None
    if args.vertex:
        _require_tiling(sc)
        p, label = sc.tiling.vertices[_vertex(sc, args.vertex)], args.vertex
    elif "asymptotics_point" in sc.options:
        p, label = np.asarray(sc.options["asymptotics_point"], float), "point"
        if "asymptotics_omega" in sc.options:
            omega = d.metric.normalize(p, np.asarray(sc.options["asymptotics_omega"], float))
    elif "asymptotics_vertex" in sc.options:
        _require_tiling(sc)
        label = sc.options["asymptotics_vertex"]
        p = sc.tiling.vertices[_vertex(sc, label)]
    else:
        raise ScenarioParseError("no vertex given (--vertex) and no asymptotics option in scenario")
    opts = _parse_grid(args.grid)
    eps = np.geomspace(float(opts.get("eps_min", 1e-6)), float(opts.get("eps_max", 1e-5)),
                       int(opts.get("n", 8)))
    fit = ending_time_tangential(d, p, eps, omega)
    header = _header(sc, point=label)
    _dump(out / "asymptotics.json", {**header, **fit.to_dict(),
                                     "residual_decreasing": fit.residual_decreasing})
    model = fit.predicted_half * np.sqrt(eps) + fit.predicted_one * eps
    write_csv(out / "asymptotics.csv", ("eps", "exit_time", "model_time", "residual_over_eps"),
              list(zip(eps, fit.times, model, fit.residual_over_eps)), header)
    (out / "asymptotics.svg").write_text(line_plot(
        {"|t - model| / eps": (eps.tolist(), np.abs(fit.residual_over_eps).tolist())},
        f"tangential exit time residual at {label}", "eps", "|residual| / eps", True, True, header))
    print(f"asymptotics {sc.name} at {label}: c_half {fit.c_half:.6f} (predicted "
          f"{fit.predicted_half:.6f}), c_one {fit.c_one:.6f} (predicted {fit.predicted_one:.6f})")
    return EXIT_OK


# --------------------------------------------------------------- stability
def cmd_stability(args) -> int:
    sc = load_scenario(args.scenario)
    out = _out(args)
    header = _header(sc)
    if sc.tiling is None:
        geo = None
        values = np.zeros(0)
    else:
        cfg = _config(args)
        geo = stability_geometry(sc.domain, sc.tiling, config=cfg)
        values = sc.field.values
        if args.sinogram:
            rec = reconstruct(sc.domain, sc.tiling, TableSinogram.from_csv(args.sinogram), args.mode,
                              cfg)
            values = rec.values
            header["values"] = "recovered from " + args.sinogram
    if geo is None:
        print(f"stability {sc.name}: no tiling, nothing to bound")
        _dump(out / "stability.json", {**header, "pass": True, "tangent_tiles": [], "corners": []})
        return EXIT_OK
    rep = stability_report(geo, values, sc.tiling.tile_names)
    write_report(rep, out, header)
    gb = rep.global_bound
    print(f"stability {sc.name}: {'pass' if rep.passed else 'FAIL'}; max|a| {gb['max_abs_value']:.4g}"
          f" <= bound {gb['bound']:.4g} (slack {gb['slack']:.4g})")
    return EXIT_OK if rep.passed else EXIT_NUMERIC


# -------------------------------------------------------------------- main
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geoxray", description=__doc__, epilog=COLUMNS_HELP,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"geoxray {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker threads for anchors of one level (results do not depend on it)")
        p.add_argument("--mode", choices=("general", "simple_geodesic"), default="general",
                       help="reconstruction pipeline")
        p.add_argument("--grid", default="", help="grid options, comma separated key=value")
        return p

    common(sub.add_parser("validate", help="check metric, boundary, foliation and tiling",
                          epilog=COLUMNS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter))
    fw = common(sub.add_parser(
        "forward", help="compute ray transforms",
        description="--grid random=N,seed=S (default random=100) | vertex=NAME[,ntheta=,neps=] "
                    "| recon[,mode=...] (every chord the reconstruction requests)",
        epilog=COLUMNS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter))
    fw.add_argument("--geodesic", help="single geodesic 'x,y,theta' (theta from the chart x axis)")
    rc = common(sub.add_parser("reconstruct", help="recover tile values", epilog=COLUMNS_HELP,
                               formatter_class=argparse.RawDescriptionHelpFormatter))
    rc.add_argument("--sinogram", help="sinogram CSV to use instead of the internal forward model")
    asy = common(sub.add_parser(
        "asymptotics", help="tangential exit-time fit at a boundary vertex",
        description="--grid eps_min=1e-6,eps_max=1e-5,n=8", epilog=COLUMNS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter))
    asy.add_argument("--vertex", help="boundary vertex name")
    st = common(sub.add_parser("stability", help="stability constants and bounds",
                               epilog=COLUMNS_HELP,
                               formatter_class=argparse.RawDescriptionHelpFormatter))
    st.add_argument("--sinogram", help="bound the values recovered from this sinogram CSV")
    return ap


COMMANDS = {"validate": cmd_validate, "forward": cmd_forward, "reconstruct": cmd_reconstruct,
            "asymptotics": cmd_asymptotics, "stability": cmd_stability}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ScenarioParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except TilingError as exc:
        print(f"tiling error: {exc}", file=sys.stderr)
        return EXIT_TILING
    except (FoliationError, ConvexityError) as exc:
        print(f"foliation error: {exc}", file=sys.stderr)
        return EXIT_FOLIATION
    except ReconstructionError as exc:
        where = f" at anchor {exc.anchor}" if exc.anchor else ""
        print(f"reconstruction failed{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except GeoXrayError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
