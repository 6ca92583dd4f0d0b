"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary.
"""

import time

import mpmath as mp
import numpy as np

from conftest import ACCEPTANCE_LINES, scaled_disk, scenario
from geoxray.boundary import (corner_chords, ending_time_tangential, tangent_probe,
                              tangent_tile_value)
from geoxray.corner import (CornerSystem, F_normalize, conical_transform, derivatives_at_zero,
                            recover_values)
from geoxray.domain import geodesic_battery
from geoxray.errors import TangencyError
from geoxray.forward import (ForwardModel, Region, meeting_time_derivative, meeting_times,
                             quadrature_oracle, ray_transform, restricted_integral)
from geoxray.geodesic import _transported_start, jacobi, variation_check
from geoxray.layers import anchor_geometry, plan, reconstruct
from geoxray.stability import stability_geometry, stability_report

TILED = ("euclidean_disk12", "ellipse12", "euclidean_ring12", "poincare_subdisk12")


def verdict(n, ok, elapsed, limit, detail):
    ok = bool(ok) and elapsed < limit
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s, limit {limit:g} s) {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def side_tile(tiling, v, omega, nu, side):
    """Tile whose cone at boundary vertex ``v`` touches direction ``side * omega``."""
    for lo, hi, k in tiling.fan(v, omega, nu):
        if (side > 0 and abs(lo) < 1e-9) or (side < 0 and abs(hi - np.pi) < 1e-9):
            return k
    raise AssertionError("no tangent tile")


def boundary_vertices(tiling, domain):
    return [v for v in range(len(tiling.vertices))
            if abs(float(domain.rho(tiling.vertices[v][None])[0])) < 1e-9]


# ------------------------------------------------------------------ 1
def test_criterion_1_conical_recovery():
    rng = np.random.default_rng(1)

    def fan(N):
        while True:
            th = np.sort(rng.uniform(np.radians(10), np.radians(170), N + 1))
            if np.all(np.diff(th) >= np.radians(10)):
                return th

    t0 = time.perf_counter()
    worst = 0.0
    for N in range(1, 7):
        for _ in range(10):
            cs = CornerSystem.from_angles(fan(N))
            a = rng.uniform(-10, 10, N)
            w = 1e-6 / np.max(np.abs(cs.alphas))
            n = 2 * (N + 1) + 3
            with mp.workdps(50):
                ts = [mp.mpf(w) * mp.cos(mp.pi * (k + mp.mpf(0.5)) / n) for k in range(n)]
                ths = [mp.atan(x) for x in ts]
                tt, F = F_normalize(ths, conical_transform(cs, a, ths, dps=50))
                d = derivatives_at_zero(tt, F, N - 1, dps=50)
            ah = recover_values(cs, d.values)
            worst = max(worst, float(np.max(np.abs(ah - a) / np.abs(a))))
    verdict(1, worst <= 1e-8, time.perf_counter() - t0, 1.0,
            f"worst relative error {worst:.2e} (tol 1e-8), 60 fans N=1..6")


# ------------------------------------------------------------------ 2
def test_criterion_2_tangent_tile_formula():
    t0 = time.perf_counter()
    worst_rel, worst_ratio, rows = 0.0, 0.0, 0
    cases = [("circle R=1", scenario("euclidean_disk12")), ("circle R=2", scaled_disk(2.0)),
             ("ellipse", scenario("ellipse12"))]
    for _, sc in cases:
        d, T = sc.domain, sc.tiling
        fm = ForwardModel(d, sc.field)
        for v in boundary_vertices(T, d):
            p = T.vertices[v]
            om, nu = d.boundary_frame(p)
            for side in (1, -1):
                a = sc.field.values[side_tile(T, v, om, nu, side)]
                errs = []
                for emax in (1e-3, 5e-4):
                    eps = emax * 2.0 ** -np.arange(7)
                    Q, W = tangent_probe(d, p, side, eps)
                    errs.append(abs(tangent_tile_value(d, p, eps, fm(Q, W), degree=1).value - a))
                worst_rel = max(worst_rel, errs[0] / abs(a))
                worst_ratio = max(worst_ratio, errs[1] / errs[0])
                rows += 1
    ok = worst_rel <= 1e-3 and worst_ratio <= 0.5 + 0.05
    verdict(2, ok, time.perf_counter() - t0, 10.0,
            f"worst error/|a| {worst_rel:.2e} (tol 1e-3), worst halving ratio {worst_ratio:.3f} "
            f"(need <= 0.55) over {rows} tangent tiles")


# ------------------------------------------------------------------ 3
def test_criterion_3_ending_time_asymptotics():
    t0 = time.perf_counter()
    worst_half, decreasing = 0.0, True
    for sc in (scenario("euclidean_disk12"), scaled_disk(2.0), scenario("ellipse12"),
               scenario("poincare_subdisk12")):
        for v in boundary_vertices(sc.tiling, sc.domain):
            fit = ending_time_tangential(sc.domain, sc.tiling.vertices[v])
            worst_half = max(worst_half, abs(fit.c_half / fit.predicted_half - 1))
            decreasing &= fit.residual_decreasing
    cub = scenario("cubic")
    fit = ending_time_tangential(cub.domain, np.array(cub.options["asymptotics_point"]),
                                 omega=np.array(cub.options["asymptotics_omega"]))
    c1_rel = abs(fit.c_one / -2.0 - 1)
    decreasing &= fit.residual_decreasing
    ok = worst_half <= 1e-3 and c1_rel <= 0.05 and abs(fit.predicted_one + 2) < 1e-3 and decreasing
    verdict(3, ok, time.perf_counter() - t0, 10.0,
            f"worst c_half deviation {worst_half:.2e} (tol 1e-3), cubic c_1 {fit.c_one:.4f} vs -2 "
            f"({c1_rel:.2%}, tol 5%), residual/eps decreasing {decreasing}")


# ------------------------------------------------------------------ 4
def _crossing_fd(d, T, q, w, J0, DJ0, edge, t_ref, delta):
    """Crossing time with ``edge`` nearest ``t_ref`` on the varied chords at ``+-delta``."""
    out = []
    for s in (delta, -delta):
        q1, w1 = _transported_start(d.metric, q, s * J0, w + s * DJ0, d.step)
        tr = d.shoot_chords(q1[None], w1[None])[0]
        cands = [c.t for c in meeting_times(d, T, tr).crossings if c.edge == edge]
        out.append(min(cands, key=lambda t: abs(t - t_ref)))
    return (out[0] - out[1]) / (2 * delta)


def test_criterion_4_jacobi_fields():
    t0 = time.perf_counter()
    worst_dev, checks = 0.0, 0
    for name in TILED:
        sc = scenario(name)
        d, T = sc.domain, sc.tiling
        for v in range(len(T.vertices)):
            p = T.vertices[v]
            bnd = abs(float(d.rho(p[None])[0])) < 1e-9
            om, nu = d.boundary_frame(p) if bnd else (np.array([1.0, 0]), np.array([0, 1.0]))
            om = d.metric.normalize(p, om)
            nu = d.metric.rot90(p, om) if not bnd else nu
            for th in (np.pi / 3, np.pi / 2, 2 * np.pi / 3):
                wt = np.cos(th) * om + np.sin(th) * nu
                wn = -np.sin(th) * om + np.cos(th) * nu
                tr = d.shoot_chords(p[None], wt[None])[0]
                for dj in (0.0, 0.5):
                    J = jacobi(d.metric, tr, wn, dj * wn)
                    worst_dev = max(worst_dev, float(variation_check(d.metric, tr, J, [1e-4])[0]))
                    checks += 1
    # meeting-time derivatives against central differences
    worst_rel, n_cross = 0.0, 0
    rng = np.random.default_rng(7)
    for name in ("poincare_subdisk12", "ellipse12", "euclidean_disk12"):
        sc = scenario(name)
        d, T = sc.domain, sc.tiling
        for chord in geodesic_battery(d, 12, seed=3):
            if n_cross >= 50:
                break
            # restart at the chord midpoint so the varied chords start inside the domain
            tm = 0.5 * meeting_times(d, T, chord).t_hi
            q, w = chord.position(np.array([tm]))[0], chord.velocity(np.array([tm]))[0]
            tr = d.shoot_chords(q[None], w[None])[0]
            n0 = d.metric.rot90(q, w)
            J0, DJ0 = n0, rng.uniform(-1, 1) * n0
            J = jacobi(d.metric, tr, J0, DJ0)
            for c in meeting_times(d, T, tr).crossings:
                if n_cross >= 50 or c.angle < 0.2 or abs(c.t) < 0.05:
                    continue
                E = T.edges[c.edge]
                try:
                    _, dt = meeting_time_derivative(d.metric, tr, J, c.t, E.deriv(np.array([c.s]))[0])
                except TangencyError:
                    continue
                fd = _crossing_fd(d, T, q, w, J0, DJ0, c.edge, c.t, 1e-5)
                worst_rel = max(worst_rel, abs(dt - fd) / max(abs(dt), 1e-2))
                n_cross += 1
    ok = worst_dev <= 10 * 1e-4 and n_cross >= 50 and worst_rel <= 1e-3
    verdict(4, ok, time.perf_counter() - t0, 30.0,
            f"worst variation deviation {worst_dev:.2e} (tol 1e-3) over {checks} fields; "
            f"meeting-time derivative worst relative error {worst_rel:.2e} (tol 1e-3) "
            f"on {n_cross} crossings")


# ------------------------------------------------------------------ 5
def test_criterion_5_end_to_end_reconstruction():
    t0 = time.perf_counter()
    disk = scenario("euclidean_disk12")
    a = np.random.default_rng(2024).integers(1, 21, len(disk.tiling.tile_names)).astype(float)
    disk = disk.with_values(a)
    r = reconstruct(disk.domain, disk.tiling, ForwardModel(disk.domain, disk.field))
    disk_rel = float(np.max(np.abs(r.values - a) / np.abs(a)))
    hyp = scenario("poincare_subdisk12")
    assert len(hyp.tiling.tile_names) >= 6
    truth = hyp.field.values
    rg = reconstruct(hyp.domain, hyp.tiling, ForwardModel(hyp.domain, hyp.field), "general")
    rs = reconstruct(hyp.domain, hyp.tiling, ForwardModel(hyp.domain, hyp.field), "simple_geodesic")
    g_rel = float(np.max(np.abs(rg.values - truth) / np.abs(truth)))
    s_rel = float(np.max(np.abs(rs.values - truth) / np.abs(truth)))
    inter = float(np.max(np.abs(rg.values - rs.values) / np.abs(truth)))
    ok = disk_rel <= 1e-4 and g_rel <= 1e-2 and s_rel <= 1e-2 and inter <= 1e-3
    verdict(5, ok, time.perf_counter() - t0, 120.0,
            f"disk {disk_rel:.2e} (tol 1e-4); Poincare general {g_rel:.2e}, simple_geodesic "
            f"{s_rel:.2e} (tol 1e-2); inter-mode {inter:.2e} (tol 1e-3)")


# ------------------------------------------------------------------ 6
def test_criterion_6_forward_oracle():
    t0 = time.perf_counter()
    worst, count = 0.0, 0
    for name in TILED:
        sc = scenario(name)
        for tr in geodesic_battery(sc.domain, 100, seed=11):
            I = ray_transform(sc.field, meeting_times(sc.domain, sc.tiling, tr))
            O = quadrature_oracle(sc.domain, sc.field, tr)
            worst = max(worst, abs(I - O) / max(abs(O), 1e-300))
            count += 1
    verdict(6, worst <= 1e-6, time.perf_counter() - t0, 30.0,
            f"worst relative error {worst:.2e} (tol 1e-6) on {count} geodesics")


# ------------------------------------------------------------------ 7
DEGREE_ZERO = {"kappa", "cond_explicit", "cond_dense", "reparam_constant", "C_C", "C_t", "C_c",
               "C_t_boundary", "alphas", "m_C", "window", "window_eps"}


def _pairs(x, y, key, out):
    """Flatten two reports in parallel into ``(key, base, scaled)`` triples."""
    if isinstance(x, dict):
        for k in x:
            _pairs(x[k], y[k], key if key in DEGREE_ZERO else k, out)
    elif isinstance(x, (list, tuple)):
        for u, v in zip(x, y):
            _pairs(u, v, key, out)
    elif isinstance(x, (int, float)) and not isinstance(x, bool):
        out.append((key, float(x), float(y)))
    return out


def homogeneity_deviation(base, scaled, lam, scale):
    """Worst relative deviation from 0- or 1-homogeneity; roundoff-sized entries are
    measured against ``scale``."""
    worst = 0.0
    for key, u, v in _pairs(base, scaled, "", []):
        expect = u if key in DEGREE_ZERO else lam * u
        den = max(abs(expect), 1e-12 * lam * scale)
        worst = max(worst, abs(v - expect) / den)
    return worst


def test_criterion_7_stability_bounds():
    from geoxray.scenario import builtin_names

    t0 = time.perf_counter()
    ok, worst_cond, worst_hom, lines = True, 0.0, 0.0, []
    for name in builtin_names():
        sc = scenario(name)
        if sc.tiling is None:
            lines.append(f"{name}: no tiling, nothing to bound")
            continue
        geo = stability_geometry(sc.domain, sc.tiling)
        rep = stability_report(geo, sc.field.values, sc.tiling.tile_names)
        ok &= rep.passed
        for c in rep.corners:
            worst_cond = max(worst_cond, abs(c["cond_explicit"] - c["cond_dense"])
                             / c["cond_dense"])
        base = rep.to_dict()
        base.pop("constants")
        scale = float(np.max(np.abs(sc.field.values)))
        for lam in (2.0, 10.0):
            scaled = stability_report(geo, lam * sc.field.values, sc.tiling.tile_names).to_dict()
            scaled.pop("constants")
            ok &= scaled["pass"] == base["pass"]
            worst_hom = max(worst_hom, homogeneity_deviation(base, scaled, lam, scale))
        lines.append(f"{name}: slack {rep.global_bound['slack']:.3g}")
    ok = ok and worst_cond <= 1e-8 and worst_hom <= 1e-9
    verdict(7, ok, time.perf_counter() - t0, 30.0,
            f"all inequalities hold {ok}; explicit vs dense condition {worst_cond:.1e} (tol 1e-8); "
            f"homogeneity deviation {worst_hom:.1e} (tol 1e-9); " + "; ".join(lines))


# ------------------------------------------------------------------ 8
def test_criterion_8_corner_limit():
    t0 = time.perf_counter()
    sc = scenario("poincare_subdisk12")
    d, T, f = sc.domain, sc.tiling, sc.field
    lp = plan(T, d)
    monotone, worst_final, anchors = True, 0.0, []
    for anc in lp.anchors:
        geo = anchor_geometry(d, T, anc)
        if not geo.corner_tiles:
            continue
        anchors.append(anc.name)
        region = Region.corner(geo.corner_tiles, d.metric, anc.point, geo.radius)
        half = min(np.radians(5), geo.min_aperture / 3)
        eps = np.geomspace(geo.radius / 5, geo.radius / 50, 4)
        for th in (-half, 0.0, half):
            Q, W = corner_chords(d, anc.point, geo.omega, geo.nu, [th], eps)
            closed = float(conical_transform(geo.system, f.values[list(geo.corner_tiles)], th))
            errs = []
            for e, tr in zip(eps, d.shoot_chords(Q, W)):
                I_C = restricted_integral(f, meeting_times(d, T, tr), region)
                errs.append(abs(I_C / e - closed) / abs(closed))
            monotone &= bool(np.all(np.diff(errs) < 0))
            worst_final = max(worst_final, errs[-1])
    ok = monotone and worst_final <= 0.02 and len(anchors) > 0
    verdict(8, ok, time.perf_counter() - t0, 60.0,
            f"error decreasing over eps in [r/50, r/5] {monotone}; worst final relative error "
            f"{worst_final:.2e} (tol 2e-2) at {', '.join(anchors)}")
