"""Minimal self-contained SVG plots; the plotted data is embedded as a comment table."""

from __future__ import annotations

import math
from typing import Optional, Sequence
from xml.sax.saxutils import escape

W, H = 640, 400
ML, MR, MT, MB = 70, 20, 40, 60


def _comment(header: dict, columns: Sequence[str], rows) -> str:
    lines = [f"{k}: {v}" for k, v in (header or {}).items()]
    lines.append(",".join(columns))
    lines += [",".join(repr(float(x)) if not isinstance(x, str) else x for x in r) for r in rows]
    body = "\n".join(lines).replace("--", "- -")
    return f"<!--\n{body}\n-->"


def _open(title: str) -> list:
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>']


def _scale(lo, hi, log):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi <= lo:
        hi = lo + 1.0
    return lo, hi


def bar_chart(labels: Sequence[str], values: Sequence[float], title: str, ylabel: str = "",
              highlight: Optional[float] = None, header: Optional[dict] = None,
              log: bool = False) -> str:
    """Bars; values above ``highlight`` are drawn in red."""
    vals = [float(v) for v in values]
    pos = [v for v in vals if v > 0]
    if log and pos:
        lo, hi = _scale(min(pos) / 2, max(pos) * 2, True)
    else:
        log = False
        lo, hi = 0.0, max(vals + [1e-300]) * 1.1
    out = _open(title)
    n = max(len(vals), 1)
    pw, ph = W - ML - MR, H - MT - MB
    bw = pw / n
    for i, (lab, v) in enumerate(zip(labels, vals)):
        y = (math.log10(v) if log and v > 0 else v if not log else lo)
        h = ph * (y - lo) / (hi - lo)
        color = "#c0392b" if highlight is not None and v > highlight else "#2c7fb8"
        x = ML + i * bw
        out.append(f'<rect x="{x + 0.1 * bw:.2f}" y="{MT + ph - h:.2f}" width="{0.8 * bw:.2f}" '
                   f'height="{max(h, 0):.2f}" fill="{color}"/>')
        out.append(f'<text x="{x + bw / 2:.2f}" y="{H - MB + 14}" text-anchor="middle" '
                   f'font-size="10">{escape(str(lab))}</text>')
    out += _axes(lo, hi, log, ylabel)
    out.append(_comment(header, ["label", "value"], [(str(l), v) for l, v in zip(labels, vals)]))
    out.append("</svg>")
    return "\n".join(out)


def line_plot(series: dict, title: str, xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False, header: Optional[dict] = None) -> str:
    """Polylines with markers; ``series`` maps a name to ``(x, y)`` sequences."""
    xs = [float(x) for xv, _ in series.values() for x in xv if not logx or x > 0]
    ys = [float(y) for _, yv in series.values() for y in yv
          if math.isfinite(y) and (not logy or y > 0)]
    if not xs or not ys:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
        logx = logy = False
    xlo, xhi = _scale(min(xs), max(xs), logx)
    ylo, yhi = _scale(min(ys), max(ys), logy)
    pw, ph = W - ML - MR, H - MT - MB
    fx = lambda x: ML + pw * ((math.log10(x) if logx else x) - xlo) / (xhi - xlo)
    fy = lambda y: MT + ph - ph * ((math.log10(y) if logy else y) - ylo) / (yhi - ylo)
    colors = ["#2c7fb8", "#c0392b", "#27ae60", "#8e44ad", "#e67e22"]
    out = _open(title)
    rows = []
    for i, (name, (xv, yv)) in enumerate(series.items()):
        c = colors[i % len(colors)]
        pts = [(fx(x), fy(y)) for x, y in zip(xv, yv)
               if math.isfinite(y) and (not logx or x > 0) and (not logy or y > 0)]
        if pts:
            out.append('<polyline fill="none" stroke="%s" points="%s"/>'
                       % (c, " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)))
            out += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{c}"/>' for a, b in pts]
        out.append(f'<text x="{W - MR - 150}" y="{MT + 15 * (i + 1)}" fill="{c}">'
                   f'{escape(str(name))}</text>')
        rows += [(str(name), x, y) for x, y in zip(xv, yv)]
    out += _axes(ylo, yhi, logy, ylabel)
    out.append(f'<text x="{ML + pw / 2}" y="{H - 15}" text-anchor="middle">'
               f'{escape(xlabel)}{" (log)" if logx else ""}</text>')
    out.append(_comment(header, ["series", "x", "y"], rows))
    out.append("</svg>")
    return "\n".join(out)


def _axes(lo, hi, log, ylabel):
    pw, ph = W - ML - MR, H - MT - MB
    out = [f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{MT + ph}" stroke="black"/>',
           f'<line x1="{ML}" y1="{MT + ph}" x2="{ML + pw}" y2="{MT + ph}" stroke="black"/>']
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        y = MT + ph - ph * i / 4
        lab = f"1e{v:.1f}" if log else f"{v:.3g}"
        out.append(f'<text x="{ML - 5}" y="{y + 4:.2f}" text-anchor="end" font-size="10">{lab}</text>')
    out.append(f'<text x="15" y="{MT + ph / 2}" transform="rotate(-90 15 {MT + ph / 2})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    return out
