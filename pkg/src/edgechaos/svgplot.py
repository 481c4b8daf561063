"""Minimal SVG scatter/line plots (axes, ticks, points, legend); no plotting dependency."""
from __future__ import annotations

import csv
import json
import math
from html import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]
W, H = 640, 480
ML, MR, MT, MB = 70, 20, 40, 55


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step)
    count = min(int(math.floor(hi / step)) - first + 1, 50)
    return [round((first + i) * step, 12) for i in range(max(count, 0))]


def _range(vals):
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if hi - lo <= 1e-9 * max(1.0, abs(lo), abs(hi)):
        # flat data (e.g. a fixed point): pad symmetrically
        pad = 0.5 if lo == 0 else 0.05 * abs(lo)
        return lo - pad, hi + pad
    pad = 0.03 * (hi - lo)
    return lo - pad, hi + pad


def render(series, title="", xlabel="", ylabel="", lines=False, point_radius=1.5) -> str:
    """``series`` is a list of ``(label, xs, ys)``; returns the SVG document as text."""
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series]) if series else np.zeros(0)
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series]) if series else np.zeros(0)
    x0, x1 = _range(xs_all)
    y0, y1 = _range(ys_all)
    pw, ph = W - ML - MR, H - MT - MB

    def sx(v):
        return ML + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MT + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        px = sx(t)
        out.append(f'<line x1="{px:.2f}" y1="{MT + ph}" x2="{px:.2f}" y2="{MT + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{MT + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        py = sy(t)
        out.append(f'<line x1="{ML - 5}" y1="{py:.2f}" x2="{ML}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{ML - 8}" y="{py + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{MT + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {MT + ph / 2})">{escape(ylabel)}</text>'
    )
    for k, (label, xs, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        ok = np.isfinite(xs) & np.isfinite(ys)
        pts = [(sx(a), sy(b)) for a, b in zip(xs[ok], ys[ok])]
        out.append(f'<g fill="{color}" stroke="{color}">')
        if lines and len(pts) > 1:
            d = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline points="{d}" fill="none" stroke-width="1.5"/>')
        for a, b in pts:
            out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{point_radius}" stroke="none"/>')
        out.append("</g>")
        if label:
            ly = MT + 14 + 16 * k
            out.append(f'<circle cx="{ML + pw - 110}" cy="{ly - 4}" r="4" fill="{color}"/>')
            out.append(f'<text x="{ML + pw - 100}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- CSV round trip -------------------------------------------------------------
# A CSV written for plotting carries a "# plot: {...}" header line describing which
# columns to draw, so the figure can be regenerated from the CSV alone.


def plot_header(kind: str, x: str, y, group=None, title="", xlabel=None, ylabel=None) -> str:
    spec = {"kind": kind, "x": x, "y": [y] if isinstance(y, str) else list(y), "group": group, "title": title}
    spec["xlabel"] = xlabel or x
    spec["ylabel"] = ylabel or ", ".join(spec["y"])
    return "plot: " + json.dumps(spec, sort_keys=True)


def read_csv_with_header(path):
    comments, rows = [], []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            comments.append(ln[1:].strip())
        else:
            body.append(ln)
    rows = list(csv.DictReader(body))
    return comments, rows


def _num(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return float("nan")


def svg_from_csv(path) -> str:
    """Rebuild the SVG for a CSV carrying a ``# plot:`` header."""
    comments, rows = read_csv_with_header(path)
    spec = None
    for c in comments:
        if c.startswith("plot:"):
            spec = json.loads(c[len("plot:") :])
    if spec is None:
        raise ValueError(f"{path}: no '# plot:' header line")
    series = []
    if spec.get("group"):
        groups = {}
        for r in rows:
            groups.setdefault(r[spec["group"]], []).append(r)
        for g, rs in groups.items():
            for ycol in spec["y"]:
                label = f"{spec['group']}={g}" if len(spec["y"]) == 1 else f"{spec['group']}={g} {ycol}"
                series.append((label, [_num(r[spec["x"]]) for r in rs], [_num(r[ycol]) for r in rs]))
    else:
        for ycol in spec["y"]:
            series.append((ycol if len(spec["y"]) > 1 else "", [_num(r[spec["x"]]) for r in rows], [_num(r[ycol]) for r in rows]))
    return render(
        series,
        title=spec.get("title", ""),
        xlabel=spec.get("xlabel", spec["x"]),
        ylabel=spec.get("ylabel", ""),
        lines=spec["kind"] == "line",
    )
