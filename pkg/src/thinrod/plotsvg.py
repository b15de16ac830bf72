"""Small deterministic SVG writer for log-log error plots.

matplotlib's SVG backend embeds run-varying ids and metadata, which would
break the byte-identical artifact contract, so the few plots the reports
need are drawn by hand.  Only positive (x, y) points are drawable on log
axes; nonpositive points are dropped per series.
"""

from __future__ import annotations

import math

_WIDTH = 480
_HEIGHT = 360
_LEFT = 70
_RIGHT = 20
_TOP = 34
_BOTTOM = 52
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _num(v: float) -> str:
    # fixed two decimals keeps coordinates byte-stable
    return f"{v:.2f}"


class _LogAxis:
    """Affine map from log10(value) to pixel coordinates."""

    def __init__(self, lo: float, hi: float, p0: float, p1: float):
        llo, lhi = math.log10(lo), math.log10(hi)
        if lhi - llo < 1e-9:
            llo -= 0.5
            lhi += 0.5
        pad = 0.06 * (lhi - llo)
        self.llo = llo - pad
        self.lhi = lhi + pad
        self.p0 = p0
        self.p1 = p1

    def __call__(self, v: float) -> float:
        t = (math.log10(v) - self.llo) / (self.lhi - self.llo)
        return self.p0 + t * (self.p1 - self.p0)

    def decades(self):
        k0 = math.ceil(self.llo - 1e-12)
        k1 = math.floor(self.lhi + 1e-12)
        return range(k0, k1 + 1)


def _text(x: float, y: float, s: str, size: int = 12, anchor: str = "middle",
          rotate: float | None = None) -> str:
    tr = f' transform="rotate({_num(rotate)} {_num(x)} {_num(y)})"' if rotate else ""
    return (f'<text x="{_num(x)}" y="{_num(y)}" font-family="monospace" '
            f'font-size="{size}" text-anchor="{anchor}"{tr}>{s}</text>')


def write_loglog(path, title: str, xlabel: str, ylabel: str, series) -> None:
    """Write a log-log line plot.

    series: list of (label, xs, ys) triples.  Identical input produces
    identical file bytes.
    """
    clean = []
    for label, xs, ys in series:
        pts = [(float(x), float(y)) for x, y in zip(xs, ys) if x > 0.0 and y > 0.0]
        if pts:
            clean.append((label, pts))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        _text(_WIDTH / 2.0, 20.0, title, size=14),
    ]
    if not clean:
        parts.append(_text(_WIDTH / 2.0, _HEIGHT / 2.0, "no positive data"))
        parts.append("</svg>")
        _write(path, parts)
        return

    allx = [x for _, pts in clean for x, _ in pts]
    ally = [y for _, pts in clean for _, y in pts]
    ax = _LogAxis(min(allx), max(allx), _LEFT, _WIDTH - _RIGHT)
    ay = _LogAxis(min(ally), max(ally), _HEIGHT - _BOTTOM, _TOP)

    x0, x1 = _LEFT, _WIDTH - _RIGHT
    y0, y1 = _HEIGHT - _BOTTOM, _TOP
    for k in ax.decades():
        px = ax(10.0**k)
        parts.append(f'<line x1="{_num(px)}" y1="{_num(y0)}" x2="{_num(px)}" '
                     f'y2="{_num(y1)}" stroke="#dddddd"/>')
        parts.append(_text(px, y0 + 16.0, f"1e{k}", size=11))
    for k in ay.decades():
        py = ay(10.0**k)
        parts.append(f'<line x1="{_num(x0)}" y1="{_num(py)}" x2="{_num(x1)}" '
                     f'y2="{_num(py)}" stroke="#dddddd"/>')
        parts.append(_text(x0 - 6.0, py + 4.0, f"1e{k}", size=11, anchor="end"))
    parts.append(f'<rect x="{_num(x0)}" y="{_num(y1)}" width="{_num(x1 - x0)}" '
                 f'height="{_num(y0 - y1)}" fill="none" stroke="black"/>')
    parts.append(_text((x0 + x1) / 2.0, _HEIGHT - 12.0, xlabel))
    parts.append(_text(18.0, (y0 + y1) / 2.0, ylabel, rotate=-90.0))

    for i, (label, pts) in enumerate(clean):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{_num(ax(x))},{_num(ay(y))}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{_num(ax(x))}" cy="{_num(ay(y))}" '
                         f'r="3" fill="{color}"/>')
        ly = y1 + 14.0 + 16.0 * i
        parts.append(f'<line x1="{_num(x1 - 118.0)}" y1="{_num(ly - 4.0)}" '
                     f'x2="{_num(x1 - 98.0)}" y2="{_num(ly - 4.0)}" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(_text(x1 - 92.0, ly, label, size=11, anchor="start"))
    parts.append("</svg>")
    _write(path, parts)


def _write(path, parts) -> None:
    data = "\n".join(parts) + "\n"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(data)
