"""Minimal deterministic SVG output: scatter and line plots.

Hand-rolled rather than a plotting library so the bytes are a pure
function of the data (no timestamps or session ids), which keeps whole
experiment directories reproducible and hashable.
"""

import math

_W, _H = 640, 480
_PAD = 46


def _color(i):
    hue = (i * 137.508) % 360.0  # golden-angle spacing
    return f"hsl({hue:.1f},65%,42%)"


def _fmt(x):
    return f"{x:.2f}"


def _glyph(shape, x, y, size, color):
    s = size
    x_, y_ = _fmt(x), _fmt(y)
    common = f'fill="{color}" class="pt"'
    stroke = f'stroke="{color}" fill="none" class="pt"'
    if shape == "circle":
        return f'<circle cx="{x_}" cy="{y_}" r="{_fmt(s)}" {common}/>'
    if shape == "square":
        return (f'<rect x="{_fmt(x - s)}" y="{_fmt(y - s)}" '
                f'width="{_fmt(2 * s)}" height="{_fmt(2 * s)}" {common}/>')
    if shape == "triangle":
        pts = f"{_fmt(x)},{_fmt(y - s)} {_fmt(x - s)},{_fmt(y + s)} {_fmt(x + s)},{_fmt(y + s)}"
        return f'<polygon points="{pts}" {common}/>'
    if shape == "diamond":
        pts = (f"{_fmt(x)},{_fmt(y - s)} {_fmt(x + s)},{_fmt(y)} "
               f"{_fmt(x)},{_fmt(y + s)} {_fmt(x - s)},{_fmt(y)}")
        return f'<polygon points="{pts}" {common}/>'
    if shape == "plus":
        return (f'<path d="M {_fmt(x - s)} {y_} H {_fmt(x + s)} '
                f'M {x_} {_fmt(y - s)} V {_fmt(y + s)}" {stroke}/>')
    if shape == "cross":
        return (f'<path d="M {_fmt(x - s)} {_fmt(y - s)} L {_fmt(x + s)} {_fmt(y + s)} '
                f'M {_fmt(x - s)} {_fmt(y + s)} L {_fmt(x + s)} {_fmt(y - s)}" {stroke}/>')
    if shape == "triangle_down":
        pts = f"{_fmt(x)},{_fmt(y + s)} {_fmt(x - s)},{_fmt(y - s)} {_fmt(x + s)},{_fmt(y - s)}"
        return f'<polygon points="{pts}" {common}/>'
    return f'<circle cx="{x_}" cy="{y_}" r="{_fmt(s)}" {stroke}/>'  # ring

_SHAPES = ["circle", "square", "triangle", "diamond", "plus", "cross",
           "triangle_down", "ring"]


def _scale(vals, lo_px, hi_px, log=False):
    vals = [math.log10(v) for v in vals] if log else list(vals)
    vmin, vmax = min(vals), max(vals)
    if vmax == vmin:
        vmax = vmin + 1.0
    span = vmax - vmin

    def to_px(v):
        v = math.log10(v) if log else v
        return lo_px + (v - vmin) / span * (hi_px - lo_px)

    return to_px, vmin, vmax


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]


def scatter_svg(path, points, title=""):
    """points: iterable of (x, y, color_key, shape_key). One glyph element
    (class="pt") per point; color follows color_key, shape follows
    shape_key."""
    points = list(points)
    parts = _header(title)
    parts.append(f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" '
                 f'height="{_H - 2 * _PAD}" fill="none" stroke="#888"/>')
    if points:
        sx, *_ = _scale([p[0] for p in points], _PAD + 8, _W - _PAD - 8)
        sy, *_ = _scale([p[1] for p in points], _H - _PAD - 8, _PAD + 8)
        color_keys = sorted({p[2] for p in points})
        shape_keys = sorted({p[3] for p in points})
        cmap = {k: _color(i) for i, k in enumerate(color_keys)}
        smap = {k: _SHAPES[i % len(_SHAPES)] for i, k in enumerate(shape_keys)}
        for x, y, ck, sk in points:
            parts.append(_glyph(smap[sk], sx(x), sy(y), 4.0, cmap[ck]))
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def line_svg(path, series, title="", xlabel="", ylabel="", logx=False):
    """series: mapping name -> list of (x, y), drawn as polyline + markers."""
    parts = _header(title)
    parts.append(f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" '
                 f'height="{_H - 2 * _PAD}" fill="none" stroke="#888"/>')
    all_pts = [p for pts in series.values() for p in pts]
    if all_pts:
        sx, xmin, xmax = _scale([p[0] for p in all_pts], _PAD + 8, _W - _PAD - 8,
                                log=logx)
        sy, ymin, ymax = _scale([p[1] for p in all_pts], _H - _PAD - 8, _PAD + 8)
        for t in range(5):
            fx = xmin + (xmax - xmin) * t / 4
            fy = ymin + (ymax - ymin) * t / 4
            xv = 10 ** fx if logx else fx
            px = sx(xv)
            py = sy(fy)
            parts.append(f'<text x="{_fmt(px)}" y="{_H - _PAD + 16}" '
                         f'text-anchor="middle" font-family="sans-serif" '
                         f'font-size="10">{xv:.3g}</text>')
            parts.append(f'<text x="{_PAD - 6}" y="{_fmt(py + 3)}" '
                         f'text-anchor="end" font-family="sans-serif" '
                         f'font-size="10">{fy:.3g}</text>')
        for i, (name, pts) in enumerate(sorted(series.items())):
            color = _color(i)
            coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
            parts.append(f'<polyline points="{coords}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
            for x, y in pts:
                parts.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" '
                             f'r="2.5" fill="{color}"/>')
            parts.append(f'<text x="{_W - _PAD - 4}" y="{_PAD + 14 + 13 * i}" '
                         f'text-anchor="end" font-family="sans-serif" '
                         f'font-size="11" fill="{color}">{name}</text>')
    if xlabel:
        parts.append(f'<text x="{_W // 2}" y="{_H - 8}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="14" y="{_H // 2}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12" '
                     f'transform="rotate(-90 14 {_H // 2})">{ylabel}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
