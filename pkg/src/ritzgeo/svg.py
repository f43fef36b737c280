"""Minimal deterministic SVG plotting: polyline figures for exported runs.

Output is a pure function of the input data: fixed canvas, fixed palette,
fixed numeric formatting. Identical inputs produce byte-identical files.
"""

import numpy as np

WIDTH, HEIGHT = 640.0, 480.0
MARGIN = 48.0
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#17becf", "#7f7f7f", "#bcbd22", "#e377c2", "#aec7e8")


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _ranges(series):
    xs = np.concatenate([np.asarray(s[0], dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    return x0, x1, y0, y1


class _Canvas:
    def __init__(self, x0, x1, y0, y1):
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        self.sx = (WIDTH - 2 * MARGIN) / (x1 - x0)
        self.sy = (HEIGHT - 2 * MARGIN) / (y1 - y0)

    def px(self, x):
        return MARGIN + (x - self.x0) * self.sx

    def py(self, y):
        return HEIGHT - MARGIN - (y - self.y0) * self.sy


def render_polylines(series, title: str = "", cells=None) -> str:
    """series: list of (xs, ys[, label]); cells: optional (x, y, w, h, gray)
    background rectangles drawn beneath the curves (gray in [0, 1])."""
    canvas = _Canvas(*_ranges(series))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0f}" '
        f'height="{HEIGHT:.0f}" viewBox="0 0 {WIDTH:.0f} {HEIGHT:.0f}">',
        f'<rect x="0" y="0" width="{WIDTH:.0f}" height="{HEIGHT:.0f}" '
        'fill="white"/>',
    ]
    if cells is not None:
        for cx, cy, cw, ch, gray in cells:
            level = int(round(255 * (1.0 - 0.65 * float(gray))))
            x = canvas.px(cx)
            y = canvas.py(cy + ch)
            w = cw * canvas.sx
            h = ch * canvas.sy
            parts.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
                f'height="{_fmt(h)}" fill="rgb({level},{level},{level})"/>'
            )
    parts.append(
        f'<rect x="{_fmt(MARGIN)}" y="{_fmt(MARGIN)}" '
        f'width="{_fmt(WIDTH - 2 * MARGIN)}" height="{_fmt(HEIGHT - 2 * MARGIN)}" '
        'fill="none" stroke="#333333" stroke-width="1"/>'
    )
    for i, s in enumerate(series):
        xs, ys = np.asarray(s[0], dtype=float), np.asarray(s[1], dtype=float)
        pts = " ".join(
            f"{_fmt(canvas.px(x))},{_fmt(canvas.py(y))}" for x, y in zip(xs, ys)
        )
        color = PALETTE[i % len(PALETTE)]
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            'stroke-width="1.5"/>'
        )
        if len(s) > 2 and s[2]:
            ty = MARGIN + 16.0 + 14.0 * i
            parts.append(
                f'<text x="{_fmt(MARGIN + 8)}" y="{_fmt(ty)}" '
                f'font-family="monospace" font-size="11" fill="{color}">'
                f"{s[2]}</text>"
            )
    if title:
        parts.append(
            f'<text x="{_fmt(WIDTH / 2)}" y="{_fmt(MARGIN - 14)}" '
            'font-family="monospace" font-size="13" fill="#111111" '
            f'text-anchor="middle">{title}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def path_svg(ts, columns, labels, title="path") -> str:
    """Each chart coordinate plotted against t."""
    series = [(ts, col, lab) for col, lab in zip(columns, labels)]
    return render_polylines(series, title=title)


def overhead_svg(theta1, theta2, elevation_fn=None, title="overhead") -> str:
    """(theta1, theta2) projection; optional elevation shading sampled on a
    40x40 cell grid beneath the path."""
    cells = None
    if elevation_fn is not None:
        n = 40
        t1 = np.asarray(theta1, dtype=float)
        t2 = np.asarray(theta2, dtype=float)
        lo1, hi1 = float(t1.min()), float(t1.max())
        lo2, hi2 = float(t2.min()), float(t2.max())
        pad1 = 0.05 * (hi1 - lo1 + 1e-9)
        pad2 = 0.05 * (hi2 - lo2 + 1e-9)
        lo1, hi1 = lo1 - pad1, hi1 + pad1
        lo2, hi2 = lo2 - pad2, hi2 + pad2
        xs = np.linspace(lo1, hi1, n + 1)
        ys = np.linspace(lo2, hi2, n + 1)
        vals = np.array(
            [
                [elevation_fn([0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])])
                 for j in range(n)]
                for i in range(n)
            ]
        )
        vmax = float(vals.max())
        if vmax <= 0.0:
            vmax = 1.0
        cells = [
            (xs[i], ys[j], xs[i + 1] - xs[i], ys[j + 1] - ys[j], vals[i, j] / vmax)
            for i in range(n)
            for j in range(n)
        ]
    return render_polylines([(theta1, theta2, "path")], title=title, cells=cells)


def snapshots_svg(ts, x_grid, u_rows, title="snapshots") -> str:
    """Family of u(x) curves, one per snapshot time."""
    series = [
        (x_grid, u_rows[i], f"t={ts[i]:.2f}") for i in range(len(ts))
    ]
    return render_polylines(series, title=title)
