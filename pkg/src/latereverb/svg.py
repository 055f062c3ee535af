"""Minimal deterministic SVG plots: median-matrix heatmaps and sweep curves."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

# viridis anchor colors, interpolated linearly
_CMAP = np.array([
    [68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37],
], dtype=np.float64)
_LINE_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _color(t):
    t = min(max(float(t), 0.0), 1.0) * (len(_CMAP) - 1)
    i = min(int(t), len(_CMAP) - 2)
    rgb = _CMAP[i] + (t - i) * (_CMAP[i + 1] - _CMAP[i])
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _num(x):
    return f"{x:.2f}".rstrip("0").rstrip(".")


def shared_limits(matrices):
    """Global (min, max) of finite cell values across ``matrices``."""
    vals = np.concatenate([m.values[np.isfinite(m.values)] for m in matrices])
    if vals.size == 0:
        return 0.0, 1.0
    return float(vals.min()), float(vals.max())


def heatmaps(matrices, vmin=None, vmax=None, cell=22):
    """Side-by-side heatmaps sharing one color scale; missing cells are hatched grey."""
    matrices = list(matrices)
    if vmin is None or vmax is None:
        lo, hi = shared_limits(matrices)
        vmin = lo if vmin is None else vmin
        vmax = hi if vmax is None else vmax
    span = (vmax - vmin) or 1.0
    margin, gap, title_h = 70, 40, 30
    widths = [len(m.col_labels) * cell for m in matrices]
    height = max(len(m.row_labels) for m in matrices) * cell + title_h + margin
    width = margin + sum(w + margin + gap for w in widths)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="9">']
    x0 = margin
    for m, w in zip(matrices, widths):
        out.append(f'<text x="{x0 + w / 2:g}" y="15" text-anchor="middle" font-size="12">'
                   f'{escape(str(m.metric))}</text>')
        for i, row in enumerate(m.row_labels):
            y = title_h + i * cell
            out.append(f'<text x="{x0 - 4}" y="{y + cell * 0.65:g}" text-anchor="end">'
                       f'{escape(str(row))}</text>')
            for j in range(len(m.col_labels)):
                v = m.values[i, j]
                fill = "#cccccc" if not np.isfinite(v) else _color((v - vmin) / span)
                title = "missing" if not np.isfinite(v) else _num(v)
                out.append(f'<rect x="{x0 + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                           f'fill="{fill}"><title>{title}</title></rect>')
        yl = title_h + len(m.row_labels) * cell + 10
        for j, col in enumerate(m.col_labels):
            cx = x0 + j * cell + cell / 2
            out.append(f'<text x="{cx:g}" y="{yl}" text-anchor="end" '
                       f'transform="rotate(-60 {cx:g} {yl})">{escape(str(col))}</text>')
        x0 += w + margin + gap
    out.append(f'<text x="{margin}" y="{height - 6}">color scale {_num(vmin)} .. {_num(vmax)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sweep_plot(curves, width=480, height=320):
    """Median points with +-std bars for each curve, one color per metric."""
    curves = list(curves)
    pad = 45
    deltas = np.concatenate([c.delta for c in curves]).astype(float)
    lows = np.concatenate([c.median - c.std for c in curves])
    highs = np.concatenate([c.median + c.std for c in curves])
    xlo, xhi = float(deltas.min()), float(deltas.max())
    ylo, yhi = float(np.nanmin(lows)), float(np.nanmax(highs))
    xspan = (xhi - xlo) or 1.0
    yspan = (yhi - ylo) or 1.0

    def px(d):
        return pad + (d - xlo) / xspan * (width - 2 * pad)

    def py(v):
        return height - pad - (v - ylo) / yspan * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="10">',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>']
    if xlo <= 0 <= xhi:
        out.append(f'<line x1="{px(0):.2f}" y1="{pad}" x2="{px(0):.2f}" y2="{height - pad}" '
                   f'stroke="grey" stroke-dasharray="4 3"/>')
    for k, c in enumerate(curves):
        color = _LINE_COLORS[k % len(_LINE_COLORS)]
        for d, m, s in zip(c.delta, c.median, c.std):
            if not np.isfinite(m):
                continue
            x = px(float(d))
            out.append(f'<line x1="{x:.2f}" y1="{py(m - s):.2f}" x2="{x:.2f}" y2="{py(m + s):.2f}" '
                       f'stroke="{color}" stroke-width="0.8"/>')
            out.append(f'<circle cx="{x:.2f}" cy="{py(m):.2f}" r="2" fill="{color}"/>')
        out.append(f'<text x="{width - pad}" y="{pad + 12 * k}" text-anchor="end" fill="{color}">'
                   f'{escape(str(c.metric))}</text>')
    out.append(f'<text x="{width / 2:g}" y="{height - 10}" text-anchor="middle">delta panels</text>')
    out.append(f'<text x="{pad}" y="{height - pad + 14}" text-anchor="middle">{_num(xlo)}</text>')
    out.append(f'<text x="{width - pad}" y="{height - pad + 14}" text-anchor="middle">{_num(xhi)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
