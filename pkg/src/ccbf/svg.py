"""Small SVG writer for vector-field grids: arrows, the D = 0 contour and equilibria."""
from __future__ import annotations

import numpy as np
from skimage.measure import find_contours

WIDTH = 640


def _fmt(v):
    return f"{v:.2f}"


def contour_paths(xs, ys, values, level=0.0):
    """Level curves of a grid sampled at (xs, ys) as lists of (x, y) points."""
    values = np.asarray(values, float)
    if values.shape[0] < 2 or values.shape[1] < 2:
        return []
    out = []
    for c in find_contours(values, level):
        # find_contours works in (row, col) index space
        y = np.interp(c[:, 0], np.arange(len(ys)), ys)
        x = np.interp(c[:, 1], np.arange(len(xs)), xs)
        out.append(np.column_stack([x, y]))
    return out


def render_field(grid, goal=None, max_arrows=32, title=""):
    xs, ys = grid.xs, grid.ys
    if xs.size == 0 or ys.size == 0:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="40"></svg>\n'
    x0, x1 = float(xs[0]), float(xs[-1])
    y0, y1 = float(ys[0]), float(ys[-1])
    span_x = max(x1 - x0, 1e-12)
    span_y = max(y1 - y0, 1e-12)
    height = int(round(WIDTH * span_y / span_x))
    sx, sy = WIDTH / span_x, height / span_y

    def px(x, y):
        return (x - x0) * sx, height - (y - y0) * sy

    ax, ay = grid.axes
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
             f'viewBox="0 0 {WIDTH} {height}">',
             f'<title>{title}</title>',
             f'<rect width="{WIDTH}" height="{height}" fill="white"/>']

    # obstacle: shade invalid nodes, then draw the D = 0 curve
    cw = sx * span_x / max(len(xs) - 1, 1)
    ch = sy * span_y / max(len(ys) - 1, 1)
    for iy, ix in zip(*np.nonzero(~grid.valid)):
        cx, cy = px(xs[ix], ys[iy])
        lines.append(f'<rect x="{_fmt(cx - cw / 2)}" y="{_fmt(cy - ch / 2)}" width="{_fmt(cw)}" '
                     f'height="{_fmt(ch)}" fill="#ccc"/>')
    for path in contour_paths(xs, ys, grid.D):
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (px(*p) for p in path))
        lines.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')

    stride_x = max(1, int(np.ceil(len(xs) / max_arrows)))
    stride_y = max(1, int(np.ceil(len(ys) / max_arrows)))
    arrow = 0.8 * min(span_x / max_arrows, span_y / max_arrows)
    for iy in range(0, len(ys), stride_y):
        for ix in range(0, len(xs), stride_x):
            if not grid.valid[iy, ix]:
                continue
            v = grid.u[iy, ix, [ax, ay]]
            norm = float(np.hypot(*v))
            if norm == 0.0:
                continue
            d = v / norm * arrow
            bx, by = px(xs[ix], ys[iy])
            tx, ty = px(xs[ix] + d[0], ys[iy] + d[1])
            lines.append(f'<line x1="{_fmt(bx)}" y1="{_fmt(by)}" x2="{_fmt(tx)}" y2="{_fmt(ty)}" '
                         f'stroke="#36c" stroke-width="1" marker-end="url(#head)"/>')
    lines.insert(3, '<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" '
                    'orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#36c"/></marker></defs>')

    for iy, ix in zip(*np.nonzero(grid.is_equilibrium)):
        cx, cy = px(xs[ix], ys[iy])
        lines.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="3" fill="red"/>')
    for e in grid.equilibria:
        if not e.attractive:
            cx, cy = px(e.q[ax], e.q[ay])
            lines.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="4" fill="none" stroke="orange"/>')
    if goal is not None:
        gx, gy = px(goal[ax], goal[ay])
        lines.append(f'<circle cx="{_fmt(gx)}" cy="{_fmt(gy)}" r="5" fill="green"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
