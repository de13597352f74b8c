"""Self-contained SVG renderings of evaluation results.

Hand-rolled rather than delegated to a plotting library so that output
bytes depend only on the data: fixed canvas, fixed decimal formatting,
no timestamps or library version strings.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError

WIDTH, HEIGHT = 480, 320
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 36, 44

PALETTE = ("#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377")


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _svg_open(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]


def _y_scale(lo: float, hi: float):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo

    def to_y(value: float) -> float:
        frac = (value - lo) / span
        return MARGIN_T + (1.0 - frac) * (HEIGHT - MARGIN_T - MARGIN_B)

    return to_y, lo, hi


def render_box_plot(groups: list[tuple[str, list[float]]], title: str, y_label: str = "") -> str:
    """One box per (label, values) group: median line, quartile box,
    min/max whiskers."""
    if not groups or any(len(v) == 0 for _, v in groups):
        raise InputError("box plot needs at least one value per group")
    all_values = np.concatenate([np.asarray(v, dtype=np.float64) for _, v in groups])
    pad = 0.05 * (all_values.max() - all_values.min() + 1e-12)
    to_y, lo, hi = _y_scale(float(all_values.min() - pad), float(all_values.max() + pad))
    parts = _svg_open(title)
    axis_x = MARGIN_L
    parts.append(
        f'<line x1="{axis_x}" y1="{to_y(lo):.1f}" x2="{axis_x}" y2="{to_y(hi):.1f}" stroke="black"/>'
    )
    for tick in (lo, (lo + hi) / 2, hi):
        y = to_y(tick)
        parts.append(f'<line x1="{axis_x - 4}" y1="{y:.1f}" x2="{axis_x}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{axis_x - 8}" y="{y + 4:.1f}" text-anchor="end">{_fmt(tick)}</text>')
    if y_label:
        parts.append(
            f'<text x="14" y="{HEIGHT / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {HEIGHT / 2:.1f})">{y_label}</text>'
        )
    slot = (WIDTH - MARGIN_L - MARGIN_R) / len(groups)
    box_w = min(48.0, slot * 0.5)
    for g, (label, values) in enumerate(groups):
        v = np.asarray(values, dtype=np.float64)
        q1, q2, q3 = (float(q) for q in np.percentile(v, [25, 50, 75]))
        vmin, vmax = float(v.min()), float(v.max())
        cx = MARGIN_L + slot * (g + 0.5)
        color = PALETTE[g % len(PALETTE)]
        parts.append(f'<line x1="{cx:.1f}" y1="{to_y(vmin):.1f}" x2="{cx:.1f}" y2="{to_y(vmax):.1f}" stroke="black"/>')
        for w in (vmin, vmax):
            parts.append(
                f'<line x1="{cx - box_w / 4:.1f}" y1="{to_y(w):.1f}" x2="{cx + box_w / 4:.1f}" y2="{to_y(w):.1f}" stroke="black"/>'
            )
        parts.append(
            f'<rect x="{cx - box_w / 2:.1f}" y="{to_y(q3):.1f}" width="{box_w:.1f}" '
            f'height="{to_y(q1) - to_y(q3):.1f}" fill="{color}" fill-opacity="0.5" stroke="black"/>'
        )
        parts.append(
            f'<line x1="{cx - box_w / 2:.1f}" y1="{to_y(q2):.1f}" x2="{cx + box_w / 2:.1f}" y2="{to_y(q2):.1f}" stroke="black" stroke-width="2"/>'
        )
        parts.append(f'<text x="{cx:.1f}" y="{HEIGHT - 24}" text-anchor="middle">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_scatter(
    points: list[tuple[float, float, str]], title: str, x_label: str = "", y_label: str = ""
) -> str:
    """(x, y, class) points; one color per class, classes sorted for a
    stable legend."""
    if not points:
        raise InputError("scatter plot needs at least one point")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    classes = sorted({p[2] for p in points})
    colors = {c: PALETTE[i % len(PALETTE)] for i, c in enumerate(classes)}
    pad_x = 0.05 * (xs.max() - xs.min() + 1e-12)
    pad_y = 0.05 * (ys.max() - ys.min() + 1e-12)
    x_lo, x_hi = float(xs.min() - pad_x), float(xs.max() + pad_x)
    to_y, y_lo, y_hi = _y_scale(float(ys.min() - pad_y), float(ys.max() + pad_y))

    def to_x(value: float) -> float:
        return MARGIN_L + (value - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_L - MARGIN_R)

    parts = _svg_open(title)
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{to_y(y_lo):.1f}" x2="{MARGIN_L}" y2="{to_y(y_hi):.1f}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{to_y(y_lo):.1f}" x2="{WIDTH - MARGIN_R}" y2="{to_y(y_lo):.1f}" stroke="black"/>'
    )
    for tick in (x_lo, x_hi):
        parts.append(
            f'<text x="{to_x(tick):.1f}" y="{HEIGHT - 28}" text-anchor="middle">{_fmt(tick)}</text>'
        )
    for tick in (y_lo, y_hi):
        parts.append(
            f'<text x="{MARGIN_L - 8}" y="{to_y(tick) + 4:.1f}" text-anchor="end">{_fmt(tick)}</text>'
        )
    if x_label:
        parts.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 8}" text-anchor="middle">{x_label}</text>')
    if y_label:
        parts.append(
            f'<text x="14" y="{HEIGHT / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {HEIGHT / 2:.1f})">{y_label}</text>'
        )
    for x, y, cls in points:
        parts.append(f'<circle cx="{to_x(x):.1f}" cy="{to_y(y):.1f}" r="3" fill="{colors[cls]}" fill-opacity="0.7"/>')
    for i, cls in enumerate(classes):
        lx, ly = WIDTH - MARGIN_R - 110, MARGIN_T + 14 * (i + 1)
        parts.append(f'<circle cx="{lx}" cy="{ly - 4}" r="4" fill="{colors[cls]}"/>')
        parts.append(f'<text x="{lx + 10}" y="{ly}">{cls}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_svg(path, svg: str) -> None:
    with open(path, "w") as f:
        f.write(svg)
