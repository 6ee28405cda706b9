"""Minimal deterministic SVG renderers for explanation artifacts.

Hand-rolled rather than a plotting library so that output is a pure function
of the inputs: same numbers, same bytes.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _scale(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    vmin, vmax = float(values.min()), float(values.max())
    if vmax - vmin < 1e-12:
        return np.full(values.size, (lo + hi) / 2.0)
    return lo + (values - vmin) * (hi - lo) / (vmax - vmin)


def svg_segment_plot(
    context,
    bounds,
    weights,
    title: str = "",
    width: int = 800,
    height: int = 240,
) -> str:
    """Series line with per-segment shading: green for positive contribution,
    red for negative, opacity proportional to magnitude."""
    context = np.asarray(context, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    pad = 30
    xs = np.linspace(pad, width - pad, context.size)
    ys = _scale(context, height - pad, pad)
    wmax = float(np.abs(weights).max())
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    ]
    if title:
        parts.append(
            f'<text x="{pad}" y="18" font-size="13" '
            f'font-family="sans-serif">{escape(title)}</text>'
        )
    for (lo, hi), w in zip(bounds, weights):
        x0 = xs[lo]
        x1 = xs[min(hi, context.size) - 1]
        opacity = 0.0 if wmax == 0 else abs(w) / wmax * 0.45
        color = "#2e7d32" if w >= 0 else "#c62828"
        parts.append(
            f'<rect x="{_fmt(x0)}" y="{pad}" width="{_fmt(max(x1 - x0, 1.0))}" '
            f'height="{height - 2 * pad}" fill="{color}" '
            f'opacity="{opacity:.3f}"/>'
        )
    points = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(xs, ys))
    parts.append(
        f'<polyline fill="none" stroke="#212121" stroke-width="1.2" '
        f'points="{points}"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def svg_beeswarm(values, feature_names, title: str = "", width: int = 800) -> str:
    """One horizontal band per feature (ordered by mean |value|), a dot per
    explained row positioned by its SHAP value."""
    values = np.asarray(values, dtype=np.float64)
    n, m = values.shape
    order = np.argsort(-np.abs(values).mean(axis=0), kind="stable")
    row_h = 26
    pad = 30
    height = pad * 2 + row_h * m
    span = float(np.abs(values).max())
    span = span if span > 0 else 1.0
    mid = (width + 160) / 2.0
    half = (width - 160 - 2 * pad) / 2.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    ]
    if title:
        parts.append(
            f'<text x="{pad}" y="18" font-size="13" '
            f'font-family="sans-serif">{escape(title)}</text>'
        )
    parts.append(
        f'<line x1="{_fmt(mid)}" y1="{pad}" x2="{_fmt(mid)}" '
        f'y2="{height - pad}" stroke="#9e9e9e" stroke-width="0.8"/>'
    )
    for band, j in enumerate(order):
        cy = pad + row_h * band + row_h / 2.0
        parts.append(
            f'<text x="8" y="{_fmt(cy + 4)}" font-size="11" '
            f'font-family="sans-serif">{escape(str(feature_names[j]))}</text>'
        )
        for i in range(n):
            cx = mid + values[i, j] / span * half
            # deterministic vertical jitter so coincident dots stay visible
            jit = ((i * 7919 + j * 104729) % 11 - 5) * 0.9
            parts.append(
                f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy + jit)}" r="2.2" '
                f'fill="#1565c0" opacity="0.55"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts)
