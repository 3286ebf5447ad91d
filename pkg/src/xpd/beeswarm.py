"""Standalone SVG beeswarm summaries of attribution matrices.

One horizontal band per feature (top features by mean |phi|, descending),
one dot per instance at x = phi, colored blue-to-red by the feature value's
within-feature percentile, with seeded vertical jitter. No plotting library:
the output must be byte-deterministic.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

MAX_FEATURES_SHOWN = 15
_BLUE = (0, 139, 251)
_RED = (255, 0, 82)

_ROW_H = 26
_LEFT = 150
_PLOT_W = 560
_TOP = 40
_BOTTOM = 30
_DOT_R = 2.4


def _percentiles(col: np.ndarray) -> np.ndarray:
    """Mid-rank percentile per value; constant columns sit at 0.5."""
    n = col.size
    if n <= 1:
        return np.full(n, 0.5)
    # mid-rank: count strictly below plus half the ties excluding self
    uniq, inv, counts = np.unique(col, return_inverse=True, return_counts=True)
    below = np.concatenate(([0], np.cumsum(counts)[:-1]))
    p = (below[inv] + 0.5 * (counts[inv] - 1)) / (n - 1)
    return np.clip(p, 0.0, 1.0)


def _color(p: float) -> str:
    r = round(_BLUE[0] + (_RED[0] - _BLUE[0]) * p)
    g = round(_BLUE[1] + (_RED[1] - _BLUE[1]) * p)
    b = round(_BLUE[2] + (_RED[2] - _BLUE[2]) * p)
    return f"rgb({r},{g},{b})"


def beeswarm_feature_order(phis: np.ndarray) -> np.ndarray:
    """Column indices by mean |phi| descending, ties to the lower index."""
    return np.argsort(-np.abs(phis).mean(axis=0), kind="stable")


def emit_beeswarm(phis: np.ndarray, x: np.ndarray, feature_names: list[str],
                  path: str | Path, seed: int = 0) -> Path:
    phis = np.atleast_2d(np.asarray(phis, dtype=np.float64))
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if phis.size == 0:
        raise ValueError("attribution matrix must be non-empty")
    if phis.shape != x.shape or len(feature_names) != phis.shape[1]:
        raise ValueError("phis, data and feature names must agree in shape")

    shown = beeswarm_feature_order(phis)[:MAX_FEATURES_SHOWN]
    span = float(np.abs(phis[:, shown]).max())
    span = span * 1.05 if span > 0 else 1.0
    height = _TOP + _ROW_H * len(shown) + _BOTTOM
    width = _LEFT + _PLOT_W + 40
    x0 = _LEFT + _PLOT_W / 2.0  # phi = 0 axis
    scale = (_PLOT_W / 2.0) / span
    rng = np.random.default_rng(seed)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{_LEFT}" y="20" font-family="sans-serif" font-size="13">'
        f'attribution summary (dot = instance, color = feature value)</text>',
        f'<line x1="{x0:.2f}" y1="{_TOP - 8}" x2="{x0:.2f}" y2="{height - _BOTTOM + 4}" '
        f'stroke="#999" stroke-width="1"/>',
    ]
    for row, j in enumerate(shown):
        cy = _TOP + _ROW_H * row + _ROW_H / 2.0
        parts.append(
            f'<text x="{_LEFT - 8}" y="{cy + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{feature_names[j]}</text>'
        )
        pct = _percentiles(x[:, j])
        jitter = rng.uniform(-0.38, 0.38, size=phis.shape[0]) * _ROW_H
        for i in range(phis.shape[0]):
            cx = x0 + phis[i, j] * scale
            parts.append(
                f'<circle cx="{cx:.2f}" cy="{cy + jitter[i]:.2f}" r="{_DOT_R}" '
                f'fill="{_color(float(pct[i]))}" fill-opacity="0.75"/>'
            )
    for val, anchor in ((-span, "start"), (0.0, "middle"), (span, "end")):
        parts.append(
            f'<text x="{x0 + val * scale:.2f}" y="{height - 10}" text-anchor="{anchor}" '
            f'font-family="sans-serif" font-size="10">{val:+.3g}</text>'
        )
    parts.append("</svg>")

    path = Path(path)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path
