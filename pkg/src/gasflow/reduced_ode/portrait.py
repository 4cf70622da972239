"""SVG rendering of phase portraits (800x600 viewBox, no plotting library)."""
from __future__ import annotations

import numpy as np

W, H, PAD = 800, 600, 50


def _bounds(arrays, q=99.0):
    pts = np.concatenate([a for a in arrays if len(a)], axis=0)
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    lo = np.percentile(pts, 100 - q, axis=0)
    hi = np.percentile(pts, q, axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    return lo - 0.05 * span, hi + 0.05 * span


def portrait_svg(portrait, ix=0, iy=1, title="", equilibria=()):
    names = portrait.forward[0].names if portrait.forward else ("x", "y")
    curves = []
    for fw, bw in zip(portrait.forward, portrait.backward):
        curves.append((fw.states[:, [ix, iy]], ""))
        curves.append((bw.states[:, [ix, iy]], ' stroke-dasharray="4 3"'))
    lo, hi = _bounds([c for c, _ in curves] + [np.array(portrait.seeds)[:, [ix, iy]]])

    def px(p):
        p = np.clip(p, lo, hi)
        x = PAD + (p[:, 0] - lo[0]) / (hi[0] - lo[0]) * (W - 2 * PAD)
        y = H - PAD - (p[:, 1] - lo[1]) / (hi[1] - lo[1]) * (H - 2 * PAD)
        return x, y

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" width="{W}" height="{H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" '
           'fill="none" stroke="#888"/>']
    if title:
        out.append(f'<text x="{W // 2}" y="30" text-anchor="middle" font-size="16">{title}</text>')
    out.append(f'<text x="{W // 2}" y="{H - 12}" text-anchor="middle" font-size="14">{names[ix]}</text>')
    out.append(f'<text x="14" y="{H // 2}" font-size="14" transform="rotate(-90 14 {H // 2})">{names[iy]}</text>')
    for c, extra in curves:
        c = c[np.all(np.isfinite(c), axis=1)]
        if len(c) < 2:
            continue
        x, y = px(c)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.2"{extra} points="{pts}"/>')
    x, y = px(np.array(portrait.seeds, float)[:, [ix, iy]])
    for a, b in zip(x, y):
        out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="#c0392b"/>')
    for eq in equilibria:
        x, y = px(np.asarray(eq.point, float)[None, [ix, iy]])
        fill = "#27ae60" if eq.tag == "stable" else "white"
        out.append(f'<rect x="{x[0] - 5:.2f}" y="{y[0] - 5:.2f}" width="10" height="10" '
                   f'fill="{fill}" stroke="black"/>')
        out.append(f'<text x="{x[0] + 8:.2f}" y="{y[0] - 8:.2f}" font-size="12">{eq.tag}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
