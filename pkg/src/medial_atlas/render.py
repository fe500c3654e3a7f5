"""SVG and matplotlib renderings of scans, arcs and scenes (planar only)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional
from xml.sax.saxutils import escape

import numpy as np

from .scene import PointSet, Polyline, Scene, Segment

VIEW = 1024
PAD = 16


@dataclass
class Layers:
    cells: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))   # cell centers
    h: float = 0.0
    arcs: List[np.ndarray] = field(default_factory=list)
    scene: Optional[Scene] = None
    window: Optional[tuple] = None

    def primitive_paths(self, n: int = 256):
        """(kind, vertices) pairs for the scene layer."""
        if self.scene is None:
            return []
        out = []
        for p in self.scene.primitives:
            if isinstance(p, PointSet):
                out.append(("points", p.points))
            elif isinstance(p, (Segment, Polyline)):
                out.append(("path", p.vertices if isinstance(p, Polyline) else np.array([p.a, p.b])))
            else:
                out.append(("path", p.sample(n)))
        return out

    def bounds(self):
        if self.window is not None:
            w = np.asarray(self.window, float)
            return w[:2], w[2:]
        pts = [self.cells - self.h / 2, self.cells + self.h / 2] + list(self.arcs)
        pts += [v for _, v in self.primitive_paths(16)]
        pts = [np.atleast_2d(p)[:, :2] for p in pts if len(p)]
        if not pts:
            return np.zeros(2), np.ones(2)
        P = np.concatenate(pts)
        lo, hi = P.min(axis=0), P.max(axis=0)
        # a straight arc has zero extent across; pad to a square box
        half = np.maximum(0.5 * (hi - lo).max(), 1e-9)
        mid = 0.5 * (lo + hi)
        flat = hi - lo < 1e-12
        lo[flat], hi[flat] = mid[flat] - half, mid[flat] + half
        return lo, hi


def layers_from_tables(tables, scene=None, h=None, window=None) -> Layers:
    """Build layers from (kind, header, data) tables read off CSV artifacts."""
    L = Layers(scene=scene, window=window)
    cells = []
    for kind, header, data in tables:
        if kind == "grid":
            if header[2] == "k":
                raise ValueError("only planar grids can be rendered")
            cells.append(data[:, 2:4])
            if h is None:
                h = infer_h(data)
        else:
            if "z" in header:
                raise ValueError("only planar arcs can be rendered")
            L.arcs.append(data[:, 1:3])
    if cells:
        L.cells = np.concatenate(cells)
    L.h = float(h or 0.0)
    return L


def infer_h(data) -> Optional[float]:
    """Grid spacing from two cells with different index along some axis."""
    for a in (0, 1):
        idx, ctr = data[:, a], data[:, 2 + a]
        if len(idx) and idx.max() > idx.min():
            i, j = np.argmin(idx), np.argmax(idx)
            return float((ctr[j] - ctr[i]) / (idx[j] - idx[i]))
    return None


def _transform(lo, hi):
    span = max(float(np.max(hi - lo)), 1e-300)
    s = (VIEW - 2 * PAD) / span
    off = PAD + 0.5 * ((VIEW - 2 * PAD) - s * (hi - lo))

    def tf(P):
        P = np.atleast_2d(P)
        return np.column_stack([off[0] + s * (P[:, 0] - lo[0]), VIEW - (off[1] + s * (P[:, 1] - lo[1]))])
    return tf, s


def _path_d(V) -> str:
    return "M" + " L".join(f"{x:.3f},{y:.3f}" for x, y in V)


def svg(layers: Layers, title: str = "") -> str:
    lo, hi = layers.bounds()
    tf, s = _transform(lo, hi)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{VIEW}" height="{VIEW}" viewBox="0 0 {VIEW} {VIEW}">']
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append('<rect width="100%" height="100%" fill="white"/>')
    out.append('<g id="primitives" fill="none" stroke="#333333" stroke-width="1.5">')
    for kind, V in layers.primitive_paths():
        T = tf(V)
        if kind == "points":
            out.extend(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="2.5" fill="#333333"/>' for x, y in T)
        else:
            out.append(f'<polyline points="{" ".join(f"{x:.3f},{y:.3f}" for x, y in T)}"/>')
    out.append("</g>")
    out.append('<g id="cells" fill="#c0392b" stroke="none">')
    w = max(layers.h * s, 0.5)
    for x, y in tf(layers.cells) if len(layers.cells) else []:
        out.append(f'<rect x="{x - w / 2:.3f}" y="{y - w / 2:.3f}" width="{w:.3f}" height="{w:.3f}"/>')
    out.append("</g>")
    out.append('<g id="arcs" fill="none" stroke="#1f4e9c" stroke-width="1.5">')
    for V in layers.arcs:
        out.append(f'<path d="{_path_d(tf(V))}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def figure(layers: Layers, title: str = ""):
    """Matplotlib figure with the same three layers."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.collections import PatchCollection
    from matplotlib.patches import Rectangle

    fig, ax = plt.subplots(figsize=(6, 6), dpi=150)
    for kind, V in layers.primitive_paths():
        if kind == "points":
            ax.plot(V[:, 0], V[:, 1], "o", color="0.2", ms=2.5)
        else:
            ax.plot(V[:, 0], V[:, 1], "-", color="0.2", lw=1.0)
    if len(layers.cells):
        h = layers.h or 1e-3
        rects = [Rectangle((x - h / 2, y - h / 2), h, h) for x, y in layers.cells]
        ax.add_collection(PatchCollection(rects, facecolor="#c0392b", edgecolor="none"))
    for V in layers.arcs:
        ax.plot(V[:, 0], V[:, 1], "-", color="#1f4e9c", lw=1.2)
    lo, hi = layers.bounds()
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def figure_png(layers: Layers, title: str = "") -> bytes:
    import io

    import matplotlib.pyplot as plt

    fig = figure(layers, title)
    buf = io.BytesIO()
    # fixed metadata keeps the bytes reproducible
    fig.savefig(buf, format="png", metadata={"Software": None})
    plt.close(fig)
    return buf.getvalue()
