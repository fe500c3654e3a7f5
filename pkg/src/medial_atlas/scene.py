"""Closed sets built from geometric primitives, and the nearest-point machinery.

Distances are measured *from* the set *to* the query point, ``d(q, p) = F(p - q)``,
which matters for asymmetric norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import norms
from .norms import Norm

GOLDEN_ITERS = 80
_INVPHI = (math.sqrt(5) - 1) / 2
DEFAULT_ETA = 1e-9
DEFAULT_SEP_REL = 1e-6
MAX_CLUSTERS = 16
OVERFLOW = -1
_CHUNK = 8192


class SceneError(ValueError):
    pass


def _golden_min(obj, n: int, lo=None, hi=None, iters: int = GOLDEN_ITERS):
    """Vectorized golden-section minimization of obj(t) -> (n,) on [lo, hi]."""
    a = np.zeros(n) if lo is None else np.array(lo, dtype=float)
    b = np.ones(n) if hi is None else np.array(hi, dtype=float)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        nc = b - _INVPHI * (b - a)
        nd = a + _INVPHI * (b - a)
        # reuse the surviving interior point
        c_new = np.where(left, nc, d)
        d_new = np.where(left, c, nd)
        f_new = obj(np.where(left, nc, nd))
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
        c, d = c_new, d_new
    return 0.5 * (a + b)


class Primitive:
    kind = ""

    def candidates(self, norm: Norm, P: np.ndarray):
        """Local minimizers of q -> F(p - q): arrays Q (n, c, m) and values (n, c)."""
        raise NotImplementedError

    def clip(self, norm: Norm, center: np.ndarray, r: float) -> List["Primitive"]:
        raise NotImplementedError

    def sample(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def bbox(self):
        pts = self.sample(64)
        return pts.min(axis=0), pts.max(axis=0)


@dataclass(eq=False)
class PointSet(Primitive):
    points: np.ndarray
    kind = "points"

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if len(self.points) == 0 or not np.all(np.isfinite(self.points)):
            raise SceneError("point set must be nonempty and finite")

    def candidates(self, norm, P):
        Q = np.broadcast_to(self.points, (len(P),) + self.points.shape)
        vals = norms.evaluate(norm, P[:, None, :] - self.points[None, :, :])
        return Q, np.atleast_2d(vals).reshape(len(P), -1)

    def clip(self, norm, center, r):
        keep = norms.dist_max(norm, center, self.points) <= r
        return [PointSet(self.points[keep])] if keep.any() else []

    def sample(self, n):
        return self.points

    def bbox(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    def to_json(self):
        return {"type": "points", "data": self.points.tolist()}


def _segment_t(norm: Norm, a, d, P):
    """Parameter in [0, 1] of the point of [a, a + d] closest (from) to each p."""
    if norm.kind != "randers":
        M = np.eye(len(a)) if norm.M is None else norm.M
        Md = M @ d
        den = d @ Md
        if den == 0:
            return np.zeros(len(P))
        return np.clip((P - a) @ Md / den, 0.0, 1.0)
    obj = lambda t: norms.evaluate(norm, P - (a + t[:, None] * d))
    t = _golden_min(obj, len(P))
    # golden section never returns the exact endpoints
    for end in (0.0, 1.0):
        te = np.full(len(P), end)
        t = np.where(obj(te) <= obj(t), te, t)
    return t


def _clip_interval(g, r: float, n_scan: int = 64, iters: int = 60):
    """Sub-intervals of [0, 1] where g(t) <= r, with bisected boundaries."""
    ts = np.linspace(0.0, 1.0, n_scan + 1)
    inside = np.array([g(t) <= r for t in ts])
    out = []
    i = 0
    while i <= n_scan:
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 <= n_scan and inside[j + 1]:
            j += 1
        lo, hi = ts[i], ts[j]
        if i > 0:
            a, b = ts[i - 1], ts[i]
            for _ in range(iters):
                m = 0.5 * (a + b)
                a, b = (a, m) if g(m) <= r else (m, b)
            lo = b
        if j < n_scan:
            a, b = ts[j], ts[j + 1]
            for _ in range(iters):
                m = 0.5 * (a + b)
                a, b = (m, b) if g(m) <= r else (a, m)
            hi = a
        out.append((lo, hi))
        i = j + 1
    return out


@dataclass(eq=False)
class Segment(Primitive):
    a: np.ndarray
    b: np.ndarray
    kind = "segment"

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise SceneError("segment endpoints must be finite")

    def candidates(self, norm, P):
        d = self.b - self.a
        t = _segment_t(norm, self.a, d, P)
        Q = self.a + t[:, None] * d
        return Q[:, None, :], norms.evaluate(norm, P - Q).reshape(-1, 1)

    def clip(self, norm, center, r):
        d = self.b - self.a
        g = lambda t: float(norms.dist_max(norm, center, self.a + t * d))
        pieces = []
        for lo, hi in _clip_interval(g, r):
            pa, pb = self.a + lo * d, self.a + hi * d
            pieces.append(PointSet(pa[None]) if hi - lo <= 0 else Segment(pa, pb))
        return pieces

    def sample(self, n):
        t = np.linspace(0, 1, n)[:, None]
        return self.a + t * (self.b - self.a)

    def bbox(self):
        return np.minimum(self.a, self.b), np.maximum(self.a, self.b)

    def to_json(self):
        return {"type": "segment", "a": self.a.tolist(), "b": self.b.tolist()}


@dataclass(eq=False)
class Polyline(Primitive):
    vertices: np.ndarray
    kind = "polyline"

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        if self.vertices.ndim != 2 or len(self.vertices) < 2:
            raise SceneError("polyline needs at least two vertices")
        if np.any(np.all(np.diff(self.vertices, axis=0) == 0, axis=1)):
            raise SceneError("consecutive polyline vertices must be distinct")
        self._segments = [Segment(a, b) for a, b in zip(self.vertices[:-1], self.vertices[1:])]

    def candidates(self, norm, P):
        parts = [s.candidates(norm, P) for s in self._segments]
        return np.concatenate([q for q, _ in parts], axis=1), np.concatenate([v for _, v in parts], axis=1)

    def clip(self, norm, center, r):
        return [piece for s in self._segments for piece in s.clip(norm, center, r)]

    def sample(self, n):
        return np.concatenate([s.sample(max(2, n // len(self._segments))) for s in self._segments])

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def to_json(self):
        return {"type": "polyline", "vertices": self.vertices.tolist()}


@dataclass(eq=False)
class Arc(Primitive):
    """Circular arc, counter-clockwise from theta0 to theta1 (planar only)."""

    center: np.ndarray
    r: float
    theta0: float
    theta1: float
    kind = "arc"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.r = float(self.r)
        self.theta0 = float(self.theta0)
        self.theta1 = float(self.theta1)
        if self.center.shape != (2,) or not self.r > 0:
            raise SceneError("arc needs a planar center and positive radius")
        if not 0 <= self.theta1 - self.theta0 <= 2 * math.pi + 1e-12:
            raise SceneError("arc angle range must satisfy 0 <= theta1 - theta0 <= 2 pi")

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.center + self.r * np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def candidates(self, norm, P):
        if norm.kind == "euclidean":
            w = P - self.center
            phi = np.arctan2(w[:, 1], w[:, 0])
            rel = np.mod(phi - self.theta0, 2 * math.pi)
            span = self.theta1 - self.theta0
            cands = [np.where(rel <= span, self.theta0 + rel, self.theta0),
                     np.full(len(P), self.theta0), np.full(len(P), self.theta1)]
            Q = np.stack([self.point(c) for c in cands], axis=1)
            at_center = np.linalg.norm(w, axis=1) <= 1e-12 * self.r
            if at_center.any():
                # every arc point is nearest; enough samples to overflow the cluster cap
                S = self.point(np.linspace(self.theta0, self.theta1, 2 * MAX_CLUSTERS + 2))
                extra = np.where(at_center[:, None, None], S[None], Q[:, :1])
                Q = np.concatenate([Q, extra], axis=1)
            return Q, norms.evaluate(norm, P[:, None, :] - Q)
        # quasi-convex pieces of at most a quarter turn
        n_pieces = max(1, int(math.ceil((self.theta1 - self.theta0) / (0.5 * math.pi) - 1e-12)))
        edges = np.linspace(self.theta0, self.theta1, n_pieces + 1)
        Qs, Vs = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            obj = lambda th: norms.evaluate(norm, P - self.point(th))
            th = _golden_min(obj, len(P), np.full(len(P), lo), np.full(len(P), hi))
            for end in (lo, hi):
                te = np.full(len(P), end)
                th = np.where(obj(te) <= obj(th), te, th)
            Q = self.point(th)
            Qs.append(Q)
            Vs.append(norms.evaluate(norm, P - Q))
        return np.stack(Qs, axis=1), np.stack(Vs, axis=1)

    def clip(self, norm, center, r):
        span = self.theta1 - self.theta0
        g = lambda t: float(norms.dist_max(norm, center, self.point(self.theta0 + t * span)))
        out = []
        for lo, hi in _clip_interval(g, r, n_scan=720):
            if hi - lo <= 0:
                out.append(PointSet(self.point(self.theta0 + lo * span)[None]))
            else:
                out.append(Arc(self.center, self.r, self.theta0 + lo * span, self.theta0 + hi * span))
        return out

    def sample(self, n):
        return self.point(np.linspace(self.theta0, self.theta1, n))

    def bbox(self):
        # endpoints plus any axis extremes inside the angle range
        k0 = math.ceil(self.theta0 / (0.5 * math.pi))
        k1 = math.floor(self.theta1 / (0.5 * math.pi))
        th = [self.theta0, self.theta1] + [0.5 * math.pi * k for k in range(k0, k1 + 1)]
        pts = self.point(np.array(th))
        return pts.min(axis=0), pts.max(axis=0)

    def to_json(self):
        return {"type": "arc", "center": self.center.tolist(), "r": self.r,
                "theta0": self.theta0, "theta1": self.theta1}


def primitive_from_json(obj: dict) -> Primitive:
    t = obj.get("type")
    if t == "points":
        return PointSet(obj["data"])
    if t == "segment":
        return Segment(obj["a"], obj["b"])
    if t == "polyline":
        return Polyline(obj["vertices"])
    if t == "arc":
        return Arc(obj["center"], obj["r"], obj["theta0"], obj["theta1"])
    raise SceneError(f"unknown primitive type {t!r}")


class Scene:
    def __init__(self, primitives: Sequence[Primitive], norm: Optional[Norm] = None,
                 allow_empty: bool = False):
        self.primitives = list(primitives)
        if not self.primitives and not allow_empty:
            raise SceneError("scene must contain at least one primitive")
        self._boxes = [tuple(np.asarray(b, float) for b in p.bbox()) for p in self.primitives]
        dims = {len(b[0]) for b in self._boxes}
        if len(dims) > 1:
            raise SceneError("primitives of mixed dimension")
        self.dim = dims.pop() if dims else (norm.dim if norm else 2)
        self.norm = norm if norm is not None else norms.euclidean(self.dim)
        if self.norm.dim != self.dim:
            raise SceneError(f"norm dimension {self.norm.dim} != scene dimension {self.dim}")
        if self.dim != 2 and any(isinstance(p, Arc) for p in self.primitives):
            raise SceneError("arcs are planar")

    @property
    def is_empty(self) -> bool:
        return not self.primitives

    def __repr__(self):
        kinds = ", ".join(p.kind for p in self.primitives[:6])
        more = "..." if len(self.primitives) > 6 else ""
        return f"Scene([{kinds}{more}], norm={self.norm.kind})"

    def candidates(self, P: np.ndarray):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        parts = [p.candidates(self.norm, P) for p in self.primitives]
        return np.concatenate([q for q, _ in parts], axis=1), np.concatenate([v for _, v in parts], axis=1)

    def nearest(self, P):
        """Distance and one nearest point for each row of P (chunked).

        Primitives whose bounding box is provably farther than the current
        best are skipped per point.
        """
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if self.is_empty:
            return np.full(len(P), np.inf), np.full(P.shape, np.nan)
        if len(self.primitives) == 1:
            Q, V = self.primitives[0].candidates(self.norm, P)
            k = np.argmin(V, axis=1)
            idx = np.arange(len(P))
            return V[idx, k], Q[idx, k]
        D = np.empty(len(P))
        Qn = np.empty_like(P)
        c = norms.lower_constant(self.norm)
        for s in range(0, len(P), _CHUNK):
            chunk = P[s:s + _CHUNK]
            best = np.full(len(chunk), np.inf)
            bq = np.zeros_like(chunk)
            lbs = [c * np.linalg.norm(np.maximum(np.maximum(lo - chunk, chunk - hi), 0.0), axis=1)
                   for lo, hi in self._boxes]
            for k in np.argsort([lb.min() for lb in lbs], kind="stable"):
                idx = np.flatnonzero(lbs[k] < best)
                if len(idx) == 0:
                    continue
                Q, V = self.primitives[k].candidates(self.norm, chunk[idx])
                j = np.argmin(V, axis=1)
                r = np.arange(len(idx))
                v = V[r, j]
                better = v < best[idx]
                best[idx[better]] = v[better]
                bq[idx[better]] = Q[r, j][better]
            D[s:s + len(chunk)] = best
            Qn[s:s + len(chunk)] = bq
        return D, Qn

    def distance(self, P):
        return self.nearest(P)[0]

    def __eq__(self, other):
        return isinstance(other, Scene) and self.to_json() == other.to_json()

    __hash__ = None

    def to_json(self) -> dict:
        return {"norm": self.norm.to_json(), "primitives": [p.to_json() for p in self.primitives]}

    @classmethod
    def from_json(cls, obj: dict) -> "Scene":
        prims = [primitive_from_json(p) for p in obj["primitives"]]
        dim = len(prims[0].bbox()[0]) if prims else 2
        return cls(prims, norms.from_json(obj.get("norm", {"kind": "euclidean"}), dim=dim))


def distance_to(scene: Scene, p) -> float:
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        return float(scene.distance(p[None])[0])
    return scene.distance(p)


@dataclass
class Cluster:
    representative: np.ndarray
    direction: np.ndarray
    covector: np.ndarray
    members: np.ndarray


@dataclass
class ProjectionSet:
    query: np.ndarray
    distance: float
    clusters: List[Cluster]
    eta_d: float
    sep: float
    overflow: bool = False

    @property
    def k(self) -> int:
        return OVERFLOW if self.overflow else len(self.clusters)

    @property
    def representatives(self) -> np.ndarray:
        return np.array([c.representative for c in self.clusters])

    @property
    def covectors(self) -> np.ndarray:
        return np.array([c.covector for c in self.clusters])

    @property
    def directions(self) -> np.ndarray:
        return np.array([c.direction for c in self.clusters])


def project(scene: Scene, p, eta_d: float = DEFAULT_ETA, sep: Optional[float] = None,
            max_clusters: int = MAX_CLUSTERS) -> ProjectionSet:
    """Cluster the near-minimizers of q -> d(q, p) over the scene."""
    p = np.asarray(p, dtype=float)
    Q, V = scene.candidates(p[None])
    Q, V = Q[0], V[0]
    d = float(V.min())
    if d <= 0:
        raise SceneError(f"query point {p.tolist()} lies on the set")
    if sep is None:
        sep = DEFAULT_SEP_REL * d
    keep = V <= d * (1 + eta_d)
    Q, V = Q[keep], V[keep]
    order = np.argsort(V, kind="stable")
    reps: List[np.ndarray] = []
    members: List[List[np.ndarray]] = []
    norm = scene.norm
    for i in order:
        q = Q[i]
        for j, r in enumerate(reps):
            if norms.dist_max(norm, r, q) <= sep:
                members[j].append(q)
                break
        else:
            reps.append(q)
            members.append([q])
    overflow = len(reps) > max_clusters
    clusters = []
    for r, mem in zip(reps[:max_clusters], members[:max_clusters]):
        w = p - r
        F = norms.evaluate(norm, w)
        clusters.append(Cluster(r, w / F, norms.differential(norm, w), np.array(mem)))
    return ProjectionSet(p, d, clusters, eta_d, sep, overflow)


def clip_by_ball(scene: Scene, center, radius: float) -> Scene:
    """Points y of the scene with dist_max(center, y) <= radius; may be empty."""
    if not radius > 0:
        raise SceneError("clip radius must be positive")
    center = np.asarray(center, dtype=float)
    pieces = [piece for prim in scene.primitives for piece in prim.clip(scene.norm, center, radius)]
    return Scene(pieces, scene.norm, allow_empty=True)


def union(*scenes: Scene) -> Scene:
    return Scene([p for s in scenes for p in s.primitives], scenes[0].norm, allow_empty=True)


def min_cross_distance(a: Scene, b: Scene, n: int = 256) -> float:
    """Sampled lower-level estimate of min dist_max between two scenes."""
    if a.is_empty or b.is_empty:
        return math.inf
    pa = np.concatenate([p.sample(n) for p in a.primitives])
    pb = np.concatenate([p.sample(n) for p in b.primitives])
    d1 = b.distance(pa).min()
    d2 = a.distance(pb).min()
    return float(min(d1, d2))
