"""Example scenes and convex functions with known singular sets.

Every generator returns its object together with an analytic description of
the singular set, so scans and probes can be checked against ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import brentq

from . import norms
from .scene import Arc, PointSet, Polyline, Scene, Segment

K_MAX = 64
FAR = 10.0


@dataclass
class SetOracle:
    """A finite union of segments (degenerate ones are points)."""

    segments: np.ndarray          # (n, 2, m)
    jumps: np.ndarray             # nearest-point jump across each piece, nan if not constant
    description: str = ""

    def __post_init__(self):
        self.segments = np.asarray(self.segments, dtype=float)
        self.jumps = np.asarray(self.jumps, dtype=float).reshape(-1)

    def distance(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        out = np.full(len(P), np.inf)
        for (a, b) in self.segments:
            out = np.minimum(out, segment_distance(P, a, b))
        return out

    def contains(self, P, tol: float = 1e-12) -> np.ndarray:
        return self.distance(P) <= tol

    def resolvable(self, threshold: float) -> "SetOracle":
        """Pieces whose jump exceeds the threshold (unknown jumps are kept)."""
        keep = ~(self.jumps <= threshold)
        return SetOracle(self.segments[keep], self.jumps[keep], self.description)

    def to_json(self) -> dict:
        return {"description": self.description,
                "segments": self.segments.tolist(),
                "jumps": [None if math.isnan(j) else j for j in self.jumps]}


def segment_distance(P, a, b) -> np.ndarray:
    P = np.atleast_2d(P)
    d = b - a
    den = d @ d
    t = np.zeros(len(P)) if den == 0 else np.clip((P - a) @ d / den, 0.0, 1.0)
    return np.linalg.norm(P - (a + t[:, None] * d), axis=1)


@dataclass
class GalleryItem:
    name: str
    scene: Scene
    oracle: SetOracle
    meta: dict = field(default_factory=dict)

    def oracle_json(self) -> dict:
        out = self.oracle.to_json()
        out["name"] = self.name
        out["meta"] = self.meta
        return out


# planar scenes

def two_point(norm: Optional[norms.Norm] = None) -> GalleryItem:
    norm = norm or norms.euclidean(2)
    q1, q2 = np.array([1.0, 0.0]), np.array([-1.0, 0.0])
    scene = Scene([PointSet([q1, q2])], norm)
    if norm.is_symmetric and (norm.kind == "euclidean" or np.allclose(norm.M, np.diag(np.diag(norm.M)))):
        segs = [[[0.0, -FAR], [0.0, FAR]]]
    else:
        segs = bisector_polyline(norm, q1, q2, np.linspace(-2, 2, 801))
    return GalleryItem("two-point", scene, SetOracle(np.array(segs), np.full(len(segs), 2.0), "bisector of (1,0) and (-1,0)"))


def bisector_polyline(norm, q1, q2, ys, span: float = 50.0):
    """Rows of {F(p - q1) = F(p - q2)} for points q1 = (x1, 0), q2 = (x2, 0) with x1 > x2."""
    pts = []
    for y in ys:
        g = lambda x: norms.evaluate(norm, np.array([x, y]) - q1) - norms.evaluate(norm, np.array([x, y]) - q2)
        pts.append([brentq(g, -span, span, xtol=1e-15, rtol=1e-15), y])
    pts = np.array(pts)
    return np.stack([pts[:-1], pts[1:]], axis=1)


TRIANGLE = np.array([[-1.0, -0.6], [1.1, -0.5], [0.15, 1.0]])


def circumcenter(A, B, C) -> np.ndarray:
    M = 2 * np.array([B - A, C - A])
    rhs = np.array([B @ B - A @ A, C @ C - A @ A])
    return np.linalg.solve(M, rhs)


def triangle(points=None) -> GalleryItem:
    """Three points in general position; the singular set is three rays from the circumcenter."""
    P = TRIANGLE if points is None else np.asarray(points, float)
    c = circumcenter(*P)
    segs, jumps = [], []
    for i in range(3):
        a, b, o = P[i], P[(i + 1) % 3], P[(i + 2) % 3]
        mid = 0.5 * (a + b)
        n = np.array([-(b - a)[1], (b - a)[0]])
        n /= np.linalg.norm(n)
        if n @ (mid - o) < 0:        # ray points away from the opposite vertex
            n = -n
        segs.append([c, c + FAR * n])
        jumps.append(np.linalg.norm(b - a))
    item = GalleryItem("triangle", Scene([PointSet(P)]), SetOracle(np.array(segs), np.array(jumps),
                       "pairwise bisector rays from the circumcenter"))
    item.meta.update(circumcenter=c.tolist(), vertices=P.tolist())
    return item


def polygon_scene(k: int) -> GalleryItem:
    """Boundary of a regular (k+1)-gon of circumradius 1; medial axis = spokes."""
    if k < 2:
        raise ValueError("need k >= 2")
    n = k + 1
    th = 0.5 * math.pi + 2 * math.pi * np.arange(n) / n
    V = np.stack([np.cos(th), np.sin(th)], axis=1)
    scene = Scene([Polyline(np.vstack([V, V[:1]]))])
    segs = [[[0.0, 0.0], v] for v in V]
    item = GalleryItem(f"polygon-{n}", scene, SetOracle(np.array(segs), np.full(n, np.nan), f"spokes of the regular {n}-gon"))
    item.meta.update(vertices=V.tolist(), center_multiplicity=n)
    return item


def branch_a(k):
    return 0.5 * (1.0 / k + 1.0 / (k + 1))


def branch_example(k_max: int = K_MAX) -> GalleryItem:
    """Stacks (+-1, 1/k) with their limit points (+-1, 0).

    The singular set is the y-axis plus the horizontal lines y = a_k between
    consecutive stack points; truncation adds one line at 1/(2 k_max).
    """
    pts = [[s, 1.0 / k] for k in range(1, k_max + 1) for s in (1.0, -1.0)] + [[1.0, 0.0], [-1.0, 0.0]]
    scene = Scene([PointSet(pts)])
    segs = [[[0.0, -FAR], [0.0, FAR]]]
    jumps = [2.0]
    for k in range(1, k_max):
        segs.append([[-1.0, branch_a(k)], [1.0, branch_a(k)]])
        jumps.append(1.0 / (k * (k + 1)))
    segs.append([[-1.0, 0.5 / k_max], [1.0, 0.5 / k_max]])
    jumps.append(1.0 / k_max)
    item = GalleryItem("branch", scene, SetOracle(np.array(segs), np.array(jumps), "Y axis plus lines y = a_k"))
    item.meta.update(k_max=k_max, truncation_error=1.0 / k_max)
    return item


# optimality domain

def solve_tangency(delta: float) -> float:
    """a with circles centered (0, delta) radius 1 + delta and (a, 2) radius 1 tangent."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return brentq(lambda a: math.hypot(a, 2 - delta) - (2 + delta), 0.0, 4.0, xtol=1e-15, rtol=1e-15)


def fat_cantor_gaps(eps: float, stages: int):
    """Removed open intervals: stage i takes a centered piece of length eps 4^-i from each survivor."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    keep = [(0.0, 1.0)]
    gaps = []
    for i in range(1, stages + 1):
        L = eps * 4.0 ** -i
        nxt = []
        for a, b in keep:
            m = 0.5 * (a + b)
            gaps.append((m - L / 2, m + L / 2, i))
            nxt += [(a, m - L / 2), (m + L / 2, b)]
        keep = nxt
    return sorted(gaps), keep


@dataclass
class Bump:
    x0: float
    r: float
    a: float
    delta: float
    top: bool

    @property
    def b(self) -> float:
        return self.a * (1 + self.delta) / (2 + self.delta)

    def f(self, x):
        """Signed contribution to the singular graph."""
        x = np.asarray(x, float)
        t = x - self.x0
        v = np.where((t >= 0) & (t <= self.a), (t - self.a) ** 2 / 8,
                     np.where((t < 0) & (t >= -self.a), (t + self.a) ** 2 / 8, 0.0))
        return v if self.top else -v

    @property
    def jump(self) -> float:
        """f'(x0+) - f'(x0-) of the construction."""
        return -self.a / 2 if self.top else self.a / 2


def _mirror_arc(p: Arc) -> Arc:
    lo, hi = -p.theta1, -p.theta0
    shift = 2 * math.pi * math.ceil(-lo / (2 * math.pi)) if lo < 0 else 0.0
    return Arc([p.center[0], -p.center[1]], p.r, lo + shift, hi + shift)


def _bump_primitives(bump: Bump):
    a, d, x0 = bump.a, bump.delta, bump.x0
    tb = math.atan2(2 - d, a)
    prims = [Arc([x0, d], 1 + d, tb, math.pi - tb),
             Arc([x0 + a, 2.0], 1.0, math.pi + tb, 1.5 * math.pi),
             Arc([x0 - a, 2.0], 1.0, 1.5 * math.pi, 2 * math.pi - tb)]
    return prims if bump.top else [_mirror_arc(p) for p in prims]


def _bumps_for_gap(lo, hi, per_side):
    L = hi - lo
    out = []
    for ell in range(1, per_side + 1):
        r = 0.2 * L * 2.0 ** -ell
        a = 0.5 * r
        delta = a * a / 8
        top = ell % 2 == 1
        for x0 in (lo + 0.75 * L * 2.0 ** -ell, hi - 0.75 * L * 2.0 ** -ell):
            out.append(Bump(x0, r, a, delta, top))
    return out


def _flat_pieces(bumps, y):
    edges = sorted((b.x0 - b.a, b.x0 + b.a) for b in bumps)
    x = 0.0
    out = []
    for lo, hi in edges:
        if lo > x:
            out.append(Segment([x, y], [lo, y]))
        x = hi
    if x < 1.0:
        out.append(Segment([x, y], [1.0, y]))
    return out


@dataclass
class OptimalityDomain:
    item: GalleryItem
    bumps: List[Bump]
    gaps: list
    top: Scene
    bottom: Scene

    def f(self, x):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        for b in self.bumps:
            out = out + b.f(x)
        return out


def optimality_domain(eps: float = 0.5, stages: int = 4, per_side: int = 3) -> OptimalityDomain:
    """Stadium around [0,1] x {0} whose flat sides carry C^{1,1} bumps.

    Bumps sit in the gaps of a fat Cantor set and accumulate at both ends of
    each gap; top bumps bend the singular graph down-jumping, bottom ones
    up-jumping.  The boundary is assembled from exact arcs and segments.
    """
    gaps, _ = fat_cantor_gaps(eps, stages)
    if per_side < 2:
        raise ValueError("need at least two bumps per side for both jump signs")
    bumps = [b for lo, hi, _ in gaps for b in _bumps_for_gap(lo, hi, per_side)]
    top_prims = _flat_pieces([b for b in bumps if b.top], 1.0)
    bot_prims = _flat_pieces([b for b in bumps if not b.top], -1.0)
    for b in bumps:
        (top_prims if b.top else bot_prims).extend(_bump_primitives(b))
    R1 = Arc([0.0, 0.0], 1.0, 0.5 * math.pi, 1.5 * math.pi)
    R2 = Arc([1.0, 0.0], 1.0, -0.5 * math.pi, 0.5 * math.pi)
    scene = Scene(top_prims + bot_prims + [R1, R2])
    dom = OptimalityDomain(None, bumps, gaps, Scene(top_prims + [R1, R2]), Scene(bot_prims + [R1, R2]))
    # graph of f as a polyline, dense inside each bump
    xs = [np.linspace(0.0, 1.0, 2 ** 14 + 1)]
    for b in bumps:
        xs.append(b.x0 + b.a * np.linspace(-1, 1, 129))
    xs = np.unique(np.concatenate(xs))
    ys = dom.f(xs)
    V = np.stack([xs, ys], axis=1)
    segs = np.stack([V[:-1], V[1:]], axis=1)
    oracle = SetOracle(segs, np.full(len(segs), 2.0), "graph of f over [0, 1]")
    smallest = min(b.a for b in bumps)
    dom.item = GalleryItem("optimality", scene, oracle, {
        "eps": eps, "stages": stages, "per_side": per_side, "n_bumps": len(bumps),
        "removed_length": sum(hi - lo for lo, hi, _ in gaps),
        "truncation_error": (0.25 * smallest) ** 2 / 8,
        "bumps": [{"x0": b.x0, "a": b.a, "delta": b.delta, "top": b.top, "jump": b.jump,
                   "jump_written": -0.5 * b.a ** 2 if b.top else 0.5 * b.a ** 2} for b in bumps],
    })
    return dom


def graph_height(dom: OptimalityDomain, x: float, span: float = 0.5) -> float:
    """y with d_top(x, y) = d_bottom(x, y), measured on the boundary geometry."""
    g = lambda y: dom.top.distance([[x, y]])[0] - dom.bottom.distance([[x, y]])[0]
    return brentq(g, -span, span, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)


def one_sided_slopes(fn, x0: float, s: float):
    """Second-order one-sided derivatives of fn at x0."""
    y0, yp1, yp2, ym1, ym2 = (fn(x0 + k * s) for k in (0, 1, 2, -1, -2))
    right = (-3 * y0 + 4 * yp1 - yp2) / (2 * s)
    left = (3 * y0 - 4 * ym1 + ym2) / (2 * s)
    return left, right


def measure_jump(dom: OptimalityDomain, bump: Bump, rel_step: float = 1e-3):
    """Derivative jump of the singular graph at a bump center: (measured, analytic FD)."""
    s = rel_step * bump.a
    l, r = one_sided_slopes(lambda x: graph_height(dom, x), bump.x0, s)
    lo, ro = one_sided_slopes(lambda x: float(dom.f(x)), bump.x0, s)
    return r - l, ro - lo


# convex functions

def phi(z):
    """C^2 even convex spline, |z| outside [-1, 1], phi(0) = 3/8."""
    z = np.asarray(z, float)
    zc = np.clip(z, -1.0, 1.0)
    inner = -zc ** 4 / 8 + 3 * zc ** 2 / 4 + 3.0 / 8
    return np.where(np.abs(z) < 1, inner, np.abs(z))


def _phi_second_difference(z, e):
    """phi(z + e) + phi(z - e) - 2 phi(z) without cancellation for small e."""
    inner = (np.abs(z) + np.abs(e) <= 1)
    outer = (np.abs(z) - np.abs(e) >= 1)
    zc, ec = np.clip(z, -1.0, 1.0), np.clip(e, -1.0, 1.0)
    poly = ec * ec * (1.5 - 1.5 * zc * zc) - ec ** 4 / 4
    direct = phi(z + e) + phi(z - e) - 2 * phi(z)
    return np.where(inner, poly, np.where(outer, 0.0, direct))


@dataclass
class ConvexFn:
    name: str
    evaluate: Callable
    singular_distance: Callable
    description: str
    depth: int
    lipschitz: float
    truncation_error: float
    sym: Optional[Callable] = None     # u(p+d) + u(p-d) - 2u(p), stable

    def __call__(self, P):
        return self.evaluate(np.atleast_2d(np.asarray(P, float)))

    def second_difference(self, P, D):
        P = np.atleast_2d(np.asarray(P, float))
        D = np.broadcast_to(np.asarray(D, float), P.shape)
        if self.sym is not None:
            return self.sym(P, D)
        return self.evaluate(P + D) + self.evaluate(P - D) - 2 * self.evaluate(P)


def from_function(f, name="f", lipschitz=np.inf) -> ConvexFn:
    return ConvexFn(name, f, lambda P: np.full(len(np.atleast_2d(P)), np.nan), name, 0, lipschitz, 0.0)


def cantor_gaps(sigma: float, depth: int):
    """Deleted middle intervals of C_sigma up to the given depth, sorted."""
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    if not 0 <= depth <= 12:
        raise ValueError("depth must lie in [0, 12]")
    keep = [(0.0, 1.0)]
    gaps = []
    for _ in range(depth):
        nxt = []
        for a, b in keep:
            L = b - a
            lo, hi = a + 0.5 * (1 - sigma) * L, b - 0.5 * (1 - sigma) * L
            gaps.append((lo, hi))
            nxt += [(a, lo), (hi, b)]
        keep = nxt
    return np.array(sorted(gaps)).reshape(-1, 2), np.array(keep)


def cantor_dimension(sigma: float) -> float:
    return math.log(2) / math.log(2 / (1 - sigma))


def cantor_convex(sigma: float = 0.5, depth: int = 8) -> ConvexFn:
    """Convex u with singular set C x {0}, C the depth-truncated Cantor set C_sigma."""
    gaps, keep = cantor_gaps(sigma, depth)
    A, B = gaps[:, 0], gaps[:, 1]

    def radius(x):
        """r_j(x) inside gap j, the strip weights outside [0, 1], else 0."""
        i = np.searchsorted(A, x, side="right") - 1
        ic = np.clip(i, 0, max(len(A) - 1, 0))
        inside = (i >= 0) & (x > A[ic]) & (x < B[ic]) if len(A) else np.zeros(len(x), bool)
        r = np.where(inside, (x - A[ic]) ** 2 * (x - B[ic]) ** 2, 0.0)
        r = np.where(x < 0, x * x, r)
        return np.where(x > 1, (x - 1) ** 2, r)

    def g(x, y, r):
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, r * phi(y / safe), np.abs(y))

    def evaluate(P):
        x, y = P[:, 0], P[:, 1]
        return 0.5 * x * x + g(x, y, radius(x))

    def sym(P, D):
        x, y = P[:, 0], P[:, 1]
        dx, dy = D[:, 0], D[:, 1]
        frozen = (x + dx == x) & (x - dx == x)
        r = radius(x)
        safe = np.where(r > 0, r, 1.0)
        # x does not move: only the y-profile contributes
        stable = np.where(r > 0, r * _phi_second_difference(y / safe, dy / safe),
                          2 * np.maximum(0.0, np.abs(dy) - np.abs(y)))
        direct = evaluate(P + D) + evaluate(P - D) - 2 * evaluate(P)
        return np.where(frozen, dx * dx + stable, direct)

    def singular_distance(P):
        P = np.atleast_2d(P)
        x = P[:, 0]
        i = np.clip(np.searchsorted(keep[:, 0], x, side="right") - 1, 0, len(keep) - 1)
        dx = np.minimum.reduce([np.maximum(0, np.maximum(keep[i, 0] - x, x - keep[i, 1])),
                                np.abs(x - keep[np.clip(i + 1, 0, len(keep) - 1), 0])])
        return np.hypot(dx, P[:, 1])

    return ConvexFn(f"cantor(sigma={sigma}, depth={depth})", evaluate, singular_distance,
                    "C_sigma x {0} with C_sigma cut at the given depth", depth,
                    lipschitz=2.0, truncation_error=(0.5 * (1 - sigma)) ** depth, sym=sym)


def zigzag_segments(j_max: int = 24):
    """(index, a, b) for K_0 = origin and the A, RA, B, RB pattern up to index j_max."""
    p = lambda j: np.array([2.0 ** -j, 0.0])
    q = lambda j: np.array([2.0 ** -j, 2.0 ** -j])
    R = np.array([-1.0, 1.0])
    out = [(0, np.zeros(2), np.zeros(2))]
    j = 0
    while 4 * j + 1 <= j_max:
        A = (p(j + 1), q(j))
        B = (q(j), p(j + 2))
        for off, (a, b) in zip(range(1, 5), (A, (R * A[0], R * A[1]), B, (R * B[0], R * B[1]))):
            if 4 * j + off <= j_max:
                out.append((4 * j + off, a, b))
        j += 1
    return out


def _segment_sym(P, D, a, b):
    """dist(p+d) + dist(p-d) - 2 dist(p) for the segment [a, b], stable for tiny d."""
    e = b - a
    L = float(np.hypot(*e))
    if L == 0:
        w = P - a
        n0 = np.hypot(w[:, 0], w[:, 1])
        out = np.zeros(len(P))
        for sgn in (1.0, -1.0):
            dd = sgn * D
            n1 = np.hypot(w[:, 0] + dd[:, 0], w[:, 1] + dd[:, 1])
            num = 2 * (w * dd).sum(axis=1) + (dd * dd).sum(axis=1)
            den = n1 + n0
            out += np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        return out
    e = e / L
    n = np.array([-e[1], e[0]])
    w = P - a
    par, perp = w @ e, w @ n
    dpar, dperp = D @ e, D @ n
    ex = lambda t: np.where(t < 0, t, np.where(t > L, t - L, 0.0))
    ex0 = ex(par)
    h0 = np.hypot(ex0, perp)
    out = np.zeros(len(P))
    interior = np.ones(len(P), bool)
    for sgn in (1.0, -1.0):
        t1 = par + sgn * dpar
        ex1 = ex(t1)
        interior &= (ex0 == 0) & (ex1 == 0)
        dex = np.where((ex0 < 0) & (ex1 < 0) | (ex0 > 0) & (ex1 > 0), sgn * dpar, ex1 - ex0)
        dp = sgn * dperp
        num = 2 * (ex0 * dex + perp * dp) + dex * dex + dp * dp
        den = np.hypot(ex1, perp + dp) + h0
        out += np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    flat = 2 * np.maximum(0.0, np.abs(dperp) - np.abs(perp))
    return np.where(interior, flat, out)


def zigzag_convex(j_max: int = 24) -> ConvexFn:
    """u = sum_j 2^-j dist(K_j, .) over the zigzag segments, truncated at j_max."""
    if j_max < 4:
        raise ValueError("j_max must be at least 4")
    segs = zigzag_segments(j_max)

    def evaluate(P):
        out = np.zeros(len(P))
        for j, a, b in segs:
            out += 2.0 ** -j * segment_distance(P, a, b)
        return out

    def sym(P, D):
        out = np.zeros(len(P))
        for j, a, b in segs:
            out += 2.0 ** -j * _segment_sym(P, D, a, b)
        return out

    def singular_distance(P):
        P = np.atleast_2d(P)
        out = np.full(len(P), np.inf)
        for _, a, b in segs:
            out = np.minimum(out, segment_distance(P, a, b))
        return out

    fn = ConvexFn(f"zigzag(j_max={j_max})", evaluate, singular_distance,
                  "union of zigzag segments K_j, j <= j_max", j_max,
                  lipschitz=2.0, truncation_error=2.0 ** -j_max, sym=sym)
    fn.segments = segs
    return fn


def zigzag_tail_bound(j_max: int, p) -> float:
    """Bound on the omitted tail: 2^-j_max (|p| + sqrt 2)."""
    return 2.0 ** -j_max * (float(np.linalg.norm(p)) + math.sqrt(2))


def segment_slope(a, b) -> float:
    return float((b[1] - a[1]) / (b[0] - a[0]))


def non_graphical_witness(segs, theta: float, ball: float = 0.1):
    """Two distinct points of K in the ball whose difference is parallel to (cos t, sin t).

    Walks the right and left halves of the zigzag as polylines and looks for a
    turning point of the projection onto the normal of the given direction.
    """
    u = np.array([math.cos(theta), math.sin(theta)])
    nrm = np.array([-u[1], u[0]])
    for side in (1.0, -1.0):
        chain = _zigzag_chain([(j, a, b) for j, a, b in segs if j > 0 and np.sign(a[0] + b[0]) == side], ball)
        for (a1, b1), (a2, b2) in zip(chain[:-1], chain[1:]):
            # consecutive pieces share b1 == a2
            d1, d2 = b1 - a1, b2 - a2
            g1, g2 = nrm @ d1, nrm @ d2
            if abs(g1) < 1e-15:
                return a1, b1
            if g1 * g2 < 0:
                t = 0.25 * min(1.0, abs(g2 / g1))
                x = b1 - t * d1
                s = t * abs(g1 / g2)
                y = a2 + s * d2
                return x, y
    return None


def _zigzag_chain(side_segs, ball):
    """Order segments of one half from the outside inward: A_j then B_j then A_{j+1} ..."""
    segs = sorted(side_segs, key=lambda t: t[0])
    pieces = []
    for j, a, b in segs:
        if np.linalg.norm(a) <= ball and np.linalg.norm(b) <= ball:
            # A_j runs p_{j+1} -> q_j, B_j runs q_j -> p_{j+2}
            pieces.append((j, a, b))
    pieces.sort(key=lambda t: ((t[0] - 1) // 4, (t[0] - 1) % 4 >= 2))
    return [(a, b) for _, a, b in pieces]


def box_counting(points, sizes):
    """Number of occupied boxes for each box size."""
    P = np.atleast_2d(points)
    return np.array([len(np.unique(np.floor(P / s).astype(np.int64), axis=0)) for s in sizes])


def box_dimension(points, sizes) -> float:
    counts = box_counting(points, sizes)
    slope = np.polyfit(-np.log(sizes), np.log(counts), 1)[0]
    return float(slope)


# probes

@dataclass
class ProbeResult:
    singular: bool
    value: float
    direction: np.ndarray


def probe_values(fn: ConvexFn, X, n_dirs: int = 16, steps=(1e-4, 1e-5)):
    """Max over directions of the extrapolated D+u(x; v) + D+u(x; -v), and its direction."""
    X = np.atleast_2d(np.asarray(X, float))
    s1, s2 = steps
    ratio = s1 / s2
    th = np.pi * np.arange(n_dirs) / n_dirs
    best = np.full(len(X), -np.inf)
    arg = np.zeros(len(X), int)
    for k, t in enumerate(th):
        v = np.array([math.cos(t), math.sin(t)])
        q1 = fn.second_difference(X, s1 * v) / s1
        q2 = fn.second_difference(X, s2 * v) / s2
        J = (ratio * q2 - q1) / (ratio - 1)
        better = J > best
        best = np.where(better, J, best)
        arg = np.where(better, k, arg)
    dirs = np.stack([np.cos(th[arg]), np.sin(th[arg])], axis=1)
    return best, dirs


def convex_singular_probe(fn: ConvexFn, x, n_dirs: int = 16, tol: float = 1e-6, steps=(1e-4, 1e-5)) -> ProbeResult:
    val, d = probe_values(fn, np.asarray(x, float)[None], n_dirs, steps)
    return ProbeResult(bool(val[0] > tol), float(val[0]), d[0])


@dataclass
class SemiconcavityReport:
    passed: bool
    n_triples: int
    worst: float
    violators: list


def semiconcavity_check(evaluate, region, C: float, n_triples: int = 1000, seed: int = 0,
                        slack: float = 1e-12) -> SemiconcavityReport:
    """Test the semi-concavity inequality with constant C on random triples in a disk.

    region = (center, radius).
    """
    rng = np.random.default_rng(seed)
    center, radius = np.asarray(region[0], float), float(region[1])
    m = len(center)

    def draw(n):
        v = rng.normal(size=(n, m))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return center + radius * rng.random((n, 1)) ** (1 / m) * v

    x0, x1 = draw(n_triples), draw(n_triples)
    lam = rng.random(n_triples)
    mid = lam[:, None] * x1 + (1 - lam[:, None]) * x0
    lhs = lam * evaluate(x1) + (1 - lam) * evaluate(x0) - evaluate(mid)
    rhs = C * lam * (1 - lam) * np.sum((x1 - x0) ** 2, axis=1)
    excess = lhs - rhs
    scale = 1.0 + np.abs(evaluate(mid))
    bad = np.flatnonzero(excess > slack * scale)
    viol = [{"x0": x0[i].tolist(), "x1": x1[i].tolist(), "lambda": float(lam[i]), "excess": float(excess[i])}
            for i in bad[:20]]
    return SemiconcavityReport(len(bad) == 0, n_triples, float(excess.max()), viol)


GALLERY = ("branch", "optimality", "cantor", "zigzag", "polygon", "two-point", "triangle")


def by_name(name: str, **kw):
    if name == "branch":
        return branch_example(**kw)
    if name == "optimality":
        return optimality_domain(**kw).item
    if name == "two-point":
        return two_point(**kw)
    if name == "triangle":
        return triangle(**kw)
    if name == "polygon":
        return polygon_scene(kw.get("k", 3))
    if name == "cantor":
        return cantor_convex(**kw)
    if name == "zigzag":
        return zigzag_convex(**kw)
    raise KeyError(f"unknown gallery entry {name!r}; choose from {', '.join(GALLERY)}")
