"""Propagation of singularities from points with exactly two nearest clusters.

Near such a point p the set splits into two far-apart pieces N1, N2 and the
singular set coincides with the zero set of f = d_N1 - d_N2.  This module
builds the split, estimates a radius on which it stays valid, traces the
zero set and covers sampled singular sets greedily by such arcs.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from . import norms
from .scene import DEFAULT_ETA, Scene, SceneError, clip_by_ball, distance_to, project, union
from .singular import (OracleGrid, SingularSample, classify, conv_dim, oracle_scan,
                       sample_singular_set)

EPS_G = 1e-4
CORRECTOR_TOL = 1e-10
CORRECTOR_ITERS = 20
STEP_LIMIT = 100_000
DYADIC_LEVELS = 20

LEFT_BALL = "left_ball"
LEFT_WINDOW = "left_window"
DEGENERATE = "gradient_degenerate"
ESCAPED = "projection_escaped"
CORRECTOR_FAILED = "corrector_failed"
STEP_LIMIT_REACHED = "step_limit"
SEED = "seed"


class PropagationError(RuntimeError):
    pass


@dataclass
class SplitPair:
    N1: Scene
    N2: Scene
    q1: np.ndarray
    q2: np.ndarray
    p: np.ndarray
    rad: float
    delta: Optional[float] = None

    @property
    def dim(self) -> int:
        return len(self.p)

    def f(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return self.N1.distance(X) - self.N2.distance(X)

    def union(self) -> Scene:
        if getattr(self, "_union", None) is None:
            self._union = union(self.N1, self.N2)
        return self._union


def split(scene: Scene, sample: SingularSample) -> SplitPair:
    """Clip the set around both nearest clusters with radius rad/4."""
    if not getattr(sample, "singular", False) or sample.k != 2:
        raise PropagationError(f"split needs exactly two clusters, got k={sample.k}")
    q1, q2 = sample.projection.representatives
    rad = sample.rad
    if not rad > 0:
        raise PropagationError("coincident representatives")
    r = rad / 4
    return SplitPair(clip_by_ball(scene, q1, r), clip_by_ball(scene, q2, r), q1, q2,
                     np.asarray(sample.point, float), rad)


def f_eval(pair: SplitPair, x) -> float:
    return float(pair.f(np.asarray(x, float)[None])[0])


def _sphere_dirs(n: int, dim: int) -> np.ndarray:
    if dim == 2:
        th = 2 * math.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    # Fibonacci sphere
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    rho = np.sqrt(1 - z * z)
    th = math.pi * (1 + math.sqrt(5)) * i
    return np.stack([rho * np.cos(th), rho * np.sin(th), z], axis=1)


def ball_samples(norm, p, r: float, n_dirs: int, n_radii: int) -> np.ndarray:
    """Points x with dist_max(p, x) = r * i / n_radii along n_dirs directions."""
    U = _sphere_dirs(n_dirs, len(p))
    scale = np.maximum(norms.evaluate(norm, U), norms.evaluate(norm, -U))
    U = U / scale[:, None]
    radii = r * np.arange(1, n_radii + 1) / n_radii
    return (p + radii[:, None, None] * U[None]).reshape(-1, len(p))


def projections_stay(scene: Scene, pair: SplitPair, X, eta: float = DEFAULT_ETA) -> np.ndarray:
    """Whether a nearest point of each x lies in N1 or N2."""
    d = scene.distance(X)
    du = pair.union().distance(X)
    return du <= d * (1 + eta)


def estimate_delta(scene: Scene, pair: SplitPair, n_dirs: int = 64, n_radii: int = 8,
                   eta: float = DEFAULT_ETA) -> float:
    """Half of the largest dyadic radius rad/2^n on which projections stay in N1 u N2."""
    dN = distance_to(scene, pair.p)
    r = pair.rad / 2
    for _ in range(DYADIC_LEVELS):
        if r < dN:
            X = ball_samples(scene.norm, pair.p, r, n_dirs, n_radii)
            if np.all(projections_stay(scene, pair, X, eta)):
                pair.delta = r / 2
                return pair.delta
        r /= 2
    raise PropagationError(f"no dyadic radius down to rad/2^{DYADIC_LEVELS} keeps the split valid")


@dataclass
class TracedArc:
    vertices: np.ndarray
    residuals: np.ndarray
    grad_mag: np.ndarray
    reasons: tuple            # (start end, finish end)
    h: float
    seed_index: int = 0

    def __len__(self):
        return len(self.vertices)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def distance(self, P) -> np.ndarray:
        """Euclidean distance from points to the polyline."""
        P = np.atleast_2d(P)
        V = self.vertices
        if len(V) == 1:
            return np.linalg.norm(P - V[0], axis=1)
        A, B = V[:-1], V[1:]
        D = B - A
        den = np.maximum(np.einsum("ij,ij->i", D, D), 1e-300)
        out = np.full(len(P), np.inf)
        for s in range(0, len(P), 512):
            Pc = P[s:s + 512]
            t = np.clip(np.einsum("nij,ij->ni", Pc[:, None, :] - A[None], D) / den, 0, 1)
            C = A[None] + t[..., None] * D[None]
            out[s:s + 512] = np.linalg.norm(Pc[:, None, :] - C, axis=2).min(axis=1)
        return out

    def rows(self):
        for i, (v, r, g) in enumerate(zip(self.vertices, self.residuals, self.grad_mag)):
            yield (i,) + tuple(float(x) for x in v) + (float(r), float(g))

    def reversed(self) -> "TracedArc":
        return TracedArc(self.vertices[::-1].copy(), self.residuals[::-1].copy(), self.grad_mag[::-1].copy(),
                         self.reasons[::-1], self.h, len(self) - 1 - self.seed_index)


def fd_gradient(fun, x, step: float) -> np.ndarray:
    E = np.eye(len(x)) * step
    vals = fun(np.concatenate([x + E, x - E]))
    m = len(x)
    return (vals[:m] - vals[m:]) / (2 * step)


def _perp(g):
    return np.array([-g[1], g[0]])


class _Tracer:
    def __init__(self, pair, h, tol, radius, bounds, scene, eps_g, max_steps):
        self.pair, self.h, self.tol = pair, h, tol
        self.radius, self.bounds, self.scene = radius, bounds, scene
        self.eps_g, self.max_steps = eps_g, max_steps
        self.norm = pair.N1.norm

    def grad(self, x):
        return fd_gradient(self.pair.f, x, self.h / 16)

    def correct(self, x, g):
        """Newton along the fixed gradient g, then a bisection bracket of width h."""
        f = self.pair.f
        y = x.copy()
        gg = g @ g
        for _ in range(CORRECTOR_ITERS):
            fy = f(y)[0]
            if abs(fy) <= self.tol:
                return y, abs(fy)
            y = y - fy * g / gg
        u = g / math.sqrt(gg)
        phi = lambda s: f(x + s * u)[0]
        lo, hi = -self.h / 2, self.h / 2
        flo, fhi = phi(lo), phi(hi)
        if flo * fhi > 0:
            return None, math.inf
        s = brentq(phi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        y = x + s * u
        r = abs(phi(s))
        return (y, r) if r <= max(self.tol, 1e2 * np.finfo(float).eps) else (None, r)

    def stop_reason(self, x):
        if self.bounds is not None:
            lo, hi = self.bounds
            if np.any(x < lo) or np.any(x > hi):
                return LEFT_WINDOW
        if self.radius is not None and norms.dist_max(self.norm, self.pair.p, x) > self.radius:
            return LEFT_BALL
        if self.scene is not None and not projections_stay(self.scene, self.pair, x[None])[0]:
            return ESCAPED
        return None

    def walk(self, x0, t0):
        """March from x0 with initial tangent t0; returns vertices after x0 and the stop reason."""
        out, res, gm = [], [], []
        x, t = x0, t0
        g = self.grad(x0)
        for _ in range(self.max_steps):
            pred = x + self.h * t
            # chord corrector: the gradient at the last vertex is close enough
            y, r = self.correct(pred, g)
            if y is None:
                return out, res, gm, CORRECTOR_FAILED
            step = float(np.linalg.norm(y - x))
            if not self.h / 4 <= step <= 2 * self.h:
                return out, res, gm, CORRECTOR_FAILED
            why = self.stop_reason(y)
            if why:
                return out, res, gm, why
            g = self.grad(y)
            gn = float(np.linalg.norm(g))
            if gn < self.eps_g:
                return out, res, gm, DEGENERATE
            t_new = _perp(g) / gn
            if t_new @ t < 0:
                t_new = -t_new
            out.append(y)
            res.append(r)
            gm.append(gn)
            x, t = y, t_new
        return out, res, gm, STEP_LIMIT_REACHED


def trace_arc_2d(pair: SplitPair, h: Optional[float] = None, tol: float = CORRECTOR_TOL,
                 radius: Optional[float] = -1.0, bounds=None, scene: Optional[Scene] = None,
                 direction=None, eps_g: float = EPS_G, max_steps: int = STEP_LIMIT) -> TracedArc:
    """Predictor-corrector trace of {f = 0} through the base point.

    radius defaults to the pair's delta; pass None for no ball limit (then
    bounds and/or scene should stop the march).  With a direction only the
    half-arc leaving p along it is traced.
    """
    if pair.dim != 2:
        raise PropagationError("trace_arc_2d is planar")
    if radius is not None and radius < 0:
        radius = pair.delta
    if h is None:
        if pair.delta is None:
            raise PropagationError("need a step size or an estimated delta")
        h = pair.delta / 200
    if bounds is not None:
        bounds = (np.asarray(bounds[:2], float), np.asarray(bounds[2:], float))
    tr = _Tracer(pair, h, tol, radius, bounds, scene, eps_g, max_steps)
    p = pair.p
    g = tr.grad(p)
    gn = float(np.linalg.norm(g))
    if gn < eps_g:
        raise PropagationError(f"gradient of f degenerate at the seed ({gn:.3g})")
    x0, r0 = tr.correct(p, g)
    if x0 is None:
        raise PropagationError("corrector diverged at the seed")
    g = tr.grad(x0)
    gn = float(np.linalg.norm(g))
    t = _perp(g) / gn
    if direction is not None:
        if t @ np.asarray(direction, float) < 0:
            t = -t
        fwd, fr, fg, why = tr.walk(x0, t)
        V = np.array([x0] + fwd)
        return TracedArc(V, np.array([r0] + fr), np.array([gn] + fg), (SEED, why), h, 0)
    fwd, fr, fg, why_f = tr.walk(x0, t)
    bwd, br, bg, why_b = tr.walk(x0, -t)
    V = np.array(bwd[::-1] + [x0] + fwd)
    return TracedArc(V, np.array(br[::-1] + [r0] + fr), np.array(bg[::-1] + [gn] + fg),
                     (why_b, why_f), h, len(bwd))


def slope_total_variation(arc: TracedArc) -> float:
    """Sum of absolute turning angles between consecutive edges."""
    D = np.diff(arc.vertices, axis=0)
    ang = np.arctan2(D[:, 1], D[:, 0])
    return float(np.abs(np.angle(np.exp(1j * np.diff(ang)))).sum())


# surfaces in R^3

@dataclass
class TracedSurface:
    vertices: np.ndarray
    faces: np.ndarray
    residuals: np.ndarray


def extract_surface_3d(pair: SplitPair, n: int = 32, radius: Optional[float] = None,
                       tol: float = 1e-9) -> TracedSurface:
    """Marching-cubes zero set of f in B_delta(p) with edge crossings refined by bisection."""
    from skimage.measure import marching_cubes

    if pair.dim != 3:
        raise PropagationError("extract_surface_3d needs a 3D pair")
    radius = pair.delta if radius is None else radius
    if radius is None:
        raise PropagationError("need a radius or an estimated delta")
    norm = pair.N1.norm
    # the dist_max ball sits inside a Euclidean ball of radius radius / c
    R = radius / norms.lower_constant(norm)
    lo = pair.p - R
    step = 2 * R / (n - 1)
    axes = [lo[i] + step * np.arange(n) for i in range(3)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    F = pair.f(G).reshape(n, n, n)
    if F.min() > 0 or F.max() < 0:
        raise PropagationError("f has no zero in the ball; inconsistent pair")
    verts, faces, _, _ = marching_cubes(F, level=0.0)
    # each vertex lies on a grid edge: two integral coordinates and one fractional
    frac = np.abs(verts - np.round(verts))
    axis = np.argmax(frac, axis=1)
    i0 = np.floor(verts).astype(int)
    i0[np.arange(len(verts)), axis] = np.floor(verts[np.arange(len(verts)), axis]).astype(int)
    base = np.round(verts).astype(int)
    base[np.arange(len(verts)), axis] = np.minimum(i0[np.arange(len(verts)), axis], n - 2)
    A = lo + step * base
    B = A.copy()
    B[np.arange(len(verts)), axis] += step
    fa = pair.f(A)
    for _ in range(80):
        M = 0.5 * (A + B)
        fm = pair.f(M)
        same = np.sign(fm) == np.sign(fa)
        A = np.where(same[:, None], M, A)
        fa = np.where(same, fm, fa)
        B = np.where(same[:, None], B, M)
        if np.all(np.linalg.norm(B - A, axis=1) < 1e-15):
            break
    X = 0.5 * (A + B)
    res = np.abs(pair.f(X))
    inside = norms.dist_max(norm, pair.p, X) <= radius
    keep = inside[faces].all(axis=1)
    faces = faces[keep]
    used = np.unique(faces)
    if len(used) == 0:
        raise PropagationError("empty zero set inside the ball")
    remap = -np.ones(len(X), int)
    remap[used] = np.arange(len(used))
    return TracedSurface(X[used], remap[faces], res[used])


# cleaving and covering

@dataclass
class CleavingReport:
    passed: bool
    base_rad: float
    bound: float
    offenders: list
    checked: list            # (point, rad) for every off-arc sample in the ball


def cleaving_check(scene: Scene, pair: SplitPair, traced, samples, h: float) -> CleavingReport:
    """Off-arc singular samples in B_delta(p) must have rad <= rad(p) / 2."""
    delta = pair.delta
    bound = 0.5 * pair.rad * (1 + 1e-6)
    pts = np.array([s.point for s in samples]).reshape(-1, pair.dim)
    if isinstance(traced, TracedSurface):
        dist = lambda P: np.min(np.linalg.norm(P[:, None, :] - traced.vertices[None], axis=2), axis=1)
    else:
        dist = traced.distance
    checked, offenders = [], []
    if len(pts):
        inside = norms.dist_max(scene.norm, pair.p, pts) < delta
        idx = np.flatnonzero(inside)
        if len(idx):
            off = idx[dist(pts[idx]) > 2 * h]
            for i in off:
                s = samples[i]
                checked.append((s.point.tolist(), s.rad))
                if s.rad > bound:
                    offenders.append((s.point.tolist(), s.rad))
    return CleavingReport(not offenders, pair.rad, bound, offenders, checked)


@dataclass
class CoverArc:
    arc: TracedArc
    seed: np.ndarray
    rad: float
    delta: float
    stratum: tuple
    covered: int


@dataclass
class CoverReport:
    arcs: List[CoverArc]
    strata: dict
    residual: list                # dicts with point, k, rad, reason
    n_samples: int
    n_sigma2: int
    iteration_cap: int
    iterations: int
    rad_K: float
    h: float
    uncovered: int = 0

    def to_json(self) -> dict:
        return {
            "h": self.h,
            "rad_K": self.rad_K,
            "n_samples": self.n_samples,
            "n_sigma2": self.n_sigma2,
            "iterations": self.iterations,
            "iteration_cap": self.iteration_cap,
            "strata": [{"i": i, "j": j, "count": c} for (i, j), c in sorted(self.strata.items())],
            "arcs": [{"seed": a.seed.tolist(), "rad": a.rad, "delta": a.delta, "stratum": list(a.stratum),
                      "covered": a.covered, "n_vertices": len(a.arc), "reasons": list(a.arc.reasons)}
                     for a in self.arcs],
            "residual": self.residual,
        }


def stratum_index(rad: float, rad_K: float) -> int:
    """i with rad_K/(i+1) < rad <= rad_K/i."""
    i = max(1, int(math.floor(rad_K / rad)))
    while rad > rad_K / i and i > 1:
        i -= 1
    while rad <= rad_K / (i + 1):
        i += 1
    return i


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MEDIAL_ATLAS_THREADS", "1")))
    except ValueError:
        return 1


def cover(scene: Scene, window, h: float = 1 / 512, c_jump: float = 8.0,
          n_dirs: int = 16, n_radii: int = 4, grid: Optional[OracleGrid] = None,
          samples=None, step: Optional[float] = None, threads: Optional[int] = None) -> CoverReport:
    """Greedy covering of the sampled Sigma_2 set in a window by traced arcs.

    Samples come from the grid oracle; they are stratified by radius relative
    to rad_N(K) and by the validated radius delta, then processed in stratum
    order (max rad first, then lexicographic).  Each pick is traced until it
    leaves the window or its projections leave the split; samples within 2h of
    the arc count as covered.
    """
    if scene.dim != 2:
        raise PropagationError("cover is planar")
    window = np.asarray(window, float)
    grid = grid or oracle_scan(scene, window, h, c_jump)
    samples = samples if samples is not None else sample_singular_set(scene, grid)
    step = step or h / 2
    sing = [s for s in samples if s.singular]
    residual = []
    sigma2 = []
    for s in sing:
        if s.k == 2:
            sigma2.append(s)
        else:
            residual.append({"point": s.point.tolist(), "k": s.k, "rad": s.rad,
                             "reason": "overflow" if s.k < 0 else f"multiplicity {s.k}"})
    if not sigma2:
        return CoverReport([], {}, residual, len(samples), 0, 0, 0, 0.0, h)
    rad_K = max(s.rad for s in sigma2)

    def prepare(s):
        try:
            pair = split(scene, s)
            estimate_delta(scene, pair, n_dirs, n_radii)
            return pair
        except (PropagationError, SceneError):
            return None

    workers = threads or _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            pairs = list(ex.map(prepare, sigma2))
    else:
        pairs = [prepare(s) for s in sigma2]

    info = []
    strata = {}
    for s, pair in zip(sigma2, pairs):
        i = stratum_index(s.rad, rad_K)
        if pair is None:
            residual.append({"point": s.point.tolist(), "k": 2, "rad": s.rad, "reason": "no valid delta"})
            continue
        j = int(math.ceil(1.0 / pair.delta))
        strata[(i, j)] = strata.get((i, j), 0) + 1
        info.append((s, pair, i, j))
    info.sort(key=lambda t: (t[2], t[3], -t[0].rad) + tuple(t[0].point))

    area = float(np.prod(window[2:] - window[:2]))
    cap = sum(int(math.ceil(area / (math.pi / j ** 2))) + 1 for (_, j) in strata)
    pts = np.array([t[0].point for t in info]).reshape(-1, 2)
    covered = np.zeros(len(info), bool)
    arcs: List[CoverArc] = []
    iterations = 0
    for n, (s, pair, i, j) in enumerate(info):
        if covered[n]:
            continue
        if iterations >= cap:
            break
        iterations += 1
        try:
            arc = trace_arc_2d(pair, h=step, radius=None, bounds=window, scene=scene)
        except PropagationError as e:
            covered[n] = True
            residual.append({"point": s.point.tolist(), "k": 2, "rad": s.rad, "reason": f"trace failed: {e}"})
            continue
        near = arc.distance(pts) <= 2 * h
        newly = near & ~covered
        covered |= near
        if not covered[n]:
            covered[n] = True
            residual.append({"point": s.point.tolist(), "k": 2, "rad": s.rad, "reason": "seed not on its arc"})
        arcs.append(CoverArc(arc, s.point.copy(), s.rad, pair.delta, (i, j), int(newly.sum())))
    uncovered = 0
    for n in np.flatnonzero(~covered):
        s = info[n][0]
        uncovered += 1
        residual.append({"point": s.point.tolist(), "k": 2, "rad": s.rad, "reason": "iteration cap"})
    return CoverReport(arcs, strata, residual, len(samples), len(sigma2), cap, iterations, rad_K, h, uncovered)


# codimension two in R^3

@dataclass
class TripleSplit:
    scenes: list
    reps: np.ndarray
    p: np.ndarray
    rad: float

    def F(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        d = [s.distance(X) for s in self.scenes]
        return np.stack([d[0] - d[1], d[0] - d[2]], axis=1)


def split3(scene: Scene, sample: SingularSample) -> TripleSplit:
    if not getattr(sample, "singular", False) or sample.k != 3:
        raise PropagationError(f"codimension-2 tracing needs exactly three clusters, got k={sample.k}")
    reps = sample.projection.representatives
    if conv_dim(reps) != 2:
        raise PropagationError("nearest points do not span a triangle")
    r = min(float(norms.dist_max(scene.norm, a, b)) for a, b in itertools.combinations(reps, 2)) / 4
    return TripleSplit([clip_by_ball(scene, q, r) for q in reps], reps, np.asarray(sample.point, float), sample.rad)


def _jacobian(F, x, step):
    E = np.eye(3) * step
    vals = F(np.concatenate([x + E, x - E]))
    return ((vals[:3] - vals[3:]) / (2 * step)).T       # rows are gradients of f1, f2


def trace_codim2_3d(scene: Scene, sample: SingularSample, h: float = 1e-2, tol: float = 1e-12,
                    radius: Optional[float] = None, max_steps: int = 10_000,
                    check: bool = True) -> TracedArc:
    """Pseudo-arclength continuation of {f1 = 0, f2 = 0} through a triple point."""
    if scene.dim != 3:
        raise PropagationError("trace_codim2_3d needs a 3D scene")
    ts = split3(scene, sample)
    radius = ts.rad / 4 if radius is None else radius
    fd = h / 16

    def tangent(x):
        J = _jacobian(ts.F, x, fd)
        t = np.cross(J[0], J[1])
        n = float(np.linalg.norm(t))
        if n < EPS_G:
            raise PropagationError("rank-deficient differential pair")
        return t / n, J

    def correct(x, t, anchor):
        y = x.copy()
        for _ in range(CORRECTOR_ITERS):
            Fv = ts.F(y)[0]
            if np.abs(Fv).max() <= tol and abs(t @ (y - anchor)) <= tol:
                return y, float(np.abs(Fv).max())
            J = _jacobian(ts.F, y, fd)
            A = np.vstack([J, t])
            rhs = np.concatenate([Fv, [t @ (y - anchor)]])
            y = y - np.linalg.solve(A, rhs)
        Fv = ts.F(y)[0]
        r = float(np.abs(Fv).max())
        return (y, r) if r <= 10 * tol else (None, r)

    t0, _ = tangent(ts.p)
    x0, r0 = correct(ts.p, t0, ts.p)
    if x0 is None:
        raise PropagationError("corrector diverged at the seed")

    def march(t):
        out, res, gm = [], [], []
        x = x0
        for _ in range(max_steps):
            pred = x + h * t
            y, r = correct(pred, t, pred)
            if y is None:
                return out, res, gm, CORRECTOR_FAILED
            if norms.dist_max(scene.norm, ts.p, y) > radius:
                return out, res, gm, LEFT_BALL
            t_new, J = tangent(y)
            if t_new @ t < 0:
                t_new = -t_new
            out.append(y)
            res.append(r)
            gm.append(float(np.linalg.norm(np.cross(J[0], J[1]))))
            x, t = y, t_new
        return out, res, gm, STEP_LIMIT_REACHED

    fwd, fr, fg, wf = march(t0)
    bwd, br, bg, wb = march(-t0)
    V = np.array(bwd[::-1] + [x0] + fwd)
    arc = TracedArc(V, np.array(br[::-1] + [r0] + fr), np.array(bg[::-1] + [1.0] + fg), (wb, wf), h, len(bwd))
    if check:
        bad = [v for v in V if classify(scene, v).k < 3]
        if bad:
            raise PropagationError(f"{len(bad)} traced vertices have fewer than three nearest clusters")
    return arc
