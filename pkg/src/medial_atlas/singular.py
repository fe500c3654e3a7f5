"""Classification of singular points and the brute-force grid oracle."""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import norms
from .scene import (DEFAULT_ETA, OVERFLOW, ProjectionSet, Scene, SceneError,
                    clip_by_ball, project)

C_JUMP = 8.0
CONV_TOL = 1e-7


class OracleError(ValueError):
    pass


@dataclass
class SingularSample:
    point: np.ndarray
    k: int
    rad: float
    conv_dim: int
    projection: ProjectionSet

    singular = True

    def to_json(self) -> dict:
        return {
            "point": self.point.tolist(),
            "k": self.k,
            "rad": self.rad,
            "conv_dim": self.conv_dim,
            "distance": self.projection.distance,
            "overflow": self.projection.overflow,
            "representatives": self.projection.representatives.tolist(),
            "directions": self.projection.directions.tolist(),
            "covectors": self.projection.covectors.tolist(),
        }


@dataclass
class NonSingular:
    point: np.ndarray
    projection: ProjectionSet

    singular = False
    k = 1

    def to_json(self) -> dict:
        return {"point": self.point.tolist(), "k": 1,
                "distance": self.projection.distance,
                "representative": self.projection.representatives[0].tolist()}


def conv_dim(covectors, tol: float = CONV_TOL) -> int:
    """Affine dimension of the convex hull of a set of covectors."""
    W = np.atleast_2d(np.asarray(covectors, dtype=float))
    if len(W) < 2:
        return 0
    centered = W[1:] - W[0]
    s = np.linalg.svd(centered, compute_uv=False)
    scale = max(np.abs(W).max(), 1.0)
    if s[0] <= tol * scale:
        return 0
    return int(np.sum(s > tol * s[0]))


def radius(norm, representatives) -> float:
    R = np.asarray(representatives)
    best = 0.0
    for a, b in itertools.combinations(range(len(R)), 2):
        best = max(best, float(norms.dist_max(norm, R[a], R[b])))
    return best


def classify(scene: Scene, p, eta_d: float = DEFAULT_ETA, sep: Optional[float] = None):
    p = np.asarray(p, dtype=float)
    proj = project(scene, p, eta_d=eta_d, sep=sep)
    if len(proj.clusters) == 1 and not proj.overflow:
        return NonSingular(p, proj)
    reps = proj.representatives
    return SingularSample(p, proj.k, radius(scene.norm, reps), conv_dim(proj.covectors), proj)


def rad_of_region(samples: Sequence[SingularSample]) -> float:
    if not samples:
        raise ValueError("rad of an empty sample set is undefined")
    return max(s.rad for s in samples)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MEDIAL_ATLAS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class OracleGrid:
    lo: np.ndarray
    h: float
    node_shape: tuple
    nearest: np.ndarray          # nearest point at every node, shape node_shape + (m,)
    node_distance: np.ndarray
    jumps: np.ndarray            # per-cell max nearest-point jump, shape node_shape - 1
    c_jump: float

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def threshold(self) -> float:
        return self.c_jump * self.h

    @property
    def flagged(self) -> np.ndarray:
        """Flagged cell indices, sorted lexicographically."""
        return np.argwhere(self.jumps > self.threshold)

    def centers(self, idx=None) -> np.ndarray:
        idx = self.flagged if idx is None else np.asarray(idx)
        return self.lo + (idx + 0.5) * self.h

    def node(self, idx) -> np.ndarray:
        return self.lo + np.asarray(idx) * self.h

    @property
    def cell_shape(self) -> tuple:
        return self.jumps.shape

    def rows(self):
        for idx in self.flagged:
            c = self.centers(idx[None])[0]
            yield tuple(int(i) for i in idx) + tuple(float(x) for x in c) + (float(self.jumps[tuple(idx)]),)


def _parse_window(window, dim):
    w = np.asarray(window, dtype=float)
    if w.shape != (2 * dim,):
        raise OracleError(f"window needs {2 * dim} numbers")
    lo, hi = w[:dim], w[dim:]
    if np.any(hi <= lo):
        raise OracleError("window upper corner must exceed lower corner")
    return lo, hi


def oracle_scan(scene: Scene, window, h: float, c_jump: float = C_JUMP,
                threads: Optional[int] = None) -> OracleGrid:
    """Flag grid cells across which the nearest point jumps by more than c_jump * h."""
    dim = scene.dim
    lo, hi = _parse_window(window, dim)
    counts = np.round((hi - lo) / h).astype(int)
    node_shape = tuple(int(c) + 1 for c in counts)
    axes = [lo[i] + h * np.arange(node_shape[i]) for i in range(dim)]
    # tiles over the first axis; merged in index order
    n_tiles = max(1, min(node_shape[0], 4 * (threads or _threads())))
    bounds = np.linspace(0, node_shape[0], n_tiles + 1).astype(int)

    def tile(k):
        a, b = bounds[k], bounds[k + 1]
        mesh = np.meshgrid(axes[0][a:b], *axes[1:], indexing="ij")
        P = np.stack([m.ravel() for m in mesh], axis=-1)
        return scene.nearest(P)

    workers = threads or _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(tile, range(n_tiles)))
    else:
        parts = [tile(k) for k in range(n_tiles)]
    D = np.concatenate([d for d, _ in parts]).reshape(node_shape)
    Q = np.concatenate([q for _, q in parts]).reshape(node_shape + (dim,))
    if D.min() < 2 * h:
        raise OracleError(f"window comes within {D.min():.3g} of the set (needs margin {2 * h:.3g})")

    cell_shape = tuple(s - 1 for s in node_shape)
    jumps = np.zeros(cell_shape)
    corners = list(itertools.product((0, 1), repeat=dim))
    for c1, c2 in itertools.combinations(corners, 2):
        if sum(abs(x - y) for x, y in zip(c1, c2)) != 1:
            continue
        s1 = tuple(slice(c, c + n) for c, n in zip(c1, cell_shape))
        s2 = tuple(slice(c, c + n) for c, n in zip(c2, cell_shape))
        jumps = np.maximum(jumps, norms.dist_max(scene.norm, Q[s1], Q[s2]))
    return OracleGrid(lo, float(h), node_shape, Q, D, jumps, float(c_jump))


def _cell_corners(grid: OracleGrid, idx):
    dim = grid.dim
    return [tuple(int(i) + c for i, c in zip(idx, off)) for off in itertools.product((0, 1), repeat=dim)]


def snap_samples(scene: Scene, grid: OracleGrid, iters: int = 52) -> np.ndarray:
    """One point per flagged cell where the nearest point actually jumps.

    Bisects the cell edge carrying the largest jump; the limit point has two
    nearest points by upper semicontinuity of the projection.
    """
    flagged = grid.flagged
    if len(flagged) == 0:
        return np.zeros((0, grid.dim))
    norm = scene.norm
    U = np.empty((len(flagged), grid.dim))
    W = np.empty_like(U)
    QU = np.empty_like(U)
    QW = np.empty_like(U)
    for n, idx in enumerate(flagged):
        best = -1.0
        for a, b in itertools.combinations(_cell_corners(grid, idx), 2):
            if sum(abs(x - y) for x, y in zip(a, b)) != 1:
                continue
            j = float(norms.dist_max(norm, grid.nearest[a], grid.nearest[b]))
            if j > best:
                best = j
                U[n], W[n] = grid.node(a), grid.node(b)
                QU[n], QW[n] = grid.nearest[a], grid.nearest[b]
    for _ in range(iters):
        M = 0.5 * (U + W)
        _, QM = scene.nearest(M)
        left = norms.dist_max(norm, QU, QM) >= norms.dist_max(norm, QM, QW)
        W = np.where(left[:, None], M, W)
        QW = np.where(left[:, None], QM, QW)
        U = np.where(left[:, None], U, M)
        QU = np.where(left[:, None], QU, QM)
    return 0.5 * (U + W)


def _distinct(norm, pts, thresh):
    reps = []
    for q in pts:
        if all(norms.dist_max(norm, q, r) > thresh for r in reps):
            reps.append(q)
    return reps


def triple_points(scene: Scene, grid: OracleGrid, tol: float = 1e-12, max_iter: int = 40) -> np.ndarray:
    """Planar points equidistant to three distinct local pieces of the set.

    Seeds are flagged cells whose corners see at least three separated nearest
    points; Newton on (d_1 - d_2, d_1 - d_3) with the pieces clipped around
    the corner nearest points.
    """
    if grid.dim != 2:
        return np.zeros((0, grid.dim))
    norm = scene.norm
    out = []
    for idx in grid.flagged:
        qs = [grid.nearest[c] for c in _cell_corners(grid, idx)]
        reps = _distinct(norm, qs, grid.threshold)
        if len(reps) < 3:
            continue
        for trio in itertools.combinations(reps, 3):
            r = min(float(norms.dist_max(norm, a, b)) for a, b in itertools.combinations(trio, 2)) / 4
            subs = [clip_by_ball(scene, q, r) for q in trio]
            if any(s.is_empty for s in subs):
                continue

            def F(x):
                d = [s.distance(x[None])[0] for s in subs]
                return np.array([d[0] - d[1], d[0] - d[2]])

            x = grid.centers(idx[None])[0]
            eps = grid.h * 1e-3
            ok = False
            for _ in range(max_iter):
                fx = F(x)
                if np.abs(fx).max() <= tol:
                    ok = True
                    break
                J = np.column_stack([(F(x + eps * e) - F(x - eps * e)) / (2 * eps) for e in np.eye(2)])
                try:
                    x = x - np.linalg.solve(J, fx)
                except np.linalg.LinAlgError:
                    break
            cell_lo = grid.node(idx) - grid.h
            cell_hi = grid.node(idx) + 2 * grid.h
            if ok and np.all(x >= cell_lo) and np.all(x <= cell_hi):
                out.append(x)
    if not out:
        return np.zeros((0, 2))
    out = np.array(out)
    # deduplicate
    keep = []
    for x in out:
        if all(np.linalg.norm(x - y) > 1e-9 for y in keep):
            keep.append(x)
    return np.array(keep)


def sample_singular_set(scene: Scene, grid: OracleGrid, eta_d: float = DEFAULT_ETA) -> List:
    """Classified samples of the singular set inside the scanned window."""
    pts = snap_samples(scene, grid)
    tri = triple_points(scene, grid)
    if len(tri):
        pts = np.concatenate([pts, tri])
    out = []
    for x in pts:
        try:
            out.append(classify(scene, x, eta_d=eta_d))
        except SceneError:
            continue
    return out
