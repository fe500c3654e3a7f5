"""Planar sector decomposition at singular points and per-sector arcs.

The segments from p to its nearest points cut a small disk around p into
angular sectors.  Inside each sector the singular set leaves p along a curve
whose tangent v balances the two bounding covectors, omega_1(v) = omega_2(v).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import norms
from .propagate import PropagationError, SplitPair, TracedArc, trace_arc_2d
from .scene import Scene, clip_by_ball, distance_to, min_cross_distance, project
from .singular import classify

TWO_PI = 2 * math.pi


class SectorError(ValueError):
    pass


@dataclass
class SectorFan:
    p: np.ndarray
    angles: np.ndarray            # directions to the nearest points, sorted in [0, 2 pi)
    representatives: np.ndarray   # nearest points in the same order
    covectors: np.ndarray
    gaps: np.ndarray              # gap i runs from angles[i] counter-clockwise to angles[i+1]
    delta0: float
    overflow: bool = False

    def __len__(self):
        return len(self.gaps)

    def contains(self, i: int, theta) -> np.ndarray:
        """Whether angles lie strictly inside sector i."""
        rel = np.mod(np.asarray(theta) - self.angles[i], TWO_PI)
        return (rel > 0) & (rel < self.gaps[i])

    def to_json(self) -> dict:
        return {"point": self.p.tolist(), "directions": self.angles.tolist(), "gaps": self.gaps.tolist(),
                "representatives": self.representatives.tolist(), "delta0": self.delta0,
                "overflow": self.overflow}


def sectors_at(scene: Scene, p, delta0: Optional[float] = None) -> SectorFan:
    if scene.dim != 2:
        raise SectorError("sectors are planar")
    p = np.asarray(p, float)
    s = classify(scene, p)
    if not s.singular:
        raise SectorError("point is not singular")
    d = distance_to(scene, p)
    delta0 = min(d / 2, s.rad / 2) if delta0 is None else delta0
    if not 0 < delta0 < d:
        raise SectorError("delta0 must lie in (0, d_N(p))")
    if s.projection.overflow:
        empty = np.zeros(0)
        return SectorFan(p, empty, np.zeros((0, 2)), np.zeros((0, 2)), empty, delta0, True)
    reps = s.projection.representatives
    W = reps - p
    ang = np.mod(np.arctan2(W[:, 1], W[:, 0]), TWO_PI)
    order = np.argsort(ang, kind="stable")
    ang, reps = ang[order], reps[order]
    cov = s.projection.covectors[order]
    gaps = np.mod(np.roll(ang, -1) - ang, TWO_PI)
    gaps[gaps == 0] = TWO_PI if len(ang) == 1 else 0.0
    return SectorFan(p, ang, reps, cov, gaps, delta0)


def _unique_projection(piece: Scene, p, q) -> bool:
    proj = project(piece, p)
    return proj.k == 1 and float(norms.dist_max(piece.norm, proj.representatives[0], q)) <= max(proj.sep, 1e-12)


def sector_subarcs(scene: Scene, fan: SectorFan, i: int, max_halvings: int = 20):
    """Short pieces of the set around the two nearest points bounding sector i."""
    n = len(fan)
    if n < 2:
        raise SectorError("sector needs two bounding segments")
    q1, q2 = fan.representatives[i], fan.representatives[(i + 1) % n]
    r = float(norms.dist_max(scene.norm, q1, q2)) / 4
    for _ in range(max_halvings + 1):
        N1, N2 = clip_by_ball(scene, q1, r), clip_by_ball(scene, q2, r)
        if (not N1.is_empty and not N2.is_empty and min_cross_distance(N1, N2) > 0
                and _unique_projection(N1, fan.p, q1) and _unique_projection(N2, fan.p, q2)):
            return N1, N2
        r /= 2
    raise SectorError(f"pieces around sector {i} not separated after {max_halvings} halvings")


@dataclass
class SectorArc:
    fan: SectorFan
    index: int
    N1: Scene
    N2: Scene
    arc: TracedArc
    tangent: np.ndarray
    bisection_residual: float

    def check(self, scene: Scene, n: int = 10) -> dict:
        """Cone membership and singularity of the first n vertices after the seed."""
        V = self.arc.vertices[1:n + 1] - self.fan.p
        theta = np.arctan2(V[:, 1], V[:, 0])
        in_cone = self.fan.contains(self.index, theta)
        sing = [classify(scene, v + self.fan.p).singular for v in V]
        return {"in_cone": bool(np.all(in_cone)), "singular": bool(all(sing)), "checked": len(V)}


def bisector_tangent(fan: SectorFan, i: int) -> np.ndarray:
    """Unit v inside sector i with omega_1(v) = omega_2(v)."""
    n = len(fan)
    w = fan.covectors[i] - fan.covectors[(i + 1) % n]
    v = np.array([-w[1], w[0]])
    v /= np.linalg.norm(v)
    for cand in (v, -v):
        if fan.contains(i, math.atan2(cand[1], cand[0])):
            return cand
    raise SectorError(f"no balancing direction inside sector {i}")


def sector_arc(scene: Scene, fan: SectorFan, i: int, h: Optional[float] = None,
               tol: float = 1e-12) -> SectorArc:
    """Trace the singular arc leaving p into sector i."""
    N1, N2 = sector_subarcs(scene, fan, i)
    n = len(fan)
    q1, q2 = fan.representatives[i], fan.representatives[(i + 1) % n]
    pair = SplitPair(N1, N2, q1, q2, fan.p, float(norms.dist_max(scene.norm, q1, q2)), fan.delta0)
    v = bisector_tangent(fan, i)
    res = abs(float((fan.covectors[i] - fan.covectors[(i + 1) % n]) @ v))
    arc = trace_arc_2d(pair, h=h or fan.delta0 / 200, tol=tol, radius=fan.delta0, scene=scene, direction=v)
    return SectorArc(fan, i, N1, N2, arc, v, res)


@dataclass
class JoinedArc:
    arc: TracedArc
    turning_angle: float     # pi minus the angle between the two outgoing tangents
    opening_angle: float     # angle between the two outgoing tangents
    graphical: bool


def join_arcs(a: SectorArc, b: SectorArc) -> JoinedArc:
    if not np.allclose(a.fan.p, b.fan.p):
        raise SectorError("arcs start at different points")
    if a.index == b.index:
        raise SectorError("arcs lie in the same sector")
    A = a.arc.reversed()
    V = np.concatenate([A.vertices, b.arc.vertices[1:]])
    R = np.concatenate([A.residuals, b.arc.residuals[1:]])
    G = np.concatenate([A.grad_mag, b.arc.grad_mag[1:]])
    arc = TracedArc(V, R, G, (a.arc.reasons[1], b.arc.reasons[1]), a.arc.h, len(A) - 1)
    opening = math.acos(float(np.clip(a.tangent @ b.tangent, -1.0, 1.0)))
    turning = math.pi - opening
    return JoinedArc(arc, turning, opening, turning < math.pi)
