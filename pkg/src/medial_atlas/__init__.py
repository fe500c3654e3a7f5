"""Singular sets of distance functions under Minkowski norms."""

from . import gallery, norms, propagate, scene, sectors, singular
from .norms import Norm, euclidean, quadratic, randers
from .propagate import cover, split, trace_arc_2d
from .scene import Arc, PointSet, Polyline, Scene, Segment, distance_to, project
from .sectors import join_arcs, sector_arc, sectors_at
from .singular import classify, oracle_scan

__all__ = [
    "gallery", "norms", "propagate", "scene", "sectors", "singular",
    "Norm", "euclidean", "quadratic", "randers",
    "Arc", "PointSet", "Polyline", "Scene", "Segment", "distance_to", "project",
    "classify", "oracle_scan", "cover", "split", "trace_arc_2d",
    "join_arcs", "sector_arc", "sectors_at",
]
__version__ = "0.1.0"
