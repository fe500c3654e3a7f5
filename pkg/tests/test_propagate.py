import math

import numpy as np
import pytest

from medial_atlas import gallery, norms
from medial_atlas.propagate import (PropagationError, SplitPair, cleaving_check, cover, estimate_delta,
                                    extract_surface_3d, f_eval, slope_total_variation, split,
                                    stratum_index, trace_arc_2d, trace_codim2_3d)
from medial_atlas.scene import PointSet, Scene, Segment
from medial_atlas.singular import classify, oracle_scan, sample_singular_set

TWO = Scene([PointSet([[1, 0], [-1, 0]])])


def pair_at(scene, p, **kw):
    pr = split(scene, classify(scene, p))
    estimate_delta(scene, pr, **kw)
    return pr


def test_f_example():
    pr = pair_at(TWO, (0, 0))
    assert f_eval(pr, (0.5, 0)) == pytest.approx(-1.0)
    assert pr.delta == 0.25


def test_split_needs_two_clusters():
    with pytest.raises(PropagationError):
        split(TWO, classify(TWO, (0.5, 0)))
    tri = gallery.triangle()
    with pytest.raises(PropagationError):
        split(tri.scene, classify(tri.scene, tri.meta["circumcenter"]))


def test_two_point_trace_is_bisector():
    pr = pair_at(TWO, (0, 0.1))
    arc = trace_arc_2d(pr, tol=1e-8)
    assert np.abs(arc.vertices[:, 0]).max() < 1e-6
    assert arc.reasons == ("left_ball", "left_ball")
    spacing = np.linalg.norm(np.diff(arc.vertices, axis=0), axis=1)
    assert np.all(spacing <= 2 * arc.h) and np.all(spacing >= arc.h / 4)
    assert np.all(np.asarray(arc.residuals) <= 1e-8)


def test_directed_trace_goes_one_way():
    pr = pair_at(TWO, (0, 0))
    arc = trace_arc_2d(pr, direction=(0, 1))
    assert np.all(arc.vertices[1:, 1] > 0)
    assert arc.seed_index == 0


def test_trace_symmetric_under_reflection():
    sc = Scene([PointSet([[1, 0.3], [-1, 0.3]]), Segment((-0.5, -1), (0.5, -1))])
    p = (0.0, 0.3)
    a = trace_arc_2d(pair_at(sc, p), h=1e-3)
    m = Scene([PointSet([[-1, 0.3], [1, 0.3]]), Segment((0.5, -1), (-0.5, -1))])
    b = trace_arc_2d(pair_at(m, p), h=1e-3)
    assert len(a) == len(b)
    # reflection reverses orientation
    assert np.allclose(a.vertices * [-1, 1], b.vertices[::-1], atol=1e-9)


def test_bounded_trace_stops_at_window():
    pr = pair_at(TWO, (0, 0))
    arc = trace_arc_2d(pr, radius=None, bounds=(-0.5, -0.5, 0.5, 0.5), scene=TWO)
    assert arc.reasons == ("left_window", "left_window")
    assert np.abs(arc.vertices[:, 1]).max() <= 0.5


def test_trace_stops_when_projection_escapes():
    # the third point takes over above the circumcenter
    sc = Scene([PointSet([[1, 0], [-1, 0], [0, 1.5]])])
    pr = pair_at(sc, (0, 0))
    arc = trace_arc_2d(pr, radius=None, bounds=(-3, -3, 3, 3), scene=sc, direction=(0, 1))
    assert arc.reasons[1] == "projection_escaped"
    # circumcenter of the three points sits at y = 5/12
    assert arc.vertices[-1, 1] == pytest.approx(5 / 12, abs=2 * arc.h)


def test_randers_trace_matches_oracle():
    R = norms.randers(np.eye(2), [0.5, 0])
    item = gallery.two_point(R)
    pr = pair_at(item.scene, (-0.5, 0))
    arc = trace_arc_2d(pr, h=1e-3)
    assert item.oracle.distance(arc.vertices).max() < 1e-5


def test_refinement_stability_parabola():
    # point (0, 1) against the x-axis segment: the bisector is y = (x^2 + 1) / 2
    pt, seg = Scene([PointSet([[0, 1]])]), Scene([Segment((-3, 0), (3, 0))])
    pr = SplitPair(pt, seg, np.array([0.0, 1.0]), np.array([0.0, 0.0]), np.array([0.0, 0.5]), 1.0, 0.25)
    tv = [slope_total_variation(trace_arc_2d(pr, h=h, radius=None, bounds=(-0.8, 0.2, 0.8, 0.9)))
          for h in (1e-2, 5e-3)]
    assert abs(tv[0] - tv[1]) / tv[1] < 0.05
    exact = 2 * math.atan(0.8)
    assert tv[1] == pytest.approx(exact, rel=1e-2)


@pytest.mark.parametrize("rad, expected", [(2.0, 1), (1.0, 2), (0.7, 2), (0.5, 4), (0.4, 5)])
def test_stratum_index(rad, expected):
    assert stratum_index(rad, 2.0) == expected


def test_cleaving_on_branch():
    item = gallery.branch_example()
    h = 1 / 256
    grid = oracle_scan(item.scene, (-0.5, -0.5, 0.5, 0.5), h)
    samples = sample_singular_set(item.scene, grid)
    pr = pair_at(item.scene, (0, 0))
    arc = trace_arc_2d(pr, h=h / 4)
    rep = cleaving_check(item.scene, pr, arc, samples, h)
    assert rep.passed and rep.checked
    assert max(r for _, r in rep.checked) <= 0.5


def test_cover_triangle():
    item = gallery.triangle()
    rep = cover(item.scene, (-0.5, -0.5, 0.5, 0.5), h=1 / 128)
    assert 3 <= len(rep.arcs) <= 6
    assert rep.uncovered == 0
    assert [r["k"] for r in rep.residual] == [3]
    assert rep.iterations < rep.iteration_cap
    js = rep.to_json()
    assert len(js["arcs"]) == len(rep.arcs)


def test_surface_3d_is_bisector_plane():
    sc = Scene([PointSet([[1, 0, 0], [-1, 0, 0]])])
    pr = pair_at(sc, (0, 0.1, 0.2))
    surf = extract_surface_3d(pr)
    assert len(surf.faces) > 0
    assert np.abs(surf.vertices[:, 0]).max() < 1e-9
    assert np.all(np.linalg.norm(surf.vertices - pr.p, axis=1) <= pr.delta + 1e-12)


def test_codim2_trace_is_circumaxis():
    A = np.array([[1, 0, 0], [-0.5, 0.9, 0], [-0.4, -0.8, 0.1]])
    sc = Scene([PointSet(A)])
    a, b, c = A
    n = np.cross(b - a, c - a)
    M = np.array([b - a, c - a, n])
    cc = np.linalg.solve(M, [(b @ b - a @ a) / 2, (c @ c - a @ a) / 2, n @ a])
    s = classify(sc, cc)
    assert s.k == 3
    arc = trace_codim2_3d(sc, s)
    u = n / np.linalg.norm(n)
    D = arc.vertices - cc
    assert np.linalg.norm(D - np.outer(D @ u, u), axis=1).max() < 1e-6
    assert len(arc) > 10
