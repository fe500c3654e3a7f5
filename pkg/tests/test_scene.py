import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from medial_atlas import gallery, norms
from medial_atlas.scene import (Arc, PointSet, Polyline, Scene, SceneError, Segment, clip_by_ball,
                                distance_to, project)

R = norms.randers(np.eye(2), [0.5, 0.0])
TWO = Scene([PointSet([[1, 0], [-1, 0]])])


@pytest.fixture(scope="module")
def branch():
    return gallery.branch_example().scene


def test_distance_examples(branch):
    assert distance_to(TWO, (0, 0)) == 1.0
    assert distance_to(Scene([Segment((0, 0), (1, 0))]), (2, 1)) == pytest.approx(math.sqrt(2))
    # nearest points of the origin are (+-1, 0); brute force over the generated stacks
    pts = np.concatenate([p.points for p in branch.primitives])
    assert distance_to(branch, (0, 0)) == pytest.approx(np.linalg.norm(pts, axis=1).min()) == 1.0


def test_distance_on_set_is_zero():
    assert distance_to(TWO, (1, 0)) == 0.0
    with pytest.raises(SceneError):
        project(TWO, (1, 0))


def test_project_examples(branch):
    pr = project(TWO, (0, 0))
    assert pr.k == 2
    assert np.allclose(sorted(map(tuple, pr.directions)), [(-1, 0), (1, 0)])
    pr = project(branch, (0, 0))
    assert pr.k == 2
    assert np.allclose(sorted(map(tuple, pr.representatives)), [(-1, 0), (1, 0)])
    pr = project(TWO, (0.5, 0))
    assert pr.k == 1 and np.allclose(pr.representatives[0], (1, 0))


def test_clip_examples(branch):
    c = clip_by_ball(TWO, (1, 0), 0.5)
    assert len(c.primitives) == 1 and np.allclose(c.primitives[0].points, [[1, 0]])
    c = clip_by_ball(branch, (1, 0), 0.5)
    pts = np.concatenate([p.points for p in c.primitives])
    expected = [(1.0, 0.0)] + [(1.0, 1 / k) for k in range(2, 65)]
    assert sorted(map(tuple, pts)) == sorted(expected)
    c = clip_by_ball(Scene([Segment((0, 0), (4, 0))]), (0, 0), 1.0)
    seg = c.primitives[0]
    assert np.allclose(seg.a, (0, 0)) and np.allclose(seg.b, (1, 0), atol=1e-15)
    assert clip_by_ball(TWO, (5, 5), 0.1).is_empty


def test_clip_arc_membership():
    arc = Scene([Arc((0, 0), 1.0, 0.0, math.pi)])
    c = clip_by_ball(arc, (1, 0), 0.5)
    for prim in c.primitives:
        S = prim.sample(50)
        assert np.all(np.linalg.norm(S - (1, 0), axis=1) <= 0.5 + 1e-12)
    # the clipped arc reaches the boundary of the ball
    end = c.primitives[0].point(c.primitives[0].theta1)
    assert np.linalg.norm(end - (1, 0)) == pytest.approx(0.5, abs=1e-12)


def test_invalid_scenes():
    with pytest.raises(SceneError):
        Scene([])
    with pytest.raises(SceneError):
        Polyline([[0, 0], [0, 0], [1, 1]])
    with pytest.raises(SceneError):
        Scene([PointSet([[0, 0]]), PointSet([[0, 0, 0]])])
    with pytest.raises(SceneError):
        PointSet([[np.inf, 0]])


def test_json_round_trip():
    sc = Scene([PointSet([[0.1, 0.2]]), Segment((0, 0), (1, 1)), Polyline([[0, 0], [1, 0], [1, 1]]),
                Arc((0, 0), 2.0, 0.1, 2.5)], R)
    assert Scene.from_json(sc.to_json()) == sc


def test_arc_projection():
    arc = Scene([Arc((0, 0), 1.0, 0.0, math.pi)])
    assert distance_to(arc, (0.3, 0.4)) == pytest.approx(0.5)
    assert distance_to(arc, (0, 3)) == pytest.approx(2.0)
    # below the arc the nearest points are the endpoints
    assert distance_to(arc, (0.5, -1)) == pytest.approx(math.hypot(0.5, 1))
    assert project(arc, (0, -1)).k == 2


def test_center_of_circle_overflows():
    circle = Scene([Arc((0, 0), 1.0, 0.0, 2 * math.pi)])
    pr = project(circle, (0, 0))
    assert pr.overflow and pr.k == -1


@pytest.mark.parametrize("norm", [norms.euclidean(2), R, norms.quadratic([[2, 0.5], [0.5, 1]])],
                         ids=["euclid", "randers", "quad"])
def test_segment_projection_matches_dense_sampling(norm):
    rng = np.random.default_rng(0)
    a, b = np.array([-1.0, 0.3]), np.array([2.0, -0.4])
    seg = Segment(a, b)
    t = np.linspace(0, 1, 200001)
    line = a + t[:, None] * (b - a)
    for p in rng.uniform(-2, 2, size=(20, 2)):
        vals = norms.evaluate(norm, p - line)
        # convex along the segment
        assert np.all(vals[:-2] + vals[2:] - 2 * vals[1:-1] >= -1e-12)
        _, V = seg.candidates(norm, p[None])
        dense = vals.min()
        assert V[0, 0] <= dense + 1e-12
        assert V[0, 0] == pytest.approx(dense, abs=1e-9)


pt = st.tuples(st.floats(-3, 3), st.floats(-3, 3))


@settings(max_examples=200, deadline=None)
@given(p=pt, q=pt, randers=st.booleans())
def test_distance_one_lipschitz(p, q, randers):
    sc = Scene([PointSet([[1, 0], [-1, 0.5]]), Segment((0, -2), (2, -1))], R if randers else None)
    dp, dq = distance_to(sc, p), distance_to(sc, q)
    assert abs(dp - dq) <= norms.dist_max(sc.norm, p, q) + 1e-12


@settings(max_examples=100, deadline=None)
@given(p=pt)
def test_projection_realizes_distance(p):
    sc = Scene([PointSet([[1, 0], [-1, 0.5]]), Segment((0, -2), (2, -1))], R)
    d = distance_to(sc, p)
    if d < 1e-6:
        return
    pr = project(sc, p)
    for c in pr.clusters:
        assert norms.evaluate(sc.norm, np.asarray(p) - c.representative) <= d * (1 + 1e-9)
        assert norms.evaluate(sc.norm, c.direction) == pytest.approx(1.0, abs=1e-12)


def test_shrinking_eta_never_adds_clusters():
    rng = np.random.default_rng(2)
    sc = gallery.polygon_scene(3).scene
    for p in np.concatenate([rng.uniform(-0.5, 0.5, (40, 2)), [[0, 0], [0.1, 0.1], [0.2, 0.0]]]):
        ks = [len(project(sc, p, eta_d=eta).clusters) for eta in (1e-3, 1e-6, 1e-9, 1e-12)]
        assert ks == sorted(ks, reverse=True)


def test_nearest_pruning_matches_brute_force():
    dom = gallery.optimality_domain(stages=2, per_side=2)
    sc = dom.item.scene
    P = np.random.default_rng(4).uniform([-0.2, -0.5], [1.2, 0.5], (500, 2))
    D, _ = sc.nearest(P)
    _, V = sc.candidates(P)
    assert np.array_equal(D, V.min(axis=1))
