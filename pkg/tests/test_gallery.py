import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from medial_atlas import gallery, norms
from medial_atlas.gallery import (branch_a, box_dimension, cantor_convex, cantor_dimension, cantor_gaps,
                                  convex_singular_probe, fat_cantor_gaps, from_function, measure_jump,
                                  non_graphical_witness, optimality_domain, phi, segment_slope,
                                  semiconcavity_check, solve_tangency, zigzag_convex, zigzag_segments)
from medial_atlas.scene import Scene, distance_to
from medial_atlas.singular import classify

# u(0, 0) for the zigzag truncated at index 24, summed independently in 30-digit arithmetic
ZIGZAG_U0 = 0.43548387056216597557


def test_branch_oracle_membership():
    item = gallery.branch_example()
    assert item.oracle.contains([(0.3, 0.75)]).all()
    assert branch_a(1) == 0.75
    assert item.oracle.contains([(0, y) for y in (-3, 0, 0.01, 7)]).all()
    assert not item.oracle.contains([(0.1, 0.1)]).any()


@pytest.mark.parametrize("delta, expected", [(0.02, 0.4)])
def test_solve_tangency(delta, expected):
    a = solve_tangency(delta)
    assert a == pytest.approx(expected, abs=1e-12)
    assert math.hypot(a, 2 - delta) == pytest.approx(2 + delta, abs=1e-13)


def test_tangency_shrinks_with_delta():
    vals = [solve_tangency(d) for d in (0.2, 0.02, 2e-3, 2e-4, 2e-6)]
    assert vals == sorted(vals, reverse=True)
    assert vals[-1] < 1e-2


@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("stages", [1, 3, 6])
def test_fat_cantor_measure(eps, stages):
    gaps, keep = fat_cantor_gaps(eps, stages)
    removed = sum(hi - lo for lo, hi, _ in gaps)
    assert removed <= eps
    assert removed == pytest.approx(eps / 2 * (1 - 2.0 ** -stages))
    assert len(keep) == 2 ** stages
    assert sum(b - a for a, b in keep) == pytest.approx(1 - removed)


def test_parameter_ranges():
    with pytest.raises(ValueError):
        fat_cantor_gaps(1.0, 2)
    with pytest.raises(ValueError):
        cantor_convex(sigma=1.2)
    with pytest.raises(ValueError):
        cantor_convex(depth=13)
    with pytest.raises(ValueError):
        zigzag_convex(3)


@pytest.fixture(scope="module")
def dom():
    return optimality_domain(stages=2)


def test_bump_profile(dom):
    b = dom.bumps[0]
    x = b.x0 + np.linspace(0, b.a, 7)
    expected = (x - b.x0 - b.a) ** 2 / 8
    assert np.allclose(np.abs(b.f(x)), expected, atol=1e-16)


def test_optimality_graph_matches_construction(dom):
    for b in dom.bumps[:6]:
        for x in (b.x0, b.x0 + 0.3 * b.a, b.x0 - 0.6 * b.a):
            assert gallery.graph_height(dom, x) == pytest.approx(float(dom.f(x)), abs=1e-12)


def test_optimality_jump_follows_construction(dom):
    for b in (dom.bumps[0], dom.bumps[2]):
        measured, fd = measure_jump(dom, b)
        assert measured == pytest.approx(fd, rel=1e-2)
        assert fd == pytest.approx(b.jump, rel=1e-2)
        assert np.sign(measured) == (-1 if b.top else 1)


def test_optimality_meta(dom):
    meta = dom.item.meta
    assert meta["removed_length"] <= meta["eps"]
    for m in meta["bumps"]:
        assert m["jump_written"] == pytest.approx(m["jump"] * m["a"])


def test_phi_properties():
    z = np.linspace(-3, 3, 6001)
    v = phi(z)
    assert phi(np.array([0.0]))[0] == 0.375
    assert np.allclose(phi(np.array([1.0, -1.0, 2.5])), [1, 1, 2.5])
    assert np.allclose(v, phi(-z))
    assert np.all(v[:-2] + v[2:] - 2 * v[1:-1] >= -1e-15)
    # value, slope and curvature continuous at |z| = 1
    e = 1e-6
    assert (phi(np.array([1 + e]))[0] - phi(np.array([1 - e]))[0]) / (2 * e) == pytest.approx(1.0, abs=1e-6)
    second = lambda c: (phi(np.array([c + 1e-4]))[0] + phi(np.array([c - 1e-4]))[0] - 2 * phi(np.array([c]))[0]) / 1e-8
    assert second(1 - 1e-3) == pytest.approx(0.0, abs=1e-2)


def test_cantor_examples():
    fn = cantor_convex()
    assert fn([(2, -3)])[0] == 5.0
    gaps, keep = cantor_gaps(0.5, 8)
    x_gap = 0.5 * (gaps[3, 0] + gaps[3, 1])
    assert not convex_singular_probe(fn, (x_gap, 0.5), steps=(1e-6, 1e-7)).singular
    assert not convex_singular_probe(fn, (x_gap, 0.0), steps=(1e-40, 1e-41)).singular
    end = keep[5, 1]
    assert convex_singular_probe(fn, (end, 0.0), steps=(1e-40, 1e-41)).singular
    assert cantor_dimension(0.5) == pytest.approx(0.5)
    assert len(gaps) == 2 ** 8 - 1


def test_cantor_singular_distance():
    fn = cantor_convex(depth=4)
    _, keep = cantor_gaps(0.5, 4)
    assert np.allclose(fn.singular_distance(np.column_stack([keep[:, 0], np.zeros(len(keep))])), 0)
    assert fn.singular_distance([(0.3, 0.2)])[0] >= 0.2


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), which=st.sampled_from(["cantor", "zigzag"]))
def test_midpoint_convexity(seed, which):
    fn = cantor_convex(depth=6) if which == "cantor" else zigzag_convex(12)
    rng = np.random.default_rng(seed)
    X0, X1 = rng.uniform(-1.5, 1.5, (2, 64, 2))
    mid = fn(0.5 * (X0 + X1))
    assert np.all(mid <= 0.5 * (fn(X0) + fn(X1)) + 1e-12)


def test_zigzag_slopes_and_value():
    segs = zigzag_segments(24)
    slopes = {abs(round(segment_slope(a, b), 12)) for j, a, b in segs if j > 0}
    assert slopes == {2.0, round(4 / 3, 12)}
    assert zigzag_convex(24)([(0, 0)])[0] == pytest.approx(ZIGZAG_U0, rel=1e-14)


def test_zigzag_probe():
    fn = zigzag_convex(24)
    assert convex_singular_probe(fn, (0, 0)).singular
    # (1/2, 1/2) = q_1 is a corner of the zigzag, (0.3, 0.3) lies off it
    assert convex_singular_probe(fn, (0.5, 0.5)).singular
    assert not convex_singular_probe(fn, (0.3, 0.3)).singular
    assert fn.singular_distance([(0.3, 0.3)])[0] > 0.03
    a, b = fn.segments[1][1:]
    mid = 0.5 * (a + b)
    assert convex_singular_probe(fn, mid, steps=(1e-9, 1e-10), tol=1e-12).singular
    assert fn.singular_distance([mid])[0] < 1e-15


def test_abs_y_probe():
    fn = from_function(lambda P: np.abs(P[:, 1]))
    r = convex_singular_probe(fn, (0, 0))
    assert r.singular and r.value == pytest.approx(2.0)
    assert abs(r.direction[1]) == pytest.approx(1.0)


@pytest.mark.parametrize("theta_deg", [0, 30, 60, 63, 90, 127, 180, 270, 333])
def test_non_graphical_witness(theta_deg):
    segs = zigzag_segments(44)
    th = math.radians(theta_deg)
    w = non_graphical_witness(segs, th)
    assert w is not None
    x, y = w
    d = y - x
    assert np.linalg.norm(d) > 0
    assert abs(d[0] * math.sin(th) - d[1] * math.cos(th)) <= 1e-12 * np.linalg.norm(d)
    fn_dist = zigzag_convex(44).singular_distance
    assert fn_dist([x, y]).max() < 1e-15
    assert max(np.linalg.norm(x), np.linalg.norm(y)) <= 0.1


def test_semiconcavity_examples():
    two = gallery.two_point().scene
    rep = semiconcavity_check(lambda P: two.distance(P), ((0.0, 3.0), 1.5), C=2.0, n_triples=2000)
    assert rep.passed
    assert semiconcavity_check(lambda P: -np.sum(P ** 2, axis=1), ((0, 0), 1.0), C=0.0).passed
    bad = semiconcavity_check(lambda P: np.sum(P ** 2, axis=1), ((0, 0), 1.0), C=0.0)
    assert not bad.passed and bad.violators


@pytest.mark.parametrize("k", [2, 3])
def test_polygon_center(k):
    item = gallery.polygon_scene(k)
    s = classify(item.scene, (0, 0))
    assert s.k == k + 1
    assert s.conv_dim == 2
    assert distance_to(item.scene, (0, 0)) == pytest.approx(math.cos(math.pi / (k + 1)))


def test_box_dimension_of_segment():
    pts = np.column_stack([np.linspace(0, 1, 4097), np.zeros(4097)])
    sizes = 2.0 ** -np.arange(4, 10)
    assert box_dimension(pts, sizes) == pytest.approx(1.0, abs=0.02)


@pytest.mark.parametrize("name", ["branch", "optimality", "polygon", "two-point", "triangle"])
def test_scene_round_trip(name):
    item = gallery.by_name(name) if name != "optimality" else optimality_domain(stages=1, per_side=2).item
    assert Scene.from_json(item.scene.to_json()) == item.scene


def test_randers_two_point_oracle_is_bisector():
    R = norms.randers(np.eye(2), [0.5, 0])
    item = gallery.two_point(R)
    V = item.oracle.segments[:, 0]
    assert np.allclose(norms.evaluate(R, V - (1, 0)), norms.evaluate(R, V - (-1, 0)), atol=1e-12)


def test_unknown_gallery_name():
    with pytest.raises(KeyError):
        gallery.by_name("nope")
