import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_quad
from groundmap.errors import AtHorizon, DegenerateQuad, SingularSystem
from groundmap.geometry import (
    Homography, Quad, compute_homography, fast_homography, invert, map_point, map_points, square_to_quad,
)

UNIT = [(0, 0), (1, 0), (1, 1), (0, 1)]
SRC = [(710, 540), (1210, 540), (1460, 1080), (460, 1080)]
DST = [(-3.5, 50), (3.5, 50), (3.5, 5), (-3.5, 5)]


def test_identity_square():
    H = compute_homography(Quad(UNIT), Quad(UNIT, "ground"))
    assert H == Homography.identity() or np.allclose(H.h, Homography.identity().h, atol=1e-12)
    assert map_point(H, (3, 7)) == pytest.approx((3, 7), abs=1e-12)


def test_translation_and_inverse():
    H = compute_homography(Quad(UNIT), Quad([(x + 5, y) for x, y in UNIT], "ground"))
    m = H.h / H.h[2, 2]
    assert np.allclose(m, [[1, 0, 5], [0, 1, 0], [0, 0, 1]], atol=1e-12)
    Hi = invert(H)
    mi = Hi.h / Hi.h[2, 2]
    assert np.allclose(mi, [[1, 0, -5], [0, 1, 0], [0, 0, 1]], atol=1e-12)


def test_example_trapezoid_reproduces_vertices():
    H = compute_homography(Quad(SRC), Quad(DST, "ground"))
    for s, d in zip(SRC, DST):
        assert map_point(H, s) == pytest.approx(d, abs=1e-9)
    # gauge holds even though h33 vanishes for this quad
    assert np.linalg.norm(H.h) == pytest.approx(1.0, abs=1e-15)


def test_top_edge_midpoint_maps_to_far_edge_midpoint():
    H = compute_homography(Quad(SRC), Quad(DST, "ground"))
    # the top edge maps onto y = 50 and the u = 960 axis onto x = 0 by symmetry
    x, y = map_point(H, (960, 540))
    assert (x, y) == pytest.approx((0.0, 50.0), abs=1e-6)


def test_map_point_returns_plain_floats():
    H = compute_homography(Quad(SRC), Quad(DST, "ground"))
    assert all(type(c) is float for c in map_point(H, (900, 800)))


def test_collinear_quad_rejected():
    with pytest.raises(DegenerateQuad):
        Quad([(0, 0), (1, 0), (2, 0), (0, 1)])


def test_at_horizon():
    H = Homography(np.array([[1.0, 0, 0], [0, 1, 0], [0, 1, -5]]))
    with pytest.raises(AtHorizon):
        map_point(H, (0, 5))
    with pytest.raises(AtHorizon):
        map_points(H, [(1, 1), (0, 5)])


def test_singular_matrix_rejected():
    with pytest.raises(SingularSystem):
        Homography(np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 1]]))


def test_random_quads_dlt_exact():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        s = random_quad(rng)
        d = random_quad(rng, center=(0.0, 25.0), size=10.0, jitter=2.5)
        H = compute_homography(Quad.from_array(s), Quad.from_array(d, "ground"))
        assert np.abs(map_points(H, s) - d).max() < 1e-9


def test_invert_round_trip():
    rng = np.random.default_rng(1)
    H = compute_homography(Quad.from_array(random_quad(rng)), Quad.from_array(random_quad(rng, (0, 20), 8, 2), "ground"))
    pts = rng.uniform(800, 1100, size=(100, 2))
    back = map_points(invert(H), map_points(H, pts))
    assert np.abs(back - pts).max() < 1e-9
    assert np.abs(map_points(invert(invert(H)), pts) - map_points(H, pts)).max() < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-3))
def test_gauge_invariance(lam):
    H = compute_homography(Quad(SRC), Quad(DST, "ground"))
    scaled = Homography(H.h * lam)
    assert np.allclose(scaled.h, H.h, rtol=0, atol=1e-15)
    assert map_point(scaled, (1000, 700)) == pytest.approx(map_point(H, (1000, 700)), rel=1e-12)


def test_fast_path_matches_gaussian_elimination():
    rng = np.random.default_rng(2)
    for _ in range(200):
        s = random_quad(rng)
        d = random_quad(rng, center=(0.0, 25.0), size=10.0, jitter=2.5)
        slow = compute_homography(Quad.from_array(s), Quad.from_array(d, "ground"))
        fast = Homography(np.array(fast_homography(s.ravel().tolist(), square_to_quad(d.ravel().tolist()))).reshape(3, 3))
        assert np.abs(fast.h - slow.h).max() < 1e-9


def test_json_round_trip():
    H = compute_homography(Quad(SRC), Quad(DST, "ground"))
    assert Homography.from_json(H.to_json()) == H
    q = Quad(SRC)
    assert Quad.from_json(q.to_json()) == q
    assert math.isclose(len(H.to_json()), 9)
