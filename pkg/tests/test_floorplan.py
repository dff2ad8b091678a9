"""Floor polygons: validation, containment, offsets, boundary sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixdiff.errors import InvalidFloor, InvalidInput
from mixdiff.scenes import FloorPlan, point_in_floor

SQUARE10 = FloorPlan(np.array([[-5.0, -5.0], [5.0, -5.0], [5.0, 5.0], [-5.0, 5.0]]))
L_SHAPE = FloorPlan(np.array([
    [0.0, 0.0], [4.0, 0.0], [4.0, 2.0], [2.0, 2.0], [2.0, 4.0], [0.0, 4.0],
]))


def crossing_number_inside(p, vertices) -> bool:
    """Independent even-odd ray-casting oracle."""
    x, y = p
    n = len(vertices)
    inside = False
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


class TestValidation:
    def test_rejects_degenerate_polygons(self):
        with pytest.raises(InvalidFloor):
            FloorPlan(np.array([[0.0, 0.0], [1.0, 0.0]]))
        with pytest.raises(InvalidFloor):
            FloorPlan(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))  # zero area
        with pytest.raises(InvalidFloor):
            FloorPlan(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]))  # repeat
        with pytest.raises(InvalidFloor):
            FloorPlan(np.array([[0.0, 0.0], [np.inf, 0.0], [1.0, 1.0]]))

    def test_rejects_self_intersection(self):
        bowtie = np.array([[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0]])
        with pytest.raises(InvalidFloor):
            FloorPlan(bowtie)

    def test_normalizes_clockwise_input(self):
        cw = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
        floor = FloorPlan(cw)
        assert floor.area() > 0.0

    def test_area_and_perimeter(self):
        assert SQUARE10.area() == pytest.approx(100.0)
        assert SQUARE10.perimeter() == pytest.approx(40.0)
        assert L_SHAPE.area() == pytest.approx(12.0)
        assert L_SHAPE.perimeter() == pytest.approx(16.0)


class TestContainment:
    def test_hand_cases(self):
        assert SQUARE10.contains((0.0, 0.0))
        assert not SQUARE10.contains((5.1, 0.0))
        assert L_SHAPE.contains((1.0, 3.0))
        assert not L_SHAPE.contains((3.0, 3.0))   # notch corner is outside

    @given(st.floats(-8, 8), st.floats(-8, 8))
    @settings(max_examples=150, deadline=None)
    def test_matches_crossing_number_oracle(self, x, y):
        for floor in (SQUARE10, L_SHAPE):
            v = floor.vertices
            # stay away from edges where the two conventions may differ
            if np.min(np.abs(v[:, 0] - x)) < 1e-6 or np.min(np.abs(v[:, 1] - y)) < 1e-6:
                continue
            assert floor.contains((x, y)) == crossing_number_inside((x, y), v)

    def test_dilation_examples(self):
        """Spec-level behavior: a 0.1 m margin admits slightly outside points."""
        assert not SQUARE10.contains((5.05, 0.0))
        assert SQUARE10.contains((5.05, 0.0), dilation=0.1)
        assert not SQUARE10.contains((5.2, 0.0), dilation=0.1)
        assert point_in_floor((5.05, 0.0), SQUARE10, dilation=0.1)


class TestDilation:
    def test_square_grows_exactly(self):
        grown = SQUARE10.dilated(0.1)
        assert np.abs(grown.vertices).max() == pytest.approx(5.1)
        assert grown.area() == pytest.approx(10.2 ** 2)

    def test_square_shrinks_exactly(self):
        shrunk = SQUARE10.dilated(-0.5)
        assert np.abs(shrunk.vertices).max() == pytest.approx(4.5)
        assert shrunk.area() == pytest.approx(81.0)

    def test_l_shape_offsets_every_edge(self):
        """Each original edge line moves outward by exactly d."""
        d = 0.25
        grown = L_SHAPE.dilated(d)
        assert grown.n_vertices == L_SHAPE.n_vertices
        normals = L_SHAPE.edge_normals()
        v = L_SHAPE.vertices
        gv = grown.vertices
        n = L_SHAPE.n_vertices
        for i in range(n):
            # both endpoints of grown edge i lie on the shifted line of edge i
            p_on_line = v[i] + d * normals[i]
            for q in (gv[i], gv[(i + 1) % n]):
                assert abs(float(np.dot(q - p_on_line, normals[i]))) < 1e-9

    def test_zero_dilation_is_identity(self):
        assert SQUARE10.dilated(0.0) is SQUARE10


class TestBoundarySamples:
    def test_shape_and_uniform_spacing(self):
        pts = SQUARE10.boundary_samples(16)
        assert pts.shape == (16, 4)
        # consecutive arc-length spacing is perimeter / n = 2.5
        gaps = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
        # corner-straddling pairs are closer in euclidean terms; all others 2.5
        assert np.isclose(gaps, 2.5).sum() >= 12

    def test_points_lie_on_boundary_with_outward_normals(self):
        for floor in (SQUARE10, L_SHAPE):
            pts = floor.boundary_samples(64)
            for x, y, nx, ny in pts:
                assert np.hypot(nx, ny) == pytest.approx(1.0)
                assert not floor.contains((x + 1e-4 * nx, y + 1e-4 * ny))
                assert floor.contains((x - 1e-4 * nx, y - 1e-4 * ny))

    def test_requires_positive_count(self):
        with pytest.raises(InvalidInput):
            SQUARE10.boundary_samples(0)

    def test_sample_count_one(self):
        pts = SQUARE10.boundary_samples(1)
        assert pts.shape == (1, 4)


class TestDict:
    def test_round_trip(self):
        back = FloorPlan.from_dict(L_SHAPE.to_dict())
        assert np.allclose(back.vertices, L_SHAPE.vertices)

    def test_missing_key_raises(self):
        with pytest.raises(InvalidFloor):
            FloorPlan.from_dict({"shape": []})
