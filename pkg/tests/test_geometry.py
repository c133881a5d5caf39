import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fieldfuse.geometry import (
    FieldPolygon,
    GeometryError,
    SpatialIndex,
    bbox_iou,
    boxes_intersect,
    intersection_area,
    polygon_area,
    polygon_iou,
)
from fieldfuse.layers import PredictionLayer

from conftest import grid_sample_intersection, random_convex_polygon


class TestPolygonArea:
    def test_unit_square(self, unit_square):
        assert polygon_area(unit_square) == 1.0

    def test_triangle(self):
        tri = FieldPolygon("t", [(0, 0), (1, 0), (0, 1)])
        assert polygon_area(tri) == 0.5

    def test_square_with_centered_hole(self):
        p = FieldPolygon(
            "h",
            [(0, 0), (1, 0), (1, 1), (0, 1)],
            holes=[[(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75)]],
        )
        assert polygon_area(p) == 0.75

    def test_orientation_normalized(self):
        from fieldfuse.geometry import ring_signed_area

        cw = FieldPolygon("cw", [(0, 0), (0, 1), (1, 1), (1, 0)])
        assert cw.area == 1.0
        assert ring_signed_area(cw.exterior) > 0  # stored counter-clockwise

    def test_degenerate_ring_rejected(self):
        with pytest.raises(GeometryError):
            FieldPolygon("bad", [(0, 0), (1, 1)])
        with pytest.raises(GeometryError):
            FieldPolygon("flat", [(0, 0), (1, 0), (2, 0)])


class TestBboxIou:
    def test_identical(self):
        assert bbox_iou((0, 0, 2, 3), (0, 0, 2, 3)) == 1.0

    def test_disjoint(self):
        assert bbox_iou((0, 0, 1, 1), (2, 2, 3, 3)) == 0.0

    def test_offset_unit_squares(self):
        assert bbox_iou((0, 0, 1, 1), (0.5, 0, 1.5, 1)) == pytest.approx(1 / 3)


class TestPolygonIou:
    def test_identical(self, unit_square):
        assert polygon_iou(unit_square, unit_square) == 1.0

    def test_offset_squares_one_seventh(self, unit_square):
        other = FieldPolygon("o", [(0.5, 0.5), (1.5, 0.5), (1.5, 1.5), (0.5, 1.5)])
        assert polygon_iou(unit_square, other) == pytest.approx(1 / 7, abs=1e-12)

    def test_disjoint(self, unit_square):
        far = FieldPolygon("f", [(5, 5), (6, 5), (6, 6), (5, 6)])
        assert polygon_iou(unit_square, far) == 0.0

    def test_exact_matches_rasterized_oracle(self):
        # 200 random convex pairs against a cell-center counting oracle
        rng = np.random.default_rng(1234)
        checked = 0
        for _ in range(200):
            a = random_convex_polygon(rng, rng.uniform(0, 2, 2), rng.uniform(0.5, 1.5))
            b = random_convex_polygon(rng, rng.uniform(0, 2, 2), rng.uniform(0.5, 1.5))
            exact = polygon_iou(a, b)
            inter = grid_sample_intersection(a, b, cell=0.005)
            union = a.area + b.area - inter
            assert abs(exact - inter / union) < 5e-3
            checked += 1
        assert checked == 200

    @given(
        dx=st.floats(-1.5, 1.5),
        dy=st.floats(-1.5, 1.5),
        scale=st.floats(0.3, 2.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_symmetry_and_bounds(self, dx, dy, scale):
        a = FieldPolygon("a", [(0, 0), (1, 0), (1, 1), (0, 1)])
        b = FieldPolygon(
            "b", [(dx, dy), (dx + scale, dy), (dx + scale, dy + scale), (dx, dy + scale)]
        )
        iou_ab = polygon_iou(a, b)
        iou_ba = polygon_iou(b, a)
        assert iou_ab == pytest.approx(iou_ba, abs=1e-12)
        assert 0.0 <= iou_ab <= 1.0

    def test_intersection_implies_bbox_intersection(self):
        rng = np.random.default_rng(77)
        for _ in range(100):
            a = random_convex_polygon(rng, rng.uniform(0, 3, 2), rng.uniform(0.3, 1.0))
            b = random_convex_polygon(rng, rng.uniform(0, 3, 2), rng.uniform(0.3, 1.0))
            if intersection_area(a, b) > 0:
                assert boxes_intersect(a.bbox, b.bbox)

    def test_bbox_contains_every_vertex(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = random_convex_polygon(rng, rng.uniform(-5, 5, 2), rng.uniform(0.2, 3.0))
            x0, y0, x1, y1 = p.bbox
            assert np.all(p.exterior[:, 0] >= x0) and np.all(p.exterior[:, 0] <= x1)
            assert np.all(p.exterior[:, 1] >= y0) and np.all(p.exterior[:, 1] <= y1)


class TestSpatialIndex:
    def test_empty(self):
        idx = SpatialIndex([])
        assert idx.query((0, 0, 10, 10)) == []

    def test_single_disjoint_query(self, unit_square):
        idx = SpatialIndex([(unit_square.id, unit_square.bbox)])
        assert idx.query((5, 5, 6, 6)) == []
        assert idx.query((0.5, 0.5, 2, 2)) == [unit_square.id]

    def test_matches_brute_force_on_1000_random_squares(self):
        rng = np.random.default_rng(42)
        boxes = []
        for i in range(1000):
            x, y = rng.uniform(0, 100, 2)
            w, h = rng.uniform(0.1, 5, 2)
            boxes.append((f"b{i:04d}", (x, y, x + w, y + h)))
        idx = SpatialIndex(boxes)
        for _ in range(100):
            qx, qy = rng.uniform(0, 100, 2)
            qw, qh = rng.uniform(0.5, 10, 2)
            rect = (qx, qy, qx + qw, qy + qh)
            expected = {pid for pid, b in boxes if boxes_intersect(b, rect)}
            assert set(idx.query(rect)) == expected

    def test_layer_index(self, unit_square):
        layer = PredictionLayer([unit_square])
        from fieldfuse.geometry import build_index

        idx = build_index(layer)
        assert idx.query((0.9, 0.9, 2, 2)) == ["sq"]
