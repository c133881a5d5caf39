import numpy as np
import pytest

from fieldfuse.fusion import combine_layers, dedup, fuse_all_levels, group_and_combine
from fieldfuse.geometry import FieldPolygon
from fieldfuse.layers import ConfigKey, FINAL_LEVEL, PredictionLayer
from fieldfuse.metrics import detection_accuracy, match_detections


def square(pid, x0, y0, size=10.0):
    return FieldPolygon(pid, [(x0, y0), (x0 + size, y0), (x0 + size, y0 + size), (x0, y0 + size)])


def layer(polys, checkpoint="vit_b", size=512, date="T1", variant="original"):
    return PredictionLayer(list(polys), level=1, key=ConfigKey(checkpoint, size, date, variant))


class TestCombineLayers:
    def test_single_input_identity_up_to_ids(self):
        src = layer([square("a", 0, 0), square("b", 20, 0)])
        out = combine_layers([src], ConfigKey(None, 512, "T1", "original"))
        assert len(out) == 2
        assert out.level == 2
        assert {tuple(p.bbox) for p in out.polygons} == {tuple(p.bbox) for p in src.polygons}

    def test_pooling_doubles_count_but_not_detection(self):
        gt = PredictionLayer([square("g1", 0, 0), square("g2", 20, 0)])
        pred = layer([square("a", 0, 0), square("b", 20, 0)])
        combined = combine_layers([pred, pred], ConfigKey(None, 512, "T1", "original"))
        assert len(combined) == 4
        base = detection_accuracy(match_detections(pred, gt), gt)
        pooled = detection_accuracy(match_detections(combined, gt), gt)
        assert base == pooled == 100.0

    def test_three_disjoint_fields_across_layers(self):
        gt = PredictionLayer([square(f"g{i}", 30 * i, 0) for i in range(3)])
        layers = [
            layer([square("a", 0, 0)], checkpoint="vit_b"),
            layer([square("b", 30, 0)], checkpoint="vit_h"),
            layer([square("c", 60, 0)], checkpoint="vit_l"),
        ]
        combined = combine_layers(layers, ConfigKey(None, 512, "T1", "original"))
        assert detection_accuracy(match_detections(combined, gt), gt) == 100.0

    def test_metric_invariant_to_order_and_grouping(self):
        rng = np.random.default_rng(5)
        gt = PredictionLayer([square(f"g{i}", 30 * i, 0) for i in range(6)])
        la = layer([square(f"a{i}", 30 * i, rng.uniform(0, 2)) for i in range(3)])
        lb = layer([square(f"b{i}", 30 * (i + 2), rng.uniform(0, 2)) for i in range(3)])
        lc = layer([square(f"c{i}", 30 * (i + 4), rng.uniform(0, 2)) for i in range(2)])
        key = ConfigKey(None, 512, "T1", "original")

        def detection(*groups):
            out = combine_layers([combine_layers(list(g), key) for g in groups], key)
            return detection_accuracy(match_detections(out, gt), gt)

        assert detection([la, lb], [lc]) == detection([lc], [lb, la]) == detection([la], [lb], [lc])

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            combine_layers([], ConfigKey())

    def test_provenance_preserved(self):
        from fieldfuse.geometry import Provenance

        poly = square("a", 0, 0).with_id("a", Provenance("vit_h", 768, "T3", "original"))
        out = combine_layers([layer([poly])], ConfigKey(None, 512, "T1", "original"))
        assert out.polygons[0].provenance.checkpoint == "vit_h"
        assert out.polygons[0].provenance.tile_size == 768


class TestFuseLadder:
    def test_group_and_combine_over_checkpoints(self):
        layers = [
            layer([square("a", 0, 0)], checkpoint=c, size=s)
            for c in ("vit_b", "vit_h", "vit_l")
            for s in (512, 768)
        ]
        level2 = group_and_combine(layers, "checkpoint")
        assert len(level2) == 2
        assert all(l.level == 2 and l.key.checkpoint is None for l in level2)

    def test_full_ladder_counts(self):
        layers = [
            layer([square("a", 0, 0)], checkpoint=c, size=s, date=d, variant=v)
            for c in ("vit_b", "vit_h", "vit_l")
            for s in (256, 512, 768, 1024)
            for d in ("T1", "T2", "T3", "T4")
            for v in ("original", "edge_enhanced")
        ]
        fused = fuse_all_levels(layers)
        assert len(fused[1]) == 96
        assert len(fused[2]) == 32
        assert len(fused[3]) == 8
        assert len(fused[4]) == 2
        assert len(fused[FINAL_LEVEL]) == 1


class TestDedup:
    def test_disjoint_layer_unchanged(self):
        src = PredictionLayer([square(f"p{i}", 30 * i, 0) for i in range(5)])
        assert len(dedup(src)) == 5

    def test_identical_pair_collapses(self):
        src = PredictionLayer([square("a", 0, 0), square("b", 0, 0)])
        out = dedup(src)
        assert len(out) == 1

    def test_overlap_chain_keeps_ends_by_representative_linkage(self):
        # A~B and B~C above threshold, A~C below: with area-descending greedy
        # representative linkage, B joins A's cluster and C starts its own.
        a = FieldPolygon("a", [(0, 0), (10, 0), (10, 10), (0, 10)])
        b = FieldPolygon("b", [(0.8, 0), (10, 0), (10, 9.99), (0.8, 9.99)])
        c = FieldPolygon("c", [(2.1, 0), (10, 0), (10, 9.98), (2.1, 9.98)])
        from fieldfuse.geometry import polygon_iou

        assert polygon_iou(a, b) >= 0.8 and polygon_iou(b, c) >= 0.8
        assert polygon_iou(a, c) < 0.8
        out = dedup(PredictionLayer([a, b, c]), iou_threshold=0.8)
        assert {p.id for p in out.polygons} == {"a", "c"}

    def test_idempotent_and_never_grows(self):
        rng = np.random.default_rng(8)
        polys = [
            square(f"p{i}", float(rng.integers(0, 40)), float(rng.integers(0, 40)), 10.0)
            for i in range(30)
        ]
        src = PredictionLayer(polys)
        once = dedup(src)
        twice = dedup(once)
        assert len(once) <= len(src)
        assert len(twice) == len(once)
        assert {p.id for p in twice.polygons} == {p.id for p in once.polygons}
