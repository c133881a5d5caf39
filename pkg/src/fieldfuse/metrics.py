"""Ground-truth matching and accuracy metrics.

Detection admits a prediction for a ground-truth field when their bounding
boxes overlap with IoU strictly above the threshold (0.5). Each ground-truth
field then takes the admitted candidate with the highest polygon IoU, with
conflicts resolved globally (greedy by descending polygon IoU) so that no
prediction serves two fields. Candidates whose polygons do not overlap at all
are never matched: a zero-intersection pair has no defined IoU/precision/
recall triple. Detection accuracy divides by the ground-truth count by
default; an aggregated prediction spanning several fields clears the bbox bar
for none of them and scores as a non-match.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import bbox_iou, intersection_area, SpatialIndex
from .layers import PredictionLayer


class MetricsError(ValueError):
    """Raised for undefined metrics (e.g. empty ground truth)."""


@dataclass(frozen=True)
class MatchResult:
    """One ground-truth/prediction pairing with its overlap scores."""

    gt_id: str
    pred_id: str
    bbox_iou: float
    polygon_iou: float
    precision: float  # intersection / prediction area
    recall: float  # intersection / ground-truth area
    f1: float

    def to_dict(self) -> dict:
        return {
            "gt_id": self.gt_id,
            "pred_id": self.pred_id,
            "bbox_iou": self.bbox_iou,
            "polygon_iou": self.polygon_iou,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def match_detections(
    pred: PredictionLayer, gt: PredictionLayer, threshold: float = 0.5
) -> list[MatchResult]:
    """Assign predictions to ground-truth fields (a partial injection)."""
    if not pred.polygons or not gt.polygons:
        return []
    preds = pred.by_id()
    gts = gt.by_id()
    index = SpatialIndex((p.id, p.bbox) for p in pred.polygons)
    pairs = []  # (-polygon_iou, gt_id, pred_id, bbox_iou, inter)
    for g in sorted(gt.polygons, key=lambda p: p.id):
        for pid in index.query(g.bbox):
            p = preds[pid]
            b_iou = bbox_iou(g.bbox, p.bbox)
            if b_iou <= threshold:
                continue
            inter = intersection_area(g, p)
            if inter <= 0:
                continue
            p_iou = inter / (g.area + p.area - inter)
            pairs.append((-p_iou, g.id, pid, b_iou, inter))
    pairs.sort()
    matched_gt: set[str] = set()
    matched_pred: set[str] = set()
    results = []
    for neg_iou, gt_id, pred_id, b_iou, inter in pairs:
        if gt_id in matched_gt or pred_id in matched_pred:
            continue
        matched_gt.add(gt_id)
        matched_pred.add(pred_id)
        g, p = gts[gt_id], preds[pred_id]
        precision = inter / p.area
        recall = inter / g.area
        results.append(
            MatchResult(
                gt_id,
                pred_id,
                b_iou,
                -neg_iou,
                precision,
                recall,
                2 * precision * recall / (precision + recall),
            )
        )
    results.sort(key=lambda m: m.gt_id)
    return results


def detection_accuracy(
    matches: list[MatchResult],
    gt: PredictionLayer,
    denominator: str = "gt",
    pred: PredictionLayer | None = None,
) -> float:
    """Percentage of correctly identified fields.

    The denominator is the ground-truth count by default; "pred" divides by
    the prediction count instead (both readings exist in the wild).
    """
    if denominator == "gt":
        n = len(gt.polygons)
    elif denominator == "pred":
        if pred is None:
            raise MetricsError("denominator='pred' needs the prediction layer")
        n = len(pred.polygons)
    else:
        raise MetricsError(f"unknown denominator {denominator!r}")
    if n == 0:
        raise MetricsError("detection accuracy undefined for an empty layer")
    return 100.0 * len(matches) / n


def delineation_accuracy(matches: list[MatchResult]) -> float | None:
    """Mean polygon IoU over matched pairs; None (not 0) when nothing matched."""
    if not matches:
        return None
    return float(np.mean([m.polygon_iou for m in matches]))


def mean_precision_recall_f1(matches: list[MatchResult]) -> tuple[float | None, float | None, float | None]:
    if not matches:
        return None, None, None
    return (
        float(np.mean([m.precision for m in matches])),
        float(np.mean([m.recall for m in matches])),
        float(np.mean([m.f1 for m in matches])),
    )


M2_PER_HA = 10_000.0


def area_histogram(
    layer: PredictionLayer, bin_edges_ha: list[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of polygon areas in hectares; returns (edges, counts)."""
    edges = np.asarray(bin_edges_ha, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or not np.all(np.diff(edges) > 0):
        raise MetricsError("bin edges must be a strictly increasing 1-D sequence")
    areas_ha = np.array([p.area / M2_PER_HA for p in layer.polygons])
    counts, _ = np.histogram(areas_ha, bins=edges)
    return edges, counts
