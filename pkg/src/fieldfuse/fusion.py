"""Combining prediction layers across checkpoints, sizes, dates and variants.

Combination is pooling: every input polygon is retained with its provenance
and a fresh id, and the level tag advances according to which dimensions the
output key still resolves. Redundancy between pooled layers is handled by the
matcher (each ground-truth field takes its best candidate), not by geometric
union here. `dedup` exists as export hygiene for final maps.
"""

from __future__ import annotations

from .geometry import FieldPolygon, polygon_iou, SpatialIndex
from .layers import ConfigKey, PredictionLayer


def combine_layers(
    inputs: list[PredictionLayer],
    out_key: ConfigKey,
    level: int | str | None = None,
) -> PredictionLayer:
    """Pool the polygons of several layers into one layer.

    Provenance is preserved; ids are reassigned to stay unique. The level tag
    is inferred from `out_key` unless given explicitly.
    """
    if not inputs:
        raise ValueError("combine_layers needs at least one input layer")
    polygons: list[FieldPolygon] = []
    seq = 0
    for layer in inputs:
        for poly in sorted(layer.polygons, key=lambda p: p.id):
            seq += 1
            polygons.append(poly.with_id(f"c{seq:06d}"))
    return PredictionLayer(
        polygons, level=out_key.level() if level is None else level, key=out_key
    )


def dedup(layer: PredictionLayer, iou_threshold: float = 0.8) -> PredictionLayer:
    """Greedy near-duplicate removal, keeping one representative per cluster.

    Polygons are visited by descending area; each joins the first existing
    cluster whose representative it overlaps at `iou_threshold` or better,
    otherwise it founds a new cluster. Only representatives survive.
    """
    ordered = sorted(layer.polygons, key=lambda p: (-p.area, p.id))
    reps: list[FieldPolygon] = []
    index_entries: list[tuple[int, tuple]] = []
    index: SpatialIndex | None = None
    for poly in ordered:
        joined = False
        if reps:
            if index is None or len(index_entries) != len(reps):
                index_entries = [(i, r.bbox) for i, r in enumerate(reps)]
                index = SpatialIndex(index_entries)
            for rep_i in index.query(poly.bbox):
                if polygon_iou(poly, reps[rep_i]) >= iou_threshold:
                    joined = True
                    break
        if not joined:
            reps.append(poly)
            index = None
    reps.sort(key=lambda p: p.id)
    return PredictionLayer(reps, level=layer.level, key=layer.key)


def group_and_combine(
    layers: list[PredictionLayer], combine_over: str
) -> list[PredictionLayer]:
    """Combine layers that differ only in `combine_over`, one output per group."""
    groups: dict[ConfigKey, list[PredictionLayer]] = {}
    for layer in layers:
        out_key = ConfigKey(**{**layer.key.to_dict(), combine_over: None})
        groups.setdefault(out_key, []).append(layer)
    out = []
    for out_key in sorted(groups, key=lambda k: k.label()):
        out.append(combine_layers(groups[out_key], out_key))
    return out


def fuse_all_levels(level1_layers: list[PredictionLayer]) -> dict[int | str, list[PredictionLayer]]:
    """Run the full fusion ladder: checkpoints -> sizes -> dates -> variants."""
    result: dict[int | str, list[PredictionLayer]] = {1: list(level1_layers)}
    result[2] = group_and_combine(result[1], "checkpoint")
    result[3] = group_and_combine(result[2], "tile_size")
    result[4] = group_and_combine(result[3], "date_id")
    from .layers import FINAL_LEVEL

    result[FINAL_LEVEL] = group_and_combine(result[4], "variant")
    return result
