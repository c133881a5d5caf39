"""Reassembly of tile-level polygon layers into scene-level layers.

Tiling cuts fields that straddle tile borders into fragments. For every
border shared by two adjacent tiles, fragments touching the border from both
sides are compared by their 1-D contact intervals along the border line; when
the shared contact exceeds 85% of both fragments' contact, they are merged
into one polygon. Vertical borders are processed before horizontal ones and
the pass pair repeats until no merge fires, which reassembles fields split
across tile corners.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from shapely.geometry import MultiPolygon, Polygon as ShapelyPolygon, box
from shapely.ops import unary_union

from .geometry import FieldPolygon, Provenance
from .layers import ConfigKey, PredictionLayer
from .tiling import TileGrid

SNAP_TOL = 1e-6  # meters; boundary points closer than this lie "on" the border


class MergeError(ValueError):
    """Raised when tile layers do not conform to the stated grid."""


@dataclass(frozen=True)
class TileBorder:
    """World-space segment shared by two adjacent tiles."""

    orientation: str  # "vertical" | "horizontal"
    axis: float  # x of the line for vertical, y for horizontal
    lo: float  # segment extent along the border (y range or x range)
    hi: float
    first_index: tuple[int, int]  # left (vertical) or top (horizontal) tile
    second_index: tuple[int, int]

    def side_of(self, poly: FieldPolygon) -> str:
        """Which side of the border line the polygon lies on."""
        if self.orientation == "vertical":
            lo, hi = poly.bbox[0], poly.bbox[2]
        else:
            lo, hi = poly.bbox[1], poly.bbox[3]
        if hi <= self.axis + SNAP_TOL:
            return "low"
        if lo >= self.axis - SNAP_TOL:
            return "high"
        return "spanning"


def borders_for_grid(grid: TileGrid) -> list[TileBorder]:
    """All interior borders, vertical first, in deterministic order."""
    t = grid.transform
    borders = []
    for tx in range(grid.tiles_x - 1):
        x = t.origin_x + (tx + 1) * grid.size * t.pixel_size
        for ty in range(grid.tiles_y):
            _, y_top = t.pixel_to_world(0, ty * grid.size)
            _, y_bot = t.pixel_to_world(0, (ty + 1) * grid.size)
            borders.append(
                TileBorder("vertical", x, float(y_bot), float(y_top), (tx, ty), (tx + 1, ty))
            )
    for ty in range(grid.tiles_y - 1):
        _, y = t.pixel_to_world(0, (ty + 1) * grid.size)
        for tx in range(grid.tiles_x):
            x_lo = t.origin_x + tx * grid.size * t.pixel_size
            x_hi = t.origin_x + (tx + 1) * grid.size * t.pixel_size
            borders.append(
                TileBorder("horizontal", float(y), x_lo, x_hi, (tx, ty), (tx, ty + 1))
            )
    return borders


# ---------------------------------------------------------------------------
# 1-D interval sets along a border
# ---------------------------------------------------------------------------


def merge_intervals(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Canonical sorted union of 1-D intervals."""
    ivs = sorted((lo, hi) for lo, hi in intervals if hi > lo)
    out: list[tuple[float, float]] = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def intervals_length(intervals: list[tuple[float, float]]) -> float:
    return sum(hi - lo for lo, hi in intervals)


def intervals_intersection(
    a: list[tuple[float, float]], b: list[tuple[float, float]]
) -> list[tuple[float, float]]:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


def contact_segments(poly: FieldPolygon, border: TileBorder) -> list[tuple[float, float]]:
    """Union of intervals where the polygon boundary lies on the border line.

    A boundary edge counts when both endpoints are within the snap tolerance
    of the line; the interval is its projection onto the border axis, clipped
    to the border segment.
    """
    out = []
    vertical = border.orientation == "vertical"
    for ring in (poly.exterior, *poly.holes):
        p1 = ring
        p2 = np.roll(ring, -1, axis=0)
        if vertical:
            on_line = (np.abs(p1[:, 0] - border.axis) <= SNAP_TOL) & (
                np.abs(p2[:, 0] - border.axis) <= SNAP_TOL
            )
            a, b = p1[:, 1], p2[:, 1]
        else:
            on_line = (np.abs(p1[:, 1] - border.axis) <= SNAP_TOL) & (
                np.abs(p2[:, 1] - border.axis) <= SNAP_TOL
            )
            a, b = p1[:, 0], p2[:, 0]
        for lo, hi in zip(np.minimum(a, b)[on_line], np.maximum(a, b)[on_line]):
            lo = max(float(lo), border.lo)
            hi = min(float(hi), border.hi)
            if hi > lo:
                out.append((lo, hi))
    return merge_intervals(out)


# ---------------------------------------------------------------------------
# merging
# ---------------------------------------------------------------------------


def _shapely_to_field(geom: ShapelyPolygon, pid: str, provenance: Provenance) -> FieldPolygon:
    ext = _clean_ring(np.asarray(geom.exterior.coords[:-1]))
    holes = [_clean_ring(np.asarray(r.coords[:-1])) for r in geom.interiors]
    return FieldPolygon(pid, ext, holes, provenance)


def _clean_ring(ring: np.ndarray) -> np.ndarray:
    """Drop exactly-collinear vertices reintroduced by boolean unions."""
    if len(ring) < 4:
        return ring
    prev = np.roll(ring, 1, axis=0)
    nxt = np.roll(ring, -1, axis=0)
    v1 = ring - prev
    v2 = nxt - ring
    cross = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    keep = cross != 0.0
    return ring[keep] if keep.sum() >= 3 else ring


def clip_polygon_to_box(poly: FieldPolygon, rect, pid_prefix="") -> list[FieldPolygon]:
    """Intersect a polygon with a rectangle; may split it into several parts."""
    clipped = poly.shape.intersection(box(*rect))
    parts: list[FieldPolygon] = []
    geoms = clipped.geoms if isinstance(clipped, MultiPolygon) else [clipped]
    n = 0
    for geom in geoms:
        if isinstance(geom, ShapelyPolygon) and geom.area > 0:
            n += 1
            suffix = f"{pid_prefix}{n}" if (pid_prefix or len(geoms) > 1) else ""
            parts.append(_shapely_to_field(geom, poly.id + suffix, poly.provenance))
    return parts


def clip_layer_to_grid(layer: PredictionLayer, grid: TileGrid) -> dict[tuple[int, int], list[FieldPolygon]]:
    """Cut a scene-level layer along a tile grid (the inverse of merging)."""
    t = grid.transform
    per_tile: dict[tuple[int, int], list[FieldPolygon]] = {}
    for ty in range(grid.tiles_y):
        for tx in range(grid.tiles_x):
            c0, r0, c1, r1 = grid.validity(tx, ty)
            x0, y1 = t.pixel_to_world(tx * grid.size + c0, ty * grid.size + r0)
            x1, y0 = t.pixel_to_world(tx * grid.size + c1, ty * grid.size + r1)
            rect = (float(x0), float(y0), float(x1), float(y1))
            frags = []
            for poly in layer.polygons:
                if not (
                    poly.bbox[0] < rect[2]
                    and rect[0] < poly.bbox[2]
                    and poly.bbox[1] < rect[3]
                    and rect[1] < poly.bbox[3]
                ):
                    continue
                for part in clip_polygon_to_box(poly, rect, pid_prefix="_c"):
                    frags.append(
                        part.with_id(
                            f"{part.id}@{tx}_{ty}",
                            part.provenance.replace(tile_index=(tx, ty)),
                        )
                    )
            per_tile[(tx, ty)] = frags
    return per_tile


def merge_adjacent(
    tile_polygons: dict[tuple[int, int], list[FieldPolygon]],
    grid: TileGrid,
    threshold: float = 0.85,
    key: ConfigKey | None = None,
) -> PredictionLayer:
    """Merge fragments across tile borders into a scene-level layer.

    For each border and each candidate pair (one polygon per side), let I be
    the length of the intersection of their contact interval sets; the pair
    merges when I exceeds `threshold` of both polygons' contact lengths.
    Within a pass, merges apply greedily in descending shared-contact order.
    """
    for index in tile_polygons:
        tx, ty = index
        if not (0 <= tx < grid.tiles_x and 0 <= ty < grid.tiles_y):
            raise MergeError(f"tile index {index} outside grid {grid.tiles_x}x{grid.tiles_y}")

    polygons: dict[str, FieldPolygon] = {}
    for index in sorted(tile_polygons):
        rect = _validity_rect(grid, index)
        for poly in tile_polygons[index]:
            for part in _clip_to_validity(poly, rect):
                if part.id in polygons:
                    raise MergeError(f"duplicate polygon id across tiles: {part.id}")
                polygons[part.id] = part

    borders = borders_for_grid(grid)
    merge_seq = 0
    changed = True
    while changed:
        changed = False
        for orientation in ("vertical", "horizontal"):
            for border in borders:
                if border.orientation != orientation:
                    continue
                merge_seq, fired = _merge_on_border(
                    polygons, border, threshold, merge_seq
                )
                changed = changed or fired

    out = sorted(polygons.values(), key=lambda p: p.id)
    return PredictionLayer(out, level=1, key=key or ConfigKey())


def _validity_rect(grid: TileGrid, index: tuple[int, int]):
    tx, ty = index
    c0, r0, c1, r1 = grid.validity(tx, ty)
    t = grid.transform
    x0, y1 = t.pixel_to_world(tx * grid.size + c0, ty * grid.size + r0)
    x1, y0 = t.pixel_to_world(tx * grid.size + c1, ty * grid.size + r1)
    return (float(x0), float(y0), float(x1), float(y1))


def _clip_to_validity(poly: FieldPolygon, rect) -> list[FieldPolygon]:
    """Clip pad-region geometry back to the pixels backed by the parent image."""
    x0, y0, x1, y1 = rect
    b = poly.bbox
    if b[0] >= x0 - SNAP_TOL and b[1] >= y0 - SNAP_TOL and b[2] <= x1 + SNAP_TOL and b[3] <= y1 + SNAP_TOL:
        return [poly]
    return clip_polygon_to_box(poly, rect, pid_prefix="_v")


def _merge_on_border(polygons, border, threshold, merge_seq):
    lo_side: list[tuple[str, list]] = []
    hi_side: list[tuple[str, list]] = []
    if border.orientation == "vertical":
        near = lambda p: abs(p.bbox[0] - border.axis) <= SNAP_TOL or abs(
            p.bbox[2] - border.axis
        ) <= SNAP_TOL
    else:
        near = lambda p: abs(p.bbox[1] - border.axis) <= SNAP_TOL or abs(
            p.bbox[3] - border.axis
        ) <= SNAP_TOL
    for pid in sorted(polygons):
        poly = polygons[pid]
        if not near(poly):
            continue
        contact = contact_segments(poly, border)
        if not contact:
            continue
        side = border.side_of(poly)
        if side == "low":
            lo_side.append((pid, contact))
        elif side == "high":
            hi_side.append((pid, contact))

    candidates = []
    for pid_a, contact_a in lo_side:
        len_a = intervals_length(contact_a)
        for pid_b, contact_b in hi_side:
            shared = intervals_length(intervals_intersection(contact_a, contact_b))
            if shared <= 0:
                continue
            len_b = intervals_length(contact_b)
            if shared > threshold * len_a and shared > threshold * len_b:
                candidates.append((-shared, pid_a, pid_b))

    fired = False
    taken: set[str] = set()
    for _, pid_a, pid_b in sorted(candidates):
        if pid_a in taken or pid_b in taken:
            continue
        taken.add(pid_a)
        taken.add(pid_b)
        a, b = polygons.pop(pid_a), polygons.pop(pid_b)
        merged = unary_union([a.shape, b.shape])
        if isinstance(merged, MultiPolygon):
            merged = max(merged.geoms, key=lambda g: g.area)
        merge_seq += 1
        prov = a.provenance.replace(tile_index="merged")
        polygons[f"m{merge_seq:05d}_{pid_a}"] = _shapely_to_field(
            merged, f"m{merge_seq:05d}_{pid_a}", prov
        )
        fired = True
    return merge_seq, fired
