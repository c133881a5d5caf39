"""Planar polygon kernel: areas, bounding boxes, IoU, and spatial indexing.

Vertices live in world coordinates (meters, planar CRS). Exterior rings are
counter-clockwise, holes clockwise; orientation is normalized at construction.
Exact intersection/union areas come from polygon clipping (GEOS via shapely);
a rasterized estimate is used only when the clipper fails on degenerate input.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from shapely.errors import GEOSException
from shapely.geometry import Polygon as ShapelyPolygon

logger = logging.getLogger(__name__)

# (min_x, min_y, max_x, max_y)
Box = tuple[float, float, float, float]


class GeometryError(ValueError):
    """Raised for degenerate or invalid polygon input."""


@dataclass(frozen=True)
class Provenance:
    """Where a polygon came from in the prediction grid.

    A value of None means "not applicable / combined over"; the string
    "merged" marks geometry assembled from more than one source.
    """

    checkpoint: str | None = None
    tile_size: int | str | None = None
    date_id: str | None = None
    variant: str | None = None
    tile_index: tuple[int, int] | str | None = None

    def replace(self, **kwargs) -> "Provenance":
        fields = {
            "checkpoint": self.checkpoint,
            "tile_size": self.tile_size,
            "date_id": self.date_id,
            "variant": self.variant,
            "tile_index": self.tile_index,
        }
        fields.update(kwargs)
        return Provenance(**fields)


def ring_signed_area(ring: np.ndarray) -> float:
    """Shoelace signed area of an open ring (last vertex not repeated).

    Positive for counter-clockwise rings.
    """
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(
        np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]) + x[-1] * y[0] - x[0] * y[-1]
    )


def _as_ring(points) -> np.ndarray:
    ring = np.asarray(points, dtype=float)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise GeometryError(f"ring must be an (n, 2) array, got shape {ring.shape}")
    # drop an explicit closing vertex
    if len(ring) > 1 and ring[0, 0] == ring[-1, 0] and ring[0, 1] == ring[-1, 1]:
        ring = ring[:-1]
    # fewer than 3 distinct vertices implies zero area, caught at polygon level
    if len(ring) < 3:
        raise GeometryError("ring needs at least 3 distinct vertices")
    return ring


class FieldPolygon:
    """Simple polygon with provenance and cached area/bbox.

    The exterior is stored CCW and holes CW regardless of input orientation.
    Area is shoelace area of the exterior minus the hole areas and must be
    positive.
    """

    __slots__ = ("id", "exterior", "holes", "provenance", "area", "bbox", "_shape")

    def __init__(self, pid: str, exterior, holes=(), provenance: Provenance | None = None):
        ext = _as_ring(exterior)
        if ring_signed_area(ext) < 0:
            ext = ext[::-1].copy()
        hole_rings = []
        hole_area = 0.0
        for hole in holes:
            ring = _as_ring(hole)
            if ring_signed_area(ring) > 0:
                ring = ring[::-1].copy()
            hole_area += abs(ring_signed_area(ring))
            hole_rings.append(ring)
        area = ring_signed_area(ext) - hole_area
        if area <= 0:
            raise GeometryError(f"polygon {pid!r} has non-positive area {area}")
        self.id = pid
        self.exterior = ext
        self.holes = tuple(hole_rings)
        self.provenance = provenance or Provenance()
        self.area = area
        self.bbox: Box = (
            float(ext[:, 0].min()),
            float(ext[:, 1].min()),
            float(ext[:, 0].max()),
            float(ext[:, 1].max()),
        )
        self._shape = None

    @property
    def shape(self) -> ShapelyPolygon:
        """Shapely geometry, built lazily and cached."""
        if self._shape is None:
            self._shape = ShapelyPolygon(self.exterior, [h for h in self.holes])
        return self._shape

    def with_id(self, pid: str, provenance: Provenance | None = None) -> "FieldPolygon":
        clone = FieldPolygon.__new__(FieldPolygon)
        clone.id = pid
        clone.exterior = self.exterior
        clone.holes = self.holes
        clone.provenance = provenance if provenance is not None else self.provenance
        clone.area = self.area
        clone.bbox = self.bbox
        clone._shape = self._shape
        return clone

    def __repr__(self):
        return f"FieldPolygon({self.id!r}, area={self.area:.3f}, n={len(self.exterior)})"


def polygon_area(p: FieldPolygon) -> float:
    """Shoelace area with holes subtracted, in square meters."""
    return p.area


def bbox_iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two axis-aligned rectangles (0 when disjoint)."""
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return inter / union


def boxes_intersect(a: Box, b: Box) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def identical_geometry(a: FieldPolygon, b: FieldPolygon) -> bool:
    """Vertex-for-vertex equality (pooled layers carry exact copies)."""
    if a.exterior is b.exterior and a.holes is b.holes:
        return True
    if len(a.exterior) != len(b.exterior) or len(a.holes) != len(b.holes):
        return False
    if not np.array_equal(a.exterior, b.exterior):
        return False
    return all(np.array_equal(x, y) for x, y in zip(a.holes, b.holes))


def intersection_area(a: FieldPolygon, b: FieldPolygon) -> float:
    """Exact intersection area via polygon clipping.

    Falls back to a rasterized estimate (flagged in the log) if the clipper
    rejects numerically degenerate input.
    """
    if not boxes_intersect(a.bbox, b.bbox):
        return 0.0
    if a.bbox == b.bbox and identical_geometry(a, b):
        return a.area
    try:
        return float(a.shape.intersection(b.shape).area)
    except GEOSException:
        logger.warning(
            "degenerate clip for %s x %s; using rasterized estimate", a.id, b.id
        )
        return _rasterized_intersection(a, b)


def polygon_iou(a: FieldPolygon, b: FieldPolygon) -> float:
    """Intersection area over union area of two polygons.

    The union area is intersection-exclusion (area_a + area_b - intersection),
    which is the exact boolean union area and keeps the per-pair
    IoU/precision/recall identity tight to float rounding.
    """
    inter = intersection_area(a, b)
    if inter <= 0.0:
        return 0.0
    union = a.area + b.area - inter
    return inter / union


def _point_in_rings(xs: np.ndarray, ys: np.ndarray, poly: FieldPolygon) -> np.ndarray:
    """Even-odd containment test for a batch of points (holes included)."""
    inside = np.zeros(xs.shape, dtype=bool)
    for ring in (poly.exterior, *poly.holes):
        x1 = ring[:, 0]
        y1 = ring[:, 1]
        x2 = np.roll(x1, -1)
        y2 = np.roll(y1, -1)
        for ex1, ey1, ex2, ey2 in zip(x1, y1, x2, y2):
            if ey1 == ey2:
                continue
            lo, hi = (ey1, ey2) if ey1 < ey2 else (ey2, ey1)
            crosses = (ys >= lo) & (ys < hi)
            if not crosses.any():
                continue
            x_at = ex1 + (ys - ey1) * (ex2 - ex1) / (ey2 - ey1)
            inside ^= crosses & (x_at > xs)
    return inside


def _rasterized_intersection(a: FieldPolygon, b: FieldPolygon, cell: float = 0.01) -> float:
    """Count cell centers falling inside both polygons (flagged fallback path)."""
    min_x = max(a.bbox[0], b.bbox[0])
    min_y = max(a.bbox[1], b.bbox[1])
    max_x = min(a.bbox[2], b.bbox[2])
    max_y = min(a.bbox[3], b.bbox[3])
    if max_x <= min_x or max_y <= min_y:
        return 0.0
    # keep the sample grid bounded for very large degenerate inputs
    n_limit = 4_000_000
    nx = int(np.ceil((max_x - min_x) / cell))
    ny = int(np.ceil((max_y - min_y) / cell))
    while nx * ny > n_limit:
        cell *= 2.0
        nx = int(np.ceil((max_x - min_x) / cell))
        ny = int(np.ceil((max_y - min_y) / cell))
    xs = min_x + (np.arange(nx) + 0.5) * cell
    ys = min_y + (np.arange(ny) + 0.5) * cell
    gx, gy = np.meshgrid(xs, ys)
    both = _point_in_rings(gx, gy, a) & _point_in_rings(gx, gy, b)
    return float(both.sum()) * cell * cell


class SpatialIndex:
    """Static bounding-box tree over polygon ids (sort-tile-recursive packing).

    query(rect) returns exactly the ids whose bbox intersects the rect; exact
    geometric tests are the caller's job.
    """

    _LEAF_SIZE = 16

    def __init__(self, items):
        """items: iterable of (id, bbox) pairs."""
        entries = [(box, pid, order) for order, (pid, box) in enumerate(items)]
        self._root = self._build(entries) if entries else None

    @classmethod
    def for_layer(cls, layer) -> "SpatialIndex":
        return cls((p.id, p.bbox) for p in layer.polygons)

    @classmethod
    def _leaf(cls, entries):
        boxes = np.array([e[0] for e in entries], dtype=float)
        items = [(e[2], e[1]) for e in entries]
        return (_merge_boxes(boxes), None, (boxes, items))

    @classmethod
    def _build(cls, entries):
        if len(entries) <= cls._LEAF_SIZE:
            return cls._leaf(entries)
        # STR packing: slice on center-x, then pack each slice on center-y
        entries = sorted(entries, key=lambda e: (e[0][0] + e[0][2], e[2]))
        n_nodes = int(np.ceil(len(entries) / cls._LEAF_SIZE))
        n_slices = int(np.ceil(np.sqrt(n_nodes)))
        per_slice = int(np.ceil(len(entries) / n_slices))
        children = []
        for i in range(0, len(entries), per_slice):
            chunk = sorted(
                entries[i : i + per_slice], key=lambda e: (e[0][1] + e[0][3], e[2])
            )
            for j in range(0, len(chunk), cls._LEAF_SIZE):
                children.append(cls._leaf(chunk[j : j + cls._LEAF_SIZE]))
        while len(children) > cls._LEAF_SIZE:
            grouped = []
            for i in range(0, len(children), cls._LEAF_SIZE):
                group = children[i : i + cls._LEAF_SIZE]
                grouped.append((_merge_boxes([g[0] for g in group]), group, None))
            children = grouped
        return (_merge_boxes([c[0] for c in children]), children, None)

    def query(self, rect: Box) -> list:
        """Ids whose bbox intersects rect, in insertion order."""
        if self._root is None:
            return []
        hits = []
        stack = [self._root]
        while stack:
            box, children, leaf = stack.pop()
            if not boxes_intersect(box, rect):
                continue
            if leaf is not None:
                boxes, items = leaf
                ok = (
                    (boxes[:, 0] <= rect[2])
                    & (rect[0] <= boxes[:, 2])
                    & (boxes[:, 1] <= rect[3])
                    & (rect[1] <= boxes[:, 3])
                )
                hits.extend(items[k] for k in np.nonzero(ok)[0])
            else:
                stack.extend(children)
        hits.sort()
        return [pid for _, pid in hits]


def _merge_boxes(boxes) -> Box:
    arr = np.asarray(boxes, dtype=float)
    return (
        float(arr[:, 0].min()),
        float(arr[:, 1].min()),
        float(arr[:, 2].max()),
        float(arr[:, 3].max()),
    )


def build_index(layer) -> SpatialIndex:
    """Bounding-box index over a prediction layer's polygons."""
    return SpatialIndex.for_layer(layer)
