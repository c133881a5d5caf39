"""Raster mask <-> polygon conversion.

`vectorize_mask` traces one polygon per 4-connected component of each nonzero
label, walking along pixel edges, so a polygon is exactly the union of its
pixel squares (area = pixel count x pixel_size^2) and holes are preserved.
`rasterize_polygon` is the inverse: even-odd scanline fill sampled at pixel
centers, exact for pixel-aligned polygons.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .geometry import FieldPolygon, Provenance, ring_signed_area
from .raster import as_transform

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)  # 4-connectivity


def vectorize_mask(
    mask: np.ndarray,
    transform,
    min_area: float = 0.0,
    id_prefix: str = "p",
    provenance: Provenance | None = None,
) -> list[FieldPolygon]:
    """Trace world-space polygons out of a labeled grid.

    Label 0 is background; labels need not be contiguous. Components whose
    pixel area falls below `min_area` (square meters) are dropped. Vertices
    are mapped through the geotransform before polygons are built, so pixel
    space never leaves this function.
    """
    transform = as_transform(transform)
    mask = np.asarray(mask)
    polygons: list[FieldPolygon] = []
    if mask.size == 0 or not mask.any():
        return polygons
    # bounding slice per label once, so component labeling stays local
    label_slices = ndimage.find_objects(mask.astype(np.int64))
    for label, outer in enumerate(label_slices, start=1):
        if outer is None:
            continue
        binary = mask[outer] == label
        comps, n_comps = ndimage.label(binary, structure=_CROSS)
        slices = ndimage.find_objects(comps)
        for ci in range(1, n_comps + 1):
            sl = slices[ci - 1]
            comp = comps[sl] == ci
            count = int(comp.sum())
            if count * transform.pixel_size**2 < min_area:
                continue
            row0 = outer[0].start + sl[0].start
            col0 = outer[1].start + sl[1].start
            rings = _trace_component(comp)
            grouped = _group_rings(rings)
            for gi, (ext, holes) in enumerate(grouped):
                pid = f"{id_prefix}{int(label):05d}"
                if n_comps > 1:
                    pid += f"_{ci}"
                if len(grouped) > 1:
                    pid += f"x{gi + 1}"
                polygons.append(
                    _to_world_polygon(pid, ext, holes, col0, row0, transform, provenance)
                )
    return polygons


def _to_world_polygon(pid, ext, holes, col0, row0, transform, provenance):
    def to_world(ring):
        pts = np.asarray(ring, dtype=float)
        pts[:, 0] += col0
        pts[:, 1] += row0
        wx, wy = transform.pixel_to_world(pts[:, 0], pts[:, 1])
        return np.column_stack([wx, wy])

    return FieldPolygon(pid, to_world(ext), [to_world(h) for h in holes], provenance)


# directions in (x, y=row) pixel algebra
_E, _S, _W, _N = (1, 0), (0, 1), (-1, 0), (0, -1)


def _boundary_edges(comp: np.ndarray):
    """Directed boundary edges of a binary component, interior on the left."""
    pad = np.pad(comp, 1)
    edges = {}  # start vertex -> list of (direction, end vertex)

    def add(rows, cols, start_dx, start_dy, direction):
        for r, c in zip(rows.tolist(), cols.tolist()):
            start = (c + start_dx, r + start_dy)
            end = (start[0] + direction[0], start[1] + direction[1])
            edges.setdefault(start, []).append((direction, end))

    r, c = np.nonzero(comp & ~pad[:-2, 1:-1])  # open above -> top edge, eastbound
    add(r, c, 0, 0, _E)
    r, c = np.nonzero(comp & ~pad[1:-1, 2:])  # open right -> right edge, southbound
    add(r, c, 1, 0, _S)
    r, c = np.nonzero(comp & ~pad[2:, 1:-1])  # open below -> bottom edge, westbound
    add(r, c, 1, 1, _W)
    r, c = np.nonzero(comp & ~pad[1:-1, :-2])  # open left -> left edge, northbound
    add(r, c, 0, 1, _N)
    for lst in edges.values():
        lst.sort()
    return edges


def _trace_component(comp: np.ndarray) -> list[np.ndarray]:
    """Closed rings (collinear vertices removed) of one 4-connected component.

    At pinch vertices (two diagonal cells meeting at a corner) the walk takes
    the sharpest left turn, which keeps corner-touching lobes on separate
    rings as 4-connectivity demands.
    """
    edges = _boundary_edges(comp)
    used = set()
    rings = []
    for start in sorted(edges):
        for first in edges[start]:
            if (start, first) in used:
                continue
            steps = []  # (vertex, direction) per unit edge
            vertex, edge = start, first
            while (vertex, edge) not in used:
                used.add((vertex, edge))
                steps.append((vertex, edge[0]))
                direction, vertex = edge
                outs = edges[vertex]
                if len(outs) == 1:
                    edge = outs[0]
                else:
                    # intrinsic pairing: max (cross, dot) = sharpest left turn
                    edge = max(
                        outs,
                        key=lambda e: (
                            direction[0] * e[0][1] - direction[1] * e[0][0],
                            direction[0] * e[0][0] + direction[1] * e[0][1],
                        ),
                    )
            ring = [v for (v, d), (_, prev_d) in zip(steps, [steps[-1]] + steps[:-1]) if d != prev_d]
            rings.extend(_split_pinched(np.array(ring, dtype=float)))
    return rings


def _split_pinched(ring: np.ndarray) -> list[np.ndarray]:
    """Split rings that revisit a vertex (enclosed gap pinched at a corner)."""
    seen = {}
    for i, v in enumerate(map(tuple, ring)):
        if v in seen:
            j = seen[v]
            return _split_pinched(ring[j:i]) + _split_pinched(
                np.concatenate([ring[:j], ring[i:]])
            )
        seen[v] = i
    return [ring] if len(ring) >= 3 else []


def _group_rings(rings):
    """Pair exterior rings (positive pixel-space area) with their holes."""
    shells = [(ring_signed_area(r), r) for r in rings if ring_signed_area(r) > 0]
    holes = [r for r in rings if ring_signed_area(r) < 0]
    if len(shells) == 1:
        return [(shells[0][1], holes)]
    # rare multi-shell output from pinch splitting: assign each hole to the
    # smallest shell whose bbox contains it
    out = []
    shells.sort()
    grouped: list[list] = [[] for _ in shells]
    for hole in holes:
        hb = hole.min(axis=0), hole.max(axis=0)
        for k, (_, shell) in enumerate(shells):
            sb = shell.min(axis=0), shell.max(axis=0)
            if (sb[0] <= hb[0]).all() and (hb[1] <= sb[1]).all():
                grouped[k].append(hole)
                break
    for (_, shell), hs in zip(shells, grouped):
        out.append((shell, hs))
    return out


# ---------------------------------------------------------------------------
# polygon -> mask
# ---------------------------------------------------------------------------


def rasterize_polygon(
    poly: FieldPolygon, transform, shape: tuple[int, int]
) -> np.ndarray:
    """Boolean mask of pixels whose centers fall inside the polygon."""
    transform = as_transform(transform)
    h, w = shape
    out = np.zeros((h, w), dtype=bool)
    segs = []
    for ring in (poly.exterior, *poly.holes):
        px, py = transform.world_to_pixel(ring[:, 0], ring[:, 1])
        pts = np.column_stack([px, py])
        segs.append(np.stack([pts, np.roll(pts, -1, axis=0)], axis=1))
    segs = np.concatenate(segs)  # (n, 2, 2)
    y1, y2 = segs[:, 0, 1], segs[:, 1, 1]
    x1, x2 = segs[:, 0, 0], segs[:, 1, 0]
    keep = y1 != y2
    if not keep.any():
        return out
    x1, x2, y1, y2 = x1[keep], x2[keep], y1[keep], y2[keep]
    row_lo = max(0, int(np.floor(min(y1.min(), y2.min()) - 0.5)))
    row_hi = min(h - 1, int(np.ceil(max(y1.max(), y2.max()))))
    for row in range(row_lo, row_hi + 1):
        yc = row + 0.5
        crosses = ((y1 <= yc) & (yc < y2)) | ((y2 <= yc) & (yc < y1))
        if not crosses.any():
            continue
        xs = x1[crosses] + (yc - y1[crosses]) * (x2[crosses] - x1[crosses]) / (
            y2[crosses] - y1[crosses]
        )
        xs = np.sort(xs)
        for a, b in zip(xs[::2], xs[1::2]):
            c0 = max(0, int(np.ceil(a - 0.5)))
            c1 = min(w - 1, int(np.floor(b - 0.5 - 1e-12)))
            if c1 >= c0:
                out[row, c0 : c1 + 1] = True
    return out


def clip_mask_to_validity(mask: np.ndarray, validity: tuple[int, int, int, int]) -> np.ndarray:
    """Zero out mask pixels outside the tile's validity rectangle."""
    c0, r0, c1, r1 = validity
    out = np.zeros_like(mask)
    out[r0:r1, c0:c1] = mask[r0:r1, c0:c1]
    return out
