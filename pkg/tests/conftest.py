import numpy as np
import pytest

from fieldfuse.geometry import FieldPolygon


@pytest.fixture
def unit_square():
    return FieldPolygon("sq", [(0, 0), (1, 0), (1, 1), (0, 1)])


def random_convex_polygon(rng, center, radius, n_min=4, n_max=10) -> FieldPolygon:
    """Convex polygon via sorted angles on a circle of jittered radius."""
    n = int(rng.integers(n_min, n_max + 1))
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    radii = rng.uniform(0.4 * radius, radius, n)
    pts = np.column_stack(
        [center[0] + radii * np.cos(angles), center[1] + radii * np.sin(angles)]
    )
    hull_pts = _convex_hull(pts)
    return FieldPolygon(f"c{rng.integers(1e9)}", hull_pts)


def _convex_hull(pts):
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def cross2(u, v):
        return u[0] * v[1] - u[1] * v[0]

    def half(points):
        out = []
        for p in points:
            while len(out) >= 2 and cross2(out[-1] - out[-2], p - out[-2]) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def grid_sample_intersection(a: FieldPolygon, b: FieldPolygon, cell: float) -> float:
    """Independent rasterization oracle: count cell centers inside both polygons.

    Pure even-odd crossing test; shares nothing with the production clipper.
    """
    min_x = max(a.bbox[0], b.bbox[0])
    min_y = max(a.bbox[1], b.bbox[1])
    max_x = min(a.bbox[2], b.bbox[2])
    max_y = min(a.bbox[3], b.bbox[3])
    if max_x <= min_x or max_y <= min_y:
        return 0.0
    xs = np.arange(min_x + cell / 2, max_x, cell)
    ys = np.arange(min_y + cell / 2, max_y, cell)
    gx, gy = np.meshgrid(xs, ys)
    inside = point_in_polygon(gx, gy, a) & point_in_polygon(gx, gy, b)
    return float(inside.sum()) * cell * cell


def grid_sample_area(p: FieldPolygon, cell: float) -> float:
    xs = np.arange(p.bbox[0] + cell / 2, p.bbox[2], cell)
    ys = np.arange(p.bbox[1] + cell / 2, p.bbox[3], cell)
    gx, gy = np.meshgrid(xs, ys)
    return float(point_in_polygon(gx, gy, p).sum()) * cell * cell


def point_in_polygon(xs, ys, poly: FieldPolygon):
    inside = np.zeros(np.shape(xs), dtype=bool)
    for ring in (poly.exterior, *poly.holes):
        n = len(ring)
        for i in range(n):
            x1, y1 = ring[i]
            x2, y2 = ring[(i + 1) % n]
            if y1 == y2:
                continue
            lo, hi = (y1, y2) if y1 < y2 else (y2, y1)
            hit = (ys >= lo) & (ys < hi)
            with np.errstate(invalid="ignore"):
                x_at = x1 + (ys - y1) * (x2 - x1) / (y2 - y1)
            inside ^= hit & (x_at > xs)
    return inside
