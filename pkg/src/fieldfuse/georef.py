"""Tie-point georectification: least-squares affine fit and raster warping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .raster import RasterGrid


class GeorefError(ValueError):
    """Raised for underdetermined or degenerate tie-point configurations."""


@dataclass(frozen=True)
class AffineTransform:
    """(x, y) -> (a*x + b*y + c, d*x + e*y + f); must be invertible."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    def __post_init__(self):
        if abs(self.determinant) < 1e-12:
            raise GeorefError(f"affine transform is singular (det={self.determinant})")

    @property
    def determinant(self) -> float:
        return self.a * self.e - self.b * self.d

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack(
            [self.a * x + self.b * y + self.c, self.d * x + self.e * y + self.f]
        )

    def inverse(self) -> "AffineTransform":
        det = self.determinant
        ia, ib = self.e / det, -self.b / det
        id_, ie = -self.d / det, self.a / det
        return AffineTransform(
            ia, ib, -(ia * self.c + ib * self.f), id_, ie, -(id_ * self.c + ie * self.f)
        )

    def coefficients(self) -> tuple[float, ...]:
        return (self.a, self.b, self.c, self.d, self.e, self.f)


@dataclass(frozen=True)
class TieSet:
    """Paired control points (source -> target), both in pixel coordinates."""

    source: np.ndarray  # (n, 2)
    target: np.ndarray  # (n, 2)

    def __post_init__(self):
        src = np.asarray(self.source, dtype=float)
        dst = np.asarray(self.target, dtype=float)
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", dst)
        if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
            raise GeorefError("tie set needs matching (n, 2) source/target arrays")
        if len(src) < 3:
            raise GeorefError(f"need at least 3 tie points, got {len(src)}")


class AffineFit(NamedTuple):
    transform: AffineTransform
    rms_residual: float


def fit_affine(ties: TieSet) -> AffineFit:
    """Least-squares affine fit over the six coefficients.

    Raises GeorefError for fewer than 3 points or a collinear configuration.
    """
    design = np.column_stack([ties.source, np.ones(len(ties.source))])
    if np.linalg.matrix_rank(design) < 3:
        raise GeorefError("tie points are collinear; affine fit is underdetermined")
    coeffs, _, _, _ = np.linalg.lstsq(design, ties.target, rcond=None)
    t = AffineTransform(
        coeffs[0, 0], coeffs[1, 0], coeffs[2, 0], coeffs[0, 1], coeffs[1, 1], coeffs[2, 1]
    )
    residuals = t.apply(ties.source) - ties.target
    rms = float(np.sqrt(np.mean(np.sum(residuals**2, axis=1))))
    return AffineFit(t, rms)


def warp(
    raster: RasterGrid, transform: AffineTransform, resampling: str = "nearest"
) -> RasterGrid:
    """Resample a raster through an affine pixel transform (inverse mapping).

    Output pixels that map outside the source get the raster's nodata value
    (0 if none is declared).
    """
    order = {"nearest": 0, "bilinear": 1}.get(resampling)
    if order is None:
        raise ValueError(f"unknown resampling {resampling!r}")
    inv = transform.inverse()
    h, w = raster.height, raster.width
    cols, rows = np.meshgrid(np.arange(w), np.arange(h))
    # pixel centers map through the inverse; sample source at fractional indices
    src = inv.apply(np.column_stack([cols.ravel() + 0.5, rows.ravel() + 0.5]))
    src_cols = src[:, 0].reshape(h, w) - 0.5
    src_rows = src[:, 1].reshape(h, w) - 0.5
    nodata = raster.nodata if raster.nodata is not None else 0.0
    inside = (
        (src_cols >= -0.5) & (src_cols <= w - 0.5) & (src_rows >= -0.5) & (src_rows <= h - 0.5)
    )
    bands = {}
    for name, plane in raster.bands.items():
        warped = ndimage.map_coordinates(
            plane.astype(np.float64), [src_rows, src_cols], order=order, mode="nearest"
        )
        warped[~inside] = nodata
        bands[name] = warped.astype(np.float32)
    return RasterGrid(w, h, bands, raster.transform, raster.crs_id, raster.nodata)
