"""Image preprocessing: byte normalization, pansharpening, edge enhancement.

Defaults follow the production workflow: 2nd/98th percentile stretch for byte
conversion, and unsharp enhancement with an 11-pixel radius, sigma 10 Gaussian
blur and weighting factor 2.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .raster import ByteComposite, GeoTransform, RasterError, as_transform


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Deterministic half-up rounding (0.5 always rounds away from zero-ward up)."""
    return np.floor(np.asarray(values) + 0.5)


class NormalizeResult(NamedTuple):
    data: np.ndarray  # uint8 plane
    degenerate: bool  # True when the percentile window collapsed


def percentile_normalize(band: np.ndarray, p_low: float = 2.0, p_high: float = 98.0) -> NormalizeResult:
    """Stretch a value plane to 8 bits between two percentiles.

    Percentiles are linearly interpolated between order statistics. A
    degenerate window (identical percentile values) yields an all-zero plane
    with the degenerate flag set rather than an error.
    """
    band = np.asarray(band, dtype=np.float64)
    if band.size == 0:
        raise ValueError("band is empty")
    if not (0 <= p_low < p_high <= 100):
        raise ValueError(f"bad percentile window [{p_low}, {p_high}]")
    v_lo, v_hi = np.percentile(band, [p_low, p_high], method="linear")
    if v_hi == v_lo:
        return NormalizeResult(np.zeros(band.shape, dtype=np.uint8), True)
    scaled = round_half_up(255.0 * (band - v_lo) / (v_hi - v_lo))
    return NormalizeResult(np.clip(scaled, 0, 255).astype(np.uint8), False)


class PansharpenResult(NamedTuple):
    bands: dict[str, np.ndarray]  # float planes at the pan grid
    zero_weight: np.ndarray  # bool mask of pixels where the denominator was 0


def pansharpen(
    blue: np.ndarray,
    green: np.ndarray,
    nir: np.ndarray,
    pan: np.ndarray,
    coarse_transform: GeoTransform | None = None,
    fine_transform: GeoTransform | None = None,
    resampling: str = "bilinear",
) -> PansharpenResult:
    """Sharpen coarse bands onto the panchromatic grid.

    Each band is resampled to the pan grid, then scaled by
    weight = pan / (blue + green + nir) per fine pixel. Pixels with a zero
    denominator get weight 0 and are flagged instead of failing (black
    nodata edges are normal).
    """
    blue, green, nir = (np.asarray(b, dtype=np.float64) for b in (blue, green, nir))
    pan = np.asarray(pan, dtype=np.float64)
    if not (blue.shape == green.shape == nir.shape):
        raise RasterError("coarse bands disagree in shape")
    if coarse_transform is not None and fine_transform is not None:
        ct, ft = as_transform(coarse_transform), as_transform(fine_transform)
        if abs(ct.origin_x - ft.origin_x) > 1e-9 or abs(ct.origin_y - ft.origin_y) > 1e-9:
            raise RasterError("coarse and pan geotransforms have different origins")
        ratio = ct.pixel_size / ft.pixel_size
    else:
        ratio = pan.shape[0] / blue.shape[0]
        if abs(pan.shape[1] / blue.shape[1] - ratio) > 1e-9:
            raise RasterError("pan and coarse extents are not related by one ratio")
    if ratio < 1:
        raise RasterError("pan grid must be finer than the multispectral grid")

    resampled = {
        name: _resample_to_fine(band, pan.shape, ratio, resampling)
        for name, band in (("blue", blue), ("green", green), ("nir", nir))
    }
    denom = resampled["blue"] + resampled["green"] + resampled["nir"]
    zero = denom == 0
    weight = np.zeros_like(denom)
    np.divide(pan, denom, out=weight, where=~zero)
    return PansharpenResult({k: weight * v for k, v in resampled.items()}, zero)


def _resample_to_fine(band, fine_shape, ratio, resampling):
    # fine pixel center k maps to coarse index (k + 0.5)/ratio - 0.5
    rows = (np.arange(fine_shape[0]) + 0.5) / ratio - 0.5
    cols = (np.arange(fine_shape[1]) + 0.5) / ratio - 0.5
    grid = np.meshgrid(rows, cols, indexing="ij")
    order = {"bilinear": 1, "nearest": 0}.get(resampling)
    if order is None:
        raise ValueError(f"unknown resampling {resampling!r}")
    return ndimage.map_coordinates(band, grid, order=order, mode="nearest")


def gaussian_kernel(radius: int = 11, sigma: float = 10.0) -> np.ndarray:
    """(2*radius + 1)-tap kernel, k_i proportional to exp(-i^2 / (2 sigma^2)), sum 1."""
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    i = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(i**2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_blur(image: np.ndarray, radius: int = 11, sigma: float = 10.0) -> np.ndarray:
    """Separable Gaussian blur with reflect (edge-duplicating) borders.

    Accepts (h, w) or (h, w, channels); returns float64 of the same shape.
    """
    kernel = gaussian_kernel(radius, sigma)
    img = np.asarray(image, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    out = np.empty_like(img)
    for ch in range(img.shape[2]):
        tmp = ndimage.correlate1d(img[:, :, ch], kernel, axis=0, mode="reflect")
        out[:, :, ch] = ndimage.correlate1d(tmp, kernel, axis=1, mode="reflect")
    return out[:, :, 0] if squeeze else out


def enhance_edges(
    composite: ByteComposite,
    wf: float = 2.0,
    radius: int = 11,
    sigma: float = 10.0,
) -> ByteComposite:
    """Unsharp enhancement: img + (img - blur(img)) * wf, clamped to [0, 255].

    The arithmetic runs in floating point and is clamped only at the end,
    since intermediate values overshoot the byte range near edges.
    """
    img = composite.data.astype(np.float64)
    enhanced = img + (img - gaussian_blur(img, radius, sigma)) * wf
    data = np.clip(round_half_up(enhanced), 0, 255).astype(np.uint8)
    return ByteComposite(
        data, composite.transform, composite.crs_id, "edge_enhanced", composite.date_id
    )
