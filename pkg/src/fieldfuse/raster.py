"""Georeferenced raster model and the sidecar-header interchange format.

A raster is a stack of named float32 planes plus an axis-aligned geotransform
(top-left origin, square pixels, north up): world_x = origin_x + col * pixel,
world_y = origin_y - row * pixel. Byte composites are 3-channel uint8 images
with the same georeferencing.

On disk: `<stem>.rasterjson` (header) next to `<stem>.rasterbin` (little-endian,
row-major, band-sequential). Byte composites may instead travel as PNG plus the
same JSON sidecar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class RasterError(ValueError):
    """Raised for inconsistent raster construction or malformed files."""


@dataclass(frozen=True)
class GeoTransform:
    origin_x: float
    origin_y: float
    pixel_size: float

    def __post_init__(self):
        if self.pixel_size <= 0:
            raise RasterError(f"pixel_size must be positive, got {self.pixel_size}")

    def pixel_to_world(self, col, row):
        """Map pixel-space coordinates (corners at integers) to meters."""
        return self.origin_x + np.asarray(col) * self.pixel_size, self.origin_y - np.asarray(
            row
        ) * self.pixel_size

    def world_to_pixel(self, x, y):
        return (np.asarray(x) - self.origin_x) / self.pixel_size, (
            self.origin_y - np.asarray(y)
        ) / self.pixel_size

    def shifted(self, col_off: int, row_off: int) -> "GeoTransform":
        """Transform of a window whose top-left pixel is (col_off, row_off)."""
        x, y = self.pixel_to_world(col_off, row_off)
        return GeoTransform(float(x), float(y), self.pixel_size)

    def as_list(self) -> list[float]:
        return [self.origin_x, self.origin_y, self.pixel_size]


def as_transform(t) -> GeoTransform:
    if isinstance(t, GeoTransform):
        return t
    ox, oy, px = t
    return GeoTransform(float(ox), float(oy), float(px))


@dataclass
class RasterGrid:
    """Multi-band floating-point raster; all bands share one geotransform."""

    width: int
    height: int
    bands: dict[str, np.ndarray]
    transform: GeoTransform
    crs_id: int = 0
    nodata: float | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise RasterError(f"bad raster dims {self.width}x{self.height}")
        for name, plane in self.bands.items():
            if plane.shape != (self.height, self.width):
                raise RasterError(
                    f"band {name!r} shape {plane.shape} != {(self.height, self.width)}"
                )

    @classmethod
    def from_bands(cls, bands: dict[str, np.ndarray], transform, crs_id=0, nodata=None):
        first = next(iter(bands.values()))
        h, w = first.shape
        planes = {k: np.asarray(v, dtype=np.float32) for k, v in bands.items()}
        return cls(w, h, planes, as_transform(transform), crs_id, nodata)

    def band(self, name: str) -> np.ndarray:
        return self.bands[name]


@dataclass
class ByteComposite:
    """3-channel 8-bit composite (false color), original or edge-enhanced."""

    data: np.ndarray  # (height, width, 3) uint8
    transform: GeoTransform
    crs_id: int = 0
    variant: str = "original"
    date_id: str | None = None

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise RasterError(f"composite needs (h, w, 3) data, got {self.data.shape}")
        if self.data.dtype != np.uint8:
            raise RasterError(f"composite must be uint8, got {self.data.dtype}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class Tile:
    """One square window of a composite, padded to full size if needed.

    `validity` is the rectangle of pixels backed by the parent image, in
    tile-local (col0, row0, col1, row1) pixel coordinates; masks predicted on
    the padded area must be clipped back to it.
    """

    index: tuple[int, int]  # (tile_x, tile_y) in the grid
    col_off: int
    row_off: int
    size: int
    data: np.ndarray  # (size, size, 3) uint8
    transform: GeoTransform
    validity: tuple[int, int, int, int]

    @property
    def tile_id(self) -> str:
        return f"t{self.index[0]:02d}_{self.index[1]:02d}"

    def validity_fraction(self) -> float:
        c0, r0, c1, r1 = self.validity
        return (c1 - c0) * (r1 - r0) / float(self.size * self.size)


# ---------------------------------------------------------------------------
# sidecar-header interchange
# ---------------------------------------------------------------------------

_DTYPES = {"f32": np.dtype("<f4"), "u8": np.dtype("u1")}


def _header(width, height, band_names, dtype, transform, crs_id, nodata, extra=None):
    head = {
        "width": int(width),
        "height": int(height),
        "bands": list(band_names),
        "dtype": dtype,
        "geotransform": as_transform(transform).as_list(),
        "crs_id": int(crs_id),
        "nodata": nodata,
    }
    if extra:
        head.update(extra)
    return head


def write_raster(grid: RasterGrid, stem: str | Path) -> Path:
    """Write `<stem>.rasterjson` + `<stem>.rasterbin`; returns the header path."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    names = list(grid.bands)
    head = _header(
        grid.width, grid.height, names, "f32", grid.transform, grid.crs_id, grid.nodata
    )
    body = np.concatenate(
        [np.asarray(grid.bands[n], dtype="<f4").reshape(-1) for n in names]
    )
    stem.with_suffix(".rasterbin").write_bytes(body.tobytes())
    header_path = stem.with_suffix(".rasterjson")
    header_path.write_text(json.dumps(head, indent=1, sort_keys=True))
    return header_path


def read_raster(path: str | Path) -> RasterGrid:
    path = Path(path)
    if path.suffix != ".rasterjson":
        path = path.with_suffix(".rasterjson")
    head = json.loads(path.read_text())
    dtype = _DTYPES.get(head["dtype"])
    if dtype is None:
        raise RasterError(f"unsupported dtype {head['dtype']!r} in {path}")
    w, h = head["width"], head["height"]
    raw = np.frombuffer(path.with_suffix(".rasterbin").read_bytes(), dtype=dtype)
    names = head["bands"]
    if raw.size != w * h * len(names):
        raise RasterError(
            f"{path}: payload has {raw.size} values, expected {w * h * len(names)}"
        )
    bands = {
        name: raw[i * w * h : (i + 1) * w * h].reshape(h, w).astype(np.float32)
        for i, name in enumerate(names)
    }
    return RasterGrid(
        w,
        h,
        bands,
        GeoTransform(*head["geotransform"]),
        head.get("crs_id", 0),
        head.get("nodata"),
    )


def write_composite(comp: ByteComposite, path: str | Path) -> Path:
    """Write a composite as PNG plus a JSON sidecar next to it."""
    path = Path(path)
    if path.suffix != ".png":
        path = path.with_suffix(".png")
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(comp.data, mode="RGB").save(path, format="PNG")
    head = _header(
        comp.width,
        comp.height,
        ["c0", "c1", "c2"],
        "u8",
        comp.transform,
        comp.crs_id,
        None,
        extra={"variant": comp.variant, "date_id": comp.date_id},
    )
    path.with_suffix(".json").write_text(json.dumps(head, indent=1, sort_keys=True))
    return path


def read_composite(path: str | Path) -> ByteComposite:
    path = Path(path)
    data = np.asarray(Image.open(path).convert("RGB"), dtype=np.uint8)
    head = json.loads(path.with_suffix(".json").read_text())
    return ByteComposite(
        data,
        GeoTransform(*head["geotransform"]),
        head.get("crs_id", 0),
        head.get("variant", "original"),
        head.get("date_id"),
    )
