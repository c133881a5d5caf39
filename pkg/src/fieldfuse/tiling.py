"""Multi-size tiling of byte composites.

Tiles form a non-overlapping grid covering the image. When the extent does
not divide evenly, the last row/column of tiles is reflect-padded to full
size and each tile records the validity rectangle backed by real pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import ByteComposite, GeoTransform, Tile

ALLOWED_TILE_SIZES = (256, 512, 768, 1024)


@dataclass(frozen=True)
class TileGrid:
    """Layout of a tiling run: enough to reconstruct borders and validity."""

    transform: GeoTransform  # scene transform
    scene_width: int
    scene_height: int
    size: int

    @property
    def tiles_x(self) -> int:
        return -(-self.scene_width // self.size)

    @property
    def tiles_y(self) -> int:
        return -(-self.scene_height // self.size)

    def tile_transform(self, tx: int, ty: int) -> GeoTransform:
        return self.transform.shifted(tx * self.size, ty * self.size)

    def validity(self, tx: int, ty: int) -> tuple[int, int, int, int]:
        c1 = min(self.size, self.scene_width - tx * self.size)
        r1 = min(self.size, self.scene_height - ty * self.size)
        return (0, 0, c1, r1)

    def to_dict(self) -> dict:
        return {
            "geotransform": self.transform.as_list(),
            "scene_width": self.scene_width,
            "scene_height": self.scene_height,
            "size": self.size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TileGrid":
        return cls(
            GeoTransform(*d["geotransform"]),
            d["scene_width"],
            d["scene_height"],
            d["size"],
        )


def make_tiles(composite: ByteComposite, size: int) -> list[Tile]:
    """Cut a composite into a grid of `size`-pixel tiles (reflect-padded)."""
    if size not in ALLOWED_TILE_SIZES:
        raise ValueError(f"tile size {size} not in {ALLOWED_TILE_SIZES}")
    grid = TileGrid(composite.transform, composite.width, composite.height, size)
    pad_r = grid.tiles_y * size - composite.height
    pad_c = grid.tiles_x * size - composite.width
    padded = np.pad(composite.data, ((0, pad_r), (0, pad_c), (0, 0)), mode="symmetric")
    tiles = []
    for ty in range(grid.tiles_y):
        for tx in range(grid.tiles_x):
            r0, c0 = ty * size, tx * size
            tiles.append(
                Tile(
                    index=(tx, ty),
                    col_off=c0,
                    row_off=r0,
                    size=size,
                    data=padded[r0 : r0 + size, c0 : c0 + size],
                    transform=grid.tile_transform(tx, ty),
                    validity=grid.validity(tx, ty),
                )
            )
    return tiles


def grid_for(composite: ByteComposite, size: int) -> TileGrid:
    return TileGrid(composite.transform, composite.width, composite.height, size)
