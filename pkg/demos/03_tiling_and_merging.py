"""Tiles cut fields apart; the border merge puts them back together.

A scene is tiled, the mock segmenter labels each tile independently, tile
masks are vectorized, and fragments that share more than 85% of their contact
run along a border (on both sides) are merged. The rule is deliberately
strict: when a pixel-staircase edge hugs the border, one side's contact can
dip under 85% and that pair stays split, so expect a handful of leftover
fragments here; pooling across tile sizes mops those up in full runs.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fieldfuse.degrade import DegradationSpec, MockConfig, mock_segment
from fieldfuse.geometry import Provenance, polygon_iou
from fieldfuse.mosaic import borders_for_grid, merge_adjacent
from fieldfuse.synth import FieldscapeSpec, generate_fieldscape
from fieldfuse.tiling import grid_for, make_tiles
from fieldfuse.vectorize import vectorize_mask

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

scape = generate_fieldscape(
    FieldscapeSpec(seed=8, extent=(400.0, 400.0), pixel_size=0.8, n_dates=1)
)
comp = scape.composites["T1"]
tiles = make_tiles(comp, 256)
grid = grid_for(comp, 256)
print(f"scene {comp.width}x{comp.height} px -> {len(tiles)} tiles of 256 px")

# Segment each tile independently (no degradation here) and vectorize.
per_tile = {}
for tile in tiles:
    labels = mock_segment(
        tile,
        scape.gt,
        DegradationSpec(),
        MockConfig("mock", 256, "T1", "original"),
        scape.adjacency,
        bund_px=scape.spec.bund_px,
    )
    polys = vectorize_mask(
        labels,
        tile.transform,
        id_prefix=f"{tile.tile_id}_p",
        provenance=Provenance("mock", 256, "T1", "original", tile.index),
    )
    per_tile[tile.index] = polys

n_fragments = sum(len(v) for v in per_tile.values())
merged = merge_adjacent(per_tile, grid)
print(f"fragments before merging: {n_fragments}")
print(f"polygons after merging:   {len(merged.polygons)} (ground truth {len(scape.gt.polygons)})")

# How faithful is the reassembly? Nearly every truth field gets a perfect
# twin; the stragglers are staircase cuts the two-sided 85% rule rejects.
ious = []
for g in scape.gt.polygons:
    ious.append(max(polygon_iou(g, m) for m in merged.polygons))
perfect = sum(1 for v in ious if v > 0.999)
print(f"perfect twins: {perfect}/{len(ious)}, mean IoU {np.mean(ious):.4f}, worst {min(ious):.4f}")

fig, axes = plt.subplots(1, 2, figsize=(12, 6))
t = scape.transform
for ax, (title, polys) in zip(
    axes,
    [
        ("per-tile fragments", [p for v in per_tile.values() for p in v]),
        ("after border merging", merged.polygons),
    ],
):
    ax.imshow(comp.data)
    for poly in polys:
        px, py = t.world_to_pixel(poly.exterior[:, 0], poly.exterior[:, 1])
        ax.plot(np.append(px, px[0]), np.append(py, py[0]), lw=0.6, color="cyan")
    for b in borders_for_grid(grid):
        if b.orientation == "vertical":
            (x0, x1), (y0, y1) = t.world_to_pixel([b.axis, b.axis], [b.lo, b.hi])
        else:
            (x0, x1), (y0, y1) = t.world_to_pixel([b.lo, b.hi], [b.axis, b.axis])
        ax.plot([x0, x1], [y0, y1], color="red", lw=1.0, ls="--")
    ax.set_title(title)
    ax.set_axis_off()
fig.tight_layout()
fig.savefig(OUT / "03_merging.png", dpi=110)
print("wrote", OUT / "03_merging.png")
