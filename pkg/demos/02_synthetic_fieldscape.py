"""Synthetic fieldscape tour: Voronoi fields, bunds, and crop phenology.

The generator scatters seed points, assigns every pixel to its nearest point,
darkens the ownership boundaries into bund lines, and keeps the pixel-exact
field polygons as ground truth. Each date samples a different stage of the
crop cycle, so the same fields look different in every composite.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fieldfuse.metrics import area_histogram
from fieldfuse.synth import FieldscapeSpec, generate_fieldscape

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

spec = FieldscapeSpec(seed=42, extent=(400.0, 400.0), pixel_size=0.8, median_ha=0.05, n_dates=4)
scape = generate_fieldscape(spec)
areas_ha = np.array([p.area for p in scape.gt.polygons]) / 10_000.0
print(f"{len(scape.gt.polygons)} fields over {spec.extent[0] * spec.extent[1] / 1e4:.0f} ha")
print(f"median field {np.median(areas_ha):.3f} ha, smallest {areas_ha.min():.4f} ha")
print(f"adjacent pairs (bund neighbours): {len(scape.adjacency)}")

fig, axes = plt.subplots(1, 4, figsize=(16, 4.2))
for ax, (date, comp) in zip(axes, sorted(scape.composites.items())):
    ax.imshow(comp.data)
    ax.set_title(f"{date}")
    ax.set_axis_off()
fig.suptitle("one fieldscape through the crop cycle")
fig.tight_layout()
fig.savefig(OUT / "02_dates.png", dpi=110)

# Ground truth overlay: polygons are stored in meters; map them to pixels.
fig, ax = plt.subplots(figsize=(6.5, 6.5))
ax.imshow(scape.composites["T3"].data)
t = scape.transform
for poly in scape.gt.polygons:
    px, py = t.world_to_pixel(poly.exterior[:, 0], poly.exterior[:, 1])
    ax.plot(np.append(px, px[0]), np.append(py, py[0]), color="yellow", lw=0.5)
ax.set_axis_off()
ax.set_title("ground-truth field boundaries over T3")
fig.tight_layout()
fig.savefig(OUT / "02_ground_truth.png", dpi=110)

# Field size distribution, the way reports bin it (hectares).
edges, counts = area_histogram(scape.gt, [0, 0.01, 0.025, 0.05, 0.1, 0.2, 0.4, 0.6])
fig, ax = plt.subplots(figsize=(6, 3.5))
ax.bar(range(len(counts)), counts, color="#4C78A8")
ax.set_xticks(range(len(counts)))
ax.set_xticklabels([f"{a}-{b}" for a, b in zip(edges[:-1], edges[1:])], rotation=30)
ax.set_xlabel("area bin (ha)")
ax.set_ylabel("fields")
fig.tight_layout()
fig.savefig(OUT / "02_area_histogram.png", dpi=110)
print("wrote three figures to", OUT)
