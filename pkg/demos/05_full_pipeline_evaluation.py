"""The whole pipeline in one go, driven exactly like the CLI drives it.

Builds a run configuration in code, executes synth -> preprocess -> tile ->
segment -> vectorize -> merge -> fuse -> evaluate with a mildly degraded mock
segmenter, and prints the resulting per-layer metrics table. Artifacts (tile
jobs, GeoJSON layers, CSV/SVG reports) are left under demos/output/run for
inspection; the same run is reproducible byte for byte from its config.
"""

import shutil
import sys
from pathlib import Path

from fieldfuse.config import RunConfig
from fieldfuse.pipeline import run_all

OUT = Path(__file__).parent / "output" / "run"
shutil.rmtree(OUT, ignore_errors=True)

cfg = RunConfig.from_dict(
    {
        "seed": 7,
        "out_dir": str(OUT),
        "fieldscape": {
            "extent": [320.0, 320.0],
            "pixel_size": 0.8,
            "median_ha": 0.05,
            "n_dates": 2,
        },
        "variants": ["original", "edge_enhanced"],
        "tile_sizes": [256],
        "checkpoints": ["mock"],
        "adapter": [sys.executable, "-m", "fieldfuse.mock_adapter"],
        "degradation": {
            "dropout_rate": 0.45,
            "boundary_jitter_sigma": 0.6,
            "date_response": {"T1": 0.7, "T2": 0.9},
        },
        "workers": 4,
    }
)

reports = run_all(cfg)
print(f"{'level':>16} {'layer':<38} {'detect%':>8} {'IoU':>6} {'preds':>6}")
for r in reports:
    iou = "  -  " if r.mean_iou is None else f"{r.mean_iou:.3f}"
    print(f"{str(r.level):>16} {r.label():<38} {r.detection_pct:8.2f} {iou:>6} {r.n_pred:6d}")

print("\nPooling never loses a match: detection climbs level by level even")
print("though every individual configuration missed around half the fields.")
print("Reports written to", OUT / "reports")
