"""Built-in mock segmenter speaking the adapter protocol over files.

Invoked as `fieldfuse-mock-adapter --manifest <path> --out <dir> --checkpoint
<name>`. Scene context (ground-truth layer, degradation, date) comes from a
`mock.json` sidecar in the job directory, or from the path in the
FIELDFUSE_MOCK_CONFIG environment variable. Masks are produced by the same
degradation model as the in-process mock, so both routes agree bit for bit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .degrade import DegradationSpec, MockConfig, mock_segment
from .layers import read_layer, read_layer_properties
from .protocol import read_manifest, write_done, write_mask
from .raster import Tile


def _load_mock_config(job_dir: Path) -> dict:
    override = os.environ.get("FIELDFUSE_MOCK_CONFIG")
    path = Path(override) if override else job_dir / "mock.json"
    if not path.exists():
        raise FileNotFoundError(
            f"mock adapter needs a config at {path} (or FIELDFUSE_MOCK_CONFIG)"
        )
    return json.loads(path.read_text())


def run(manifest: str, out_dir: str, checkpoint: str) -> int:
    job = read_manifest(manifest)
    out = Path(out_dir)
    cfg = _load_mock_config(job.job_dir)
    gt_path = Path(cfg["gt"])
    if not gt_path.is_absolute():
        gt_path = job.job_dir / gt_path
    gt = read_layer(gt_path)
    gt_props = read_layer_properties(gt_path)
    adjacency = [tuple(p) for p in gt_props.get("adjacency", [])]
    bund_px = int(gt_props.get("bund_px", cfg.get("bund_px", 2)))
    deg = DegradationSpec.from_dict(cfg.get("degradation", {}))
    date_id = cfg["date_id"]

    (out / "masks").mkdir(parents=True, exist_ok=True)
    results = []
    for i, record in enumerate(job.tiles):
        config = MockConfig(checkpoint, record.width, date_id, job.variant)
        tile = Tile(
            index=_tile_index(record.tile_id, i),
            col_off=0,
            row_off=0,
            size=record.width,
            data=None,
            transform=record.transform,
            validity=(0, 0, record.width, record.height),
        )
        labels = mock_segment(tile, gt, deg, config, adjacency, bund_px)
        rel = f"masks/{record.tile_id}.png"
        write_mask(out / rel, labels)
        results.append(
            {
                "tile_id": record.tile_id,
                "mask": rel,
                "n_masks": int(labels.max()),
                "status": "ok",
            }
        )
    write_done(out, job.job_id, results)
    return 0


def _tile_index(tile_id: str, fallback: int) -> tuple[int, int]:
    # tile ids follow "t<tx>_<ty>"; the index seeds the jitter stream
    try:
        tx, ty = tile_id.lstrip("t").split("_")
        return (int(tx), int(ty))
    except ValueError:
        return (fallback, 0)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fieldfuse-mock-adapter")
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--checkpoint", required=True)
    args = parser.parse_args(argv)
    try:
        return run(args.manifest, args.out, args.checkpoint)
    except Exception as exc:  # adapter contract: nonzero exit + message
        print(f"mock adapter failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
