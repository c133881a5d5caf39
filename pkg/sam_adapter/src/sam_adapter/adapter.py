"""Adapter entry point: `fieldfuse-sam-adapter --manifest ... --out ... --checkpoint ...`.

Per tile: run automatic mask generation, flatten the overlapping masks
(largest painted first, so smaller masks win), write the 16-bit label PNG,
and finally publish done.json. Missing weights or an unusable backend exit
nonzero with a message; a single tile failing becomes a status "error" entry
and the adapter still exits 0 if any tile succeeded.
"""

from __future__ import annotations

import argparse
import sys
import traceback

from .backends import BackendError, load_backend
from .config import AdapterConfig, AdapterConfigError
from .flatten import flatten_masks
from .protocol_io import load_tile_image, read_manifest, write_done, write_label_png


def run(manifest_path: str, out_dir: str, checkpoint: str) -> int:
    manifest = read_manifest(manifest_path)
    config = AdapterConfig.from_env(checkpoint)
    generate = load_backend(config)

    results = []
    n_ok = 0
    for record in manifest.tiles:
        try:
            image = load_tile_image(manifest, record)
            masks = generate(image)
            labels = flatten_masks(masks, (record.height, record.width))
            rel = f"masks/{record.tile_id}.png"
            write_label_png(f"{out_dir}/{rel}", labels)
            results.append(
                {
                    "tile_id": record.tile_id,
                    "mask": rel,
                    "n_masks": int(labels.max()),
                    "status": "ok",
                }
            )
            n_ok += 1
        except Exception as exc:  # per-tile failure: record, keep going
            results.append(
                {
                    "tile_id": record.tile_id,
                    "mask": "",
                    "n_masks": 0,
                    "status": "error",
                    "message": f"{type(exc).__name__}: {exc}",
                }
            )
    write_done(out_dir, manifest.job_id, results)
    return 0 if n_ok > 0 else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fieldfuse-sam-adapter")
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--checkpoint", required=True)
    args = parser.parse_args(argv)
    try:
        return run(args.manifest, args.out, args.checkpoint)
    except (AdapterConfigError, BackendError) as exc:
        print(f"sam adapter cannot run: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
