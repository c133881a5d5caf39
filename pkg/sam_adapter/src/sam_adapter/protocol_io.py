"""Protocol file I/O: manifest in, 16-bit label PNGs and done.json out.

Implements the adapter side of the fieldfuse job-directory contract (see the
pipeline's docs/protocol.md); deliberately self-contained so the adapter has
no dependency on the pipeline package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass(frozen=True)
class TileRecord:
    tile_id: str
    image: str
    width: int
    height: int


@dataclass(frozen=True)
class Manifest:
    job_id: str
    job_dir: Path
    checkpoint: str
    variant: str
    tiles: tuple[TileRecord, ...]


def read_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    doc = json.loads(path.read_text())
    tiles = tuple(
        TileRecord(t["tile_id"], t["image"], t["width"], t["height"])
        for t in doc["tiles"]
    )
    return Manifest(
        doc["job_id"], path.parent, doc["checkpoint"], doc.get("variant", "original"), tiles
    )


def load_tile_image(manifest: Manifest, record: TileRecord) -> np.ndarray:
    img = Image.open(manifest.job_dir / record.image).convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def write_label_png(path: str | Path, labels: np.ndarray) -> None:
    """Single-channel 16-bit PNG, the only mask format the protocol allows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(labels.astype("<u2"))
    img = Image.frombuffer(
        "I;16", (arr.shape[1], arr.shape[0]), arr.tobytes(), "raw", "I;16", 0, 1
    )
    img.save(path, format="PNG")


def write_done(out_dir: str | Path, job_id: str, results: list[dict]) -> None:
    """done.json is written once, atomically, after all tiles are finished."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp = out_dir / "done.json.tmp"
    tmp.write_text(json.dumps({"job_id": job_id, "results": results}, indent=1))
    tmp.replace(out_dir / "done.json")
