"""File-exchange contract between the pipeline and any mask-producing segmenter.

A job directory holds `manifest.json` and `tiles/<tile_id>.png` (8-bit RGB).
The adapter is invoked as `<command> --manifest <path> --out <dir>
--checkpoint <name>`; it must write one single-channel 16-bit PNG label
raster per tile at `masks/<tile_id>.png` (0 = background, labels exactly
{1..N}) and finally `done.json`, exiting 0 iff done.json was written.
Adapters must flatten overlapping masks themselves: smaller-area masks
overwrite larger ones, so small fields survive inside big ones.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .raster import GeoTransform, Tile, as_transform

CHECKPOINTS = ("vit_b", "vit_h", "vit_l", "mock")


class ProtocolError(RuntimeError):
    """Malformed manifests/results or a failing adapter run."""


class MaskValidationError(ProtocolError):
    def __init__(self, tile_id: str, problems: list[str]):
        self.tile_id = tile_id
        self.problems = problems
        super().__init__(f"mask for {tile_id} invalid: " + "; ".join(problems))


@dataclass(frozen=True)
class TileRecord:
    tile_id: str
    image: str  # path relative to the job dir
    width: int
    height: int
    transform: GeoTransform


@dataclass(frozen=True)
class SegmentJob:
    job_id: str
    job_dir: Path
    checkpoint: str
    variant: str
    tiles: tuple[TileRecord, ...]

    def __post_init__(self):
        ids = [t.tile_id for t in self.tiles]
        if len(set(ids)) != len(ids):
            raise ProtocolError(f"duplicate tile ids in job {self.job_id}")

    @property
    def manifest_path(self) -> Path:
        return self.job_dir / "manifest.json"


@dataclass
class MaskResult:
    tile_id: str
    labels: np.ndarray  # uint16, 0 = background, labels dense 1..N
    n_masks: int
    warnings: tuple[str, ...] = ()


def write_job(
    job_dir: str | Path,
    job_id: str,
    checkpoint: str,
    variant: str,
    tiles: list[Tile],
) -> SegmentJob:
    """Lay out a job directory: tile PNGs plus manifest.json."""
    if checkpoint not in CHECKPOINTS:
        raise ProtocolError(f"unknown checkpoint {checkpoint!r}")
    job_dir = Path(job_dir)
    (job_dir / "tiles").mkdir(parents=True, exist_ok=True)
    records = []
    for tile in tiles:
        rel = f"tiles/{tile.tile_id}.png"
        Image.fromarray(tile.data, mode="RGB").save(job_dir / rel, format="PNG")
        records.append(
            TileRecord(tile.tile_id, rel, tile.size, tile.size, tile.transform)
        )
    job = SegmentJob(job_id, job_dir, checkpoint, variant, tuple(records))
    manifest = {
        "job_id": job_id,
        "checkpoint": checkpoint,
        "variant": variant,
        "tiles": [
            {
                "tile_id": r.tile_id,
                "image": r.image,
                "width": r.width,
                "height": r.height,
                "geotransform": r.transform.as_list(),
            }
            for r in records
        ],
    }
    job.manifest_path.write_text(json.dumps(manifest, indent=1))
    return job


def read_manifest(path: str | Path) -> SegmentJob:
    path = Path(path)
    doc = json.loads(path.read_text())
    tiles = tuple(
        TileRecord(
            t["tile_id"],
            t["image"],
            t["width"],
            t["height"],
            as_transform(t["geotransform"]),
        )
        for t in doc["tiles"]
    )
    return SegmentJob(doc["job_id"], path.parent, doc["checkpoint"], doc.get("variant", "original"), tiles)


def write_mask(path: str | Path, labels: np.ndarray) -> Path:
    """Write a label raster as single-channel 16-bit PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(labels.astype("<u2"))
    img = Image.frombuffer("I;16", (arr.shape[1], arr.shape[0]), arr.tobytes(), "raw", "I;16", 0, 1)
    img.save(path, format="PNG")
    return path


def _png_ihdr(path: Path) -> tuple[int, int]:
    """(bit_depth, color_type) straight from the PNG header."""
    with open(path, "rb") as fh:
        head = fh.read(26)
    if len(head) < 26 or head[:8] != b"\x89PNG\r\n\x1a\n":
        raise ProtocolError(f"{path} is not a PNG file")
    return head[24], head[25]


def validate_mask(path: str | Path, expected_dims: tuple[int, int]) -> MaskResult:
    """Check a mask file against the protocol; raises MaskValidationError.

    Rules: single-channel 16-bit PNG, dimensions matching the tile, labels
    exactly the dense set {1..N}. A mask with no background pixel is legal
    but worth flagging, so it comes back as a warning.
    """
    path = Path(path)
    tile_id = path.stem
    problems = []
    if not path.exists():
        raise MaskValidationError(tile_id, [f"mask file missing: {path}"])
    bit_depth, color_type = _png_ihdr(path)
    if bit_depth != 16 or color_type != 0:
        problems.append(
            f"expected 16-bit single-channel PNG, got bit depth {bit_depth} color type {color_type}"
        )
    labels = np.asarray(Image.open(path), dtype=np.int64)
    width, height = expected_dims
    if labels.shape != (height, width):
        problems.append(f"dimensions {labels.shape[::-1]} != expected {(width, height)}")
    if problems:
        raise MaskValidationError(tile_id, problems)
    values = np.unique(labels)
    nonzero = values[values != 0]
    n = int(nonzero.max()) if len(nonzero) else 0
    if len(nonzero) != n or (len(nonzero) and nonzero.min() < 1):
        raise MaskValidationError(
            tile_id, [f"labels not dense 1..N: found {nonzero[:10].tolist()}..."]
        )
    warnings = () if 0 in values else ("no background pixels",)
    return MaskResult(tile_id, labels.astype(np.uint16), n, warnings)


@dataclass
class DispatchOutcome:
    """Validated masks in manifest order, plus per-tile error entries."""

    results: list[MaskResult]
    tile_errors: list[str]

    def require_complete(self) -> list[MaskResult]:
        if self.tile_errors:
            raise ProtocolError("job had per-tile errors:\n" + "\n".join(self.tile_errors))
        return self.results


def dispatch(
    job: SegmentJob,
    adapter_command: list[str],
    timeout: float | None = 600.0,
    env: dict | None = None,
) -> DispatchOutcome:
    """Run an adapter over a job and validate everything it returns.

    Job-level failures (nonzero exit, timeout, missing done.json) raise
    ProtocolError with the captured diagnostics and discard partial results.
    Missing or invalid masks become per-tile error entries in the outcome.
    """
    out_dir = job.job_dir
    cmd = list(adapter_command) + [
        "--manifest",
        str(job.manifest_path),
        "--out",
        str(out_dir),
        "--checkpoint",
        job.checkpoint,
    ]
    run_env = None
    if env:
        import os

        run_env = {**os.environ, **env}
    try:
        proc = subprocess.run(
            cmd, capture_output=True, text=True, timeout=timeout, env=run_env
        )
    except subprocess.TimeoutExpired as exc:
        raise ProtocolError(f"adapter timed out after {timeout}s: {cmd}") from exc
    except FileNotFoundError as exc:
        raise ProtocolError(f"adapter command not resolvable: {cmd[0]}") from exc
    if proc.returncode != 0:
        raise ProtocolError(
            f"adapter exited {proc.returncode}\nstdout:\n{proc.stdout[-2000:]}\n"
            f"stderr:\n{proc.stderr[-2000:]}"
        )
    done_path = out_dir / "done.json"
    if not done_path.exists():
        raise ProtocolError(f"adapter exited 0 but wrote no done.json in {out_dir}")
    done = json.loads(done_path.read_text())
    if done.get("job_id") != job.job_id:
        raise ProtocolError(
            f"done.json is for job {done.get('job_id')!r}, expected {job.job_id!r}"
        )
    by_tile = {r["tile_id"]: r for r in done.get("results", [])}
    results = []
    errors = []
    for record in job.tiles:
        entry = by_tile.get(record.tile_id)
        if entry is None:
            errors.append(f"{record.tile_id}: missing from done.json")
            continue
        if entry.get("status") != "ok":
            errors.append(f"{record.tile_id}: {entry.get('message', 'adapter error')}")
            continue
        try:
            results.append(
                validate_mask(out_dir / entry["mask"], (record.width, record.height))
            )
        except MaskValidationError as exc:
            errors.append(str(exc))
    return DispatchOutcome(results, errors)


def write_done(out_dir: str | Path, job_id: str, results: list[dict]) -> Path:
    """Atomically publish done.json (write to a temp name, then rename)."""
    out_dir = Path(out_dir)
    tmp = out_dir / "done.json.tmp"
    tmp.write_text(json.dumps({"job_id": job_id, "results": results}, indent=1))
    final = out_dir / "done.json"
    tmp.replace(final)
    return final
