"""Pipeline stages wiring the modules into the full workflow.

Every intermediate artifact is addressable by its configuration key path
`<out>/<date>/<variant>/<size>/<checkpoint>/...`, with "combined" standing in
for dimensions a layer has been fused over. Timestamps are confined to
run.log; everything else is byte-stable across reruns.
"""

from __future__ import annotations

import datetime
import json
import os
import shlex
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig
from .fusion import fuse_all_levels
from .geometry import Provenance
from .georef import AffineTransform, TieSet, fit_affine, warp
from .layers import ConfigKey, PredictionLayer, read_layer, write_layer
from .mosaic import merge_adjacent
from .preprocess import enhance_edges
from .protocol import dispatch, write_job
from .raster import read_composite, read_raster, write_composite, write_raster
from .reports import MetricsReport, level_report, write_csv, write_level_svg
from .synth import compose, generate_fieldscape
from .tiling import TileGrid, grid_for, make_tiles
from .vectorize import clip_mask_to_validity, vectorize_mask


class PipelineError(RuntimeError):
    """Raised for runtime failures (CLI exit code 2)."""


def log(cfg: RunConfig, message: str) -> None:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    with open(cfg.out_dir / "run.log", "a", encoding="utf-8") as fh:
        fh.write(f"{stamp} {message}\n")


def gt_path(cfg: RunConfig) -> Path:
    return cfg.out_dir / "gt.geojson"


def composite_path(cfg: RunConfig, date: str, variant: str) -> Path:
    return cfg.out_dir / "composites" / date / f"{variant}.png"


def cell_layer_path(cfg: RunConfig, key: ConfigKey) -> Path:
    return cfg.out_dir.joinpath(*key.path_parts()) / "layer.geojson"


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def stage_synth(cfg: RunConfig) -> None:
    """Realize the fieldscape: ground truth plus per-date scene rasters."""
    if cfg.fieldscape is None:
        raise PipelineError("synth stage needs a fieldscape block in the config")
    scape = generate_fieldscape(cfg.fieldscape)
    write_layer(
        scape.gt,
        gt_path(cfg),
        extra_properties={
            "kind": "ground-truth",
            "adjacency": [list(p) for p in scape.adjacency],
            "bund_px": cfg.fieldscape.bund_px,
            "pixel_size": cfg.fieldscape.pixel_size,
            "extent": list(cfg.fieldscape.extent),
        },
    )
    for date_id, grids in scape.rasters.items():
        base = cfg.out_dir / "scenes" / date_id
        write_raster(grids["ms"], base / "ms")
        write_raster(grids["pan"], base / "pan")
    log(cfg, f"synth: {len(scape.gt.polygons)} fields, {len(scape.rasters)} dates")


def stage_preprocess(cfg: RunConfig) -> None:
    """normalize -> pansharpen -> (optional warp) -> composite -> enhance."""
    for date in cfg.dates:
        if cfg.scenes:
            paths = cfg.scenes[date]
            ms = read_raster(paths["ms"])
            pan = read_raster(paths["pan"])
        else:
            base = cfg.out_dir / "scenes" / date
            ms = read_raster(base / "ms.rasterjson")
            pan = read_raster(base / "pan.rasterjson")
        if date in cfg.tie_points:
            src, dst = cfg.tie_points[date]
            fitted = fit_affine(TieSet(np.asarray(src), np.asarray(dst))).transform
            pan = warp(pan, fitted, "bilinear")
            factor = ms.transform.pixel_size / pan.transform.pixel_size
            ms = warp(ms, _scale_affine(fitted, factor), "bilinear")
        original = compose(ms, pan, date, cfg.preprocess.p_low, cfg.preprocess.p_high)
        if "original" in cfg.variants:
            write_composite(original, composite_path(cfg, date, "original"))
        if "edge_enhanced" in cfg.variants:
            enhanced = enhance_edges(
                original, cfg.preprocess.wf, cfg.preprocess.radius, cfg.preprocess.sigma
            )
            write_composite(enhanced, composite_path(cfg, date, "edge_enhanced"))
    log(cfg, f"preprocess: {len(cfg.dates)} dates x {len(cfg.variants)} variants")


def _scale_affine(t: AffineTransform, factor: float) -> AffineTransform:
    """Re-express a fine-pixel affine in a grid whose pixels are `factor` finer."""
    return AffineTransform(t.a, t.b, t.c / factor, t.d, t.e, t.f / factor)


def stage_tile(cfg: RunConfig) -> None:
    """Record the tile grid per (date, variant, size)."""
    for date in cfg.dates:
        for variant in cfg.variants:
            comp = read_composite(composite_path(cfg, date, variant))
            for size in cfg.tile_sizes:
                grid = grid_for(comp, size)
                path = cfg.out_dir / date / variant / str(size) / "grid.json"
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(json.dumps(grid.to_dict(), indent=1, sort_keys=True))
    log(cfg, "tile: grids recorded")


def adapter_command(cfg: RunConfig) -> list[str]:
    override = os.environ.get("FIELDFUSE_ADAPTER")
    return shlex.split(override) if override else list(cfg.adapter)


def stage_segment(cfg: RunConfig) -> None:
    """Write one job per grid cell and dispatch the adapter over it."""
    command = adapter_command(cfg)
    cells = cfg.grid_cells()

    def run_cell(cell):
        date, variant, size, checkpoint = cell
        comp = read_composite(composite_path(cfg, date, variant))
        tiles = make_tiles(comp, size)
        cell_dir = cfg.cell_dir(date, variant, size, checkpoint)
        job_dir = cell_dir / "job"
        job = write_job(
            job_dir, f"{date}-{variant}-{size}-{checkpoint}", checkpoint, variant, tiles
        )
        mock_cfg = {
            "gt": os.path.relpath(gt_path(cfg), job_dir),
            "degradation": cfg.degradation.to_dict(),
            "date_id": date,
        }
        (job_dir / "mock.json").write_text(json.dumps(mock_cfg, indent=1))
        outcome = dispatch(job, command, timeout=cfg.adapter_timeout_s)
        return cell, outcome

    failures = []
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        for cell, outcome in pool.map(run_cell, cells):
            for err in outcome.tile_errors:
                failures.append(f"{cell}: {err}")
    for failure in failures:
        log(cfg, f"segment: tile failure {failure}")
    log(cfg, f"segment: {len(cells)} jobs dispatched, {len(failures)} tile failures")


def stage_vectorize(cfg: RunConfig) -> None:
    """Turn per-tile masks into per-tile polygon fragments (world space)."""
    for date, variant, size, checkpoint in cfg.grid_cells():
        cell_dir = cfg.cell_dir(date, variant, size, checkpoint)
        job_dir = cell_dir / "job"
        done = json.loads((job_dir / "done.json").read_text())
        grid = TileGrid.from_dict(
            json.loads((cfg.out_dir / date / variant / str(size) / "grid.json").read_text())
        )
        fragments = []
        from PIL import Image

        for entry in done["results"]:
            if entry.get("status") != "ok":
                continue
            tile_id = entry["tile_id"]
            tx, ty = (int(v) for v in tile_id.lstrip("t").split("_"))
            labels = np.asarray(Image.open(job_dir / entry["mask"]), dtype=np.int64)
            labels = clip_mask_to_validity(labels, grid.validity(tx, ty))
            prov = Provenance(checkpoint, size, date, variant, (tx, ty))
            polys = vectorize_mask(
                labels,
                grid.tile_transform(tx, ty),
                min_area=0.0,
                id_prefix=f"{tile_id}_p",
                provenance=prov,
            )
            fragments.extend(polys)
        key = ConfigKey(checkpoint, size, date, variant)
        write_layer(
            PredictionLayer(fragments, level=1, key=key),
            cell_dir / "tile_fragments.geojson",
        )
    log(cfg, "vectorize: fragments written")


def stage_merge(cfg: RunConfig) -> None:
    """Merge fragments across tile borders into level-1 scene layers."""
    min_area = cfg.min_area_px  # in pixels; converted per scene below
    for date, variant, size, checkpoint in cfg.grid_cells():
        cell_dir = cfg.cell_dir(date, variant, size, checkpoint)
        fragments = read_layer(cell_dir / "tile_fragments.geojson")
        grid = TileGrid.from_dict(
            json.loads((cfg.out_dir / date / variant / str(size) / "grid.json").read_text())
        )
        per_tile: dict[tuple[int, int], list] = {}
        for poly in fragments.polygons:
            per_tile.setdefault(tuple(poly.provenance.tile_index), []).append(poly)
        key = ConfigKey(checkpoint, size, date, variant)
        merged = merge_adjacent(per_tile, grid, cfg.merge_threshold, key)
        # relative slack keeps exactly-at-the-floor fields (float shoelace)
        floor = min_area * grid.transform.pixel_size**2 * (1.0 - 1e-9)
        kept = [p for p in merged.polygons if p.area >= floor]
        write_layer(
            PredictionLayer(kept, level=1, key=key), cell_layer_path(cfg, key)
        )
    log(cfg, "merge-tiles: level-1 layers written")


def stage_fuse(cfg: RunConfig) -> None:
    """Levels 2-4 plus the variant-combined layer, by pooling."""
    level1 = []
    for date, variant, size, checkpoint in cfg.grid_cells():
        key = ConfigKey(checkpoint, size, date, variant)
        level1.append(read_layer(cell_layer_path(cfg, key)))
    fused = fuse_all_levels(level1)
    for level, layers in fused.items():
        if level == 1:
            continue
        for layer in layers:
            write_layer(layer, cell_layer_path(cfg, layer.key))
    counts = {str(lvl): len(layers) for lvl, layers in fused.items()}
    log(cfg, f"fuse: layer counts {counts}")


def _discover_layers(cfg: RunConfig) -> list[PredictionLayer]:
    paths = sorted(cfg.out_dir.glob("*/*/*/*/layer.geojson"))
    return [read_layer(p) for p in paths]


def stage_evaluate(cfg: RunConfig) -> list[MetricsReport]:
    gt = read_layer(gt_path(cfg))
    layers = _discover_layers(cfg)
    if not layers:
        raise PipelineError("no layers found; run the grid first")
    reports = level_report(
        layers, gt, cfg.out_dir / "reports", cfg.bbox_threshold, cfg.denominator
    )
    log(cfg, f"evaluate: {len(reports)} layers scored")
    return reports


def stage_report(cfg: RunConfig) -> None:
    """Re-render CSV/SVG views from the computed reports."""
    path = cfg.out_dir / "reports" / "reports.json"
    if not path.exists():
        raise PipelineError("reports.json missing; run evaluate first")
    docs = json.loads(path.read_text())
    reports = [MetricsReport(**d) for d in docs]
    write_csv(reports, cfg.out_dir / "reports" / "metrics.csv")
    levels = sorted({r.level for r in reports}, key=str)
    for level in levels:
        write_level_svg(
            [r for r in reports if r.level == level],
            cfg.out_dir / "reports" / f"level_{level}.svg",
        )
    log(cfg, "report: views rendered")


def run_all(cfg: RunConfig) -> list[MetricsReport]:
    if cfg.fieldscape is not None:
        stage_synth(cfg)
    stage_preprocess(cfg)
    stage_tile(cfg)
    stage_segment(cfg)
    stage_vectorize(cfg)
    stage_merge(cfg)
    stage_fuse(cfg)
    return stage_evaluate(cfg)
