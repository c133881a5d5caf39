"""Command-line pipeline orchestration.

All subcommands are driven by one JSON run configuration (see README for the
schema); a few common fields can be overridden with flags. Exit codes:
0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import sys

import click

from . import pipeline
from .config import ConfigError, RunConfig


def _load(config_path, out):
    try:
        return RunConfig.load(config_path, out)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)


def _run(stage, cfg):
    try:
        return stage(cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    except Exception as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(2)


def _config_options(fn):
    fn = click.option("--out", default=None, help="override the output directory")(fn)
    fn = click.argument("config_path", type=click.Path(exists=True, dir_okay=False))(fn)
    return fn


@click.group()
def main():
    """Field-boundary delineation pipeline."""


def _stage_command(name, stage, help_text):
    @main.command(name=name, help=help_text)
    @_config_options
    def cmd(config_path, out):
        cfg = _load(config_path, out)
        _run(stage, cfg)

    return cmd


_stage_command("synth", pipeline.stage_synth, "Generate the synthetic fieldscape (ground truth + per-date rasters).")
_stage_command("preprocess", pipeline.stage_preprocess, "Normalize, pansharpen, optionally warp, composite, and enhance.")
_stage_command("tile", pipeline.stage_tile, "Record tile grids for every date/variant/size.")
_stage_command("segment", pipeline.stage_segment, "Dispatch one segmentation job per grid cell.")
_stage_command("vectorize", pipeline.stage_vectorize, "Convert per-tile masks into polygon fragments.")
_stage_command("merge-tiles", pipeline.stage_merge, "Merge fragments across tile borders into level-1 layers.")
_stage_command("fuse", pipeline.stage_fuse, "Combine layers across checkpoints, sizes, dates and variants.")
_stage_command("report", pipeline.stage_report, "Re-render CSV/SVG views from computed reports.")


@main.command(help="Match layers against ground truth and write all reports.")
@_config_options
def evaluate(config_path, out):
    cfg = _load(config_path, out)
    reports = _run(pipeline.stage_evaluate, cfg)
    for r in reports:
        iou = "-" if r.mean_iou is None else f"{r.mean_iou:.3f}"
        click.echo(f"level {r.level} {r.label()}: detection {r.detection_pct:.2f}% iou {iou}")


@main.command(name="run-all", help="Run the whole pipeline end to end.")
@_config_options
def run_all(config_path, out):
    cfg = _load(config_path, out)
    reports = _run(pipeline.run_all, cfg)
    for r in reports:
        iou = "-" if r.mean_iou is None else f"{r.mean_iou:.3f}"
        click.echo(f"level {r.level} {r.label()}: detection {r.detection_pct:.2f}% iou {iou}")


if __name__ == "__main__":
    main()
