"""Multi-level report generation: per-layer metrics, CSV summary, grouped-bar
SVG charts, and a JSON audit dump of every ground-truth/prediction match.

All outputs are byte-identical across runs for the same inputs: layers are
sorted by key, floats use fixed formatting, and no timestamps appear.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .layers import FINAL_LEVEL, PredictionLayer
from .metrics import (
    MatchResult,
    MetricsError,
    area_histogram,
    delineation_accuracy,
    detection_accuracy,
    match_detections,
    mean_precision_recall_f1,
)

DEFAULT_BIN_EDGES_HA = [0.0, 0.01, 0.025, 0.05, 0.1, 0.2, 0.4, 0.6, 1.0, 2.0, 5.0]

_LEVEL_ORDER = {1: 1, 2: 2, 3: 3, 4: 4, FINAL_LEVEL: 5}


@dataclass
class MetricsReport:
    level: int | str
    checkpoint: str | None
    tile_size: int | None
    date_id: str | None
    variant: str | None
    detection_pct: float
    mean_iou: float | None
    mean_precision: float | None
    mean_recall: float | None
    mean_f1: float | None
    n_gt: int
    n_matched: int
    n_pred: int
    hist_edges_ha: list[float]
    hist_counts: list[int]

    def label(self) -> str:
        def part(v):
            return "combined" if v is None else str(v)

        return "/".join(
            [part(self.date_id), part(self.variant), part(self.tile_size), part(self.checkpoint)]
        )

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "checkpoint": self.checkpoint,
            "tile_size": self.tile_size,
            "date_id": self.date_id,
            "variant": self.variant,
            "detection_pct": self.detection_pct,
            "mean_iou": self.mean_iou,
            "mean_precision": self.mean_precision,
            "mean_recall": self.mean_recall,
            "mean_f1": self.mean_f1,
            "n_gt": self.n_gt,
            "n_matched": self.n_matched,
            "n_pred": self.n_pred,
            "hist_edges_ha": self.hist_edges_ha,
            "hist_counts": self.hist_counts,
        }


def evaluate_layer(
    layer: PredictionLayer,
    gt: PredictionLayer,
    threshold: float = 0.5,
    denominator: str = "gt",
    bin_edges_ha: list[float] | None = None,
) -> tuple[MetricsReport, list[MatchResult]]:
    matches = match_detections(layer, gt, threshold)
    mean_p, mean_r, mean_f1 = mean_precision_recall_f1(matches)
    edges, counts = area_histogram(layer, bin_edges_ha or DEFAULT_BIN_EDGES_HA)
    report = MetricsReport(
        level=layer.level,
        checkpoint=layer.key.checkpoint,
        tile_size=layer.key.tile_size,
        date_id=layer.key.date_id,
        variant=layer.key.variant,
        detection_pct=detection_accuracy(matches, gt, denominator, layer),
        mean_iou=delineation_accuracy(matches),
        mean_precision=mean_p,
        mean_recall=mean_r,
        mean_f1=mean_f1,
        n_gt=len(gt.polygons),
        n_matched=len(matches),
        n_pred=len(layer.polygons),
        hist_edges_ha=[float(e) for e in edges],
        hist_counts=[int(c) for c in counts],
    )
    return report, matches


def _sort_key(report: MetricsReport):
    return (
        _LEVEL_ORDER.get(report.level, 9),
        report.date_id or "~",
        report.variant or "~",
        str(report.tile_size or "~"),
        report.checkpoint or "~",
    )


def level_report(
    layers: list[PredictionLayer],
    gt: PredictionLayer,
    out_dir: str | Path,
    threshold: float = 0.5,
    denominator: str = "gt",
    bin_edges_ha: list[float] | None = None,
) -> list[MetricsReport]:
    """One MetricsReport per layer, plus CSV, per-level SVG charts, and the
    JSON match dump, all under `out_dir`."""
    if not gt.polygons:
        raise MetricsError("level report needs a non-empty ground-truth layer")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports: list[MetricsReport] = []
    all_matches: dict[str, list[MatchResult]] = {}
    for layer in layers:
        report, matches = evaluate_layer(layer, gt, threshold, denominator, bin_edges_ha)
        reports.append(report)
        all_matches[f"{report.level}:{report.label()}"] = matches
    reports.sort(key=_sort_key)

    write_csv(reports, out_dir / "metrics.csv")
    dump = {
        key: [m.to_dict() for m in matches] for key, matches in sorted(all_matches.items())
    }
    (out_dir / "matches.json").write_text(json.dumps(dump, indent=1, sort_keys=True))
    for level in sorted({r.level for r in reports}, key=lambda l: _LEVEL_ORDER.get(l, 9)):
        group = [r for r in reports if r.level == level]
        write_level_svg(group, out_dir / f"level_{level}.svg")
    (out_dir / "reports.json").write_text(
        json.dumps([r.to_dict() for r in reports], indent=1, sort_keys=True)
    )
    return reports


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"


def write_csv(reports: list[MetricsReport], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "level",
                "checkpoint",
                "size",
                "date",
                "variant",
                "detection_pct",
                "mean_iou",
                "precision",
                "recall",
                "f1",
            ]
        )
        for r in sorted(reports, key=_sort_key):
            writer.writerow(
                [
                    r.level,
                    r.checkpoint if r.checkpoint is not None else "combined",
                    r.tile_size if r.tile_size is not None else "combined",
                    r.date_id if r.date_id is not None else "combined",
                    r.variant if r.variant is not None else "combined",
                    _fmt(r.detection_pct),
                    _fmt(r.mean_iou),
                    _fmt(r.mean_precision),
                    _fmt(r.mean_recall),
                    _fmt(r.mean_f1),
                ]
            )
    return path


def write_level_svg(reports: list[MetricsReport], path: str | Path) -> Path:
    """Grouped detection-accuracy bars (grouped by date), mean IoU on top."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    reports = sorted(reports, key=_sort_key)
    groups: dict[str, list[MetricsReport]] = {}
    for r in reports:
        groups.setdefault(r.date_id or "combined", []).append(r)

    bar_w, gap, group_gap, h, margin = 34, 6, 28, 240, 44
    n_bars = len(reports)
    width = 2 * margin + n_bars * (bar_w + gap) + (len(groups) - 1) * group_gap
    palette = ["#4C78A8", "#F58518", "#54A24B", "#E45756", "#72B7B2", "#B279A2"]
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{h + 2 * margin}" '
        f'font-family="sans-serif" font-size="10">',
        f'<line x1="{margin}" y1="{margin + h}" x2="{width - margin}" y2="{margin + h}" stroke="#333"/>',
    ]
    for frac in (0, 25, 50, 75, 100):
        y = margin + h - h * frac / 100.0
        lines.append(
            f'<text x="{margin - 6}" y="{y + 3:.1f}" text-anchor="end" fill="#666">{frac}</text>'
        )
        lines.append(
            f'<line x1="{margin}" y1="{y:.1f}" x2="{width - margin}" y2="{y:.1f}" '
            f'stroke="#ddd" stroke-width="0.5"/>'
        )
    x = float(margin)
    for gi, (date, group) in enumerate(sorted(groups.items())):
        group_x0 = x
        for bi, r in enumerate(group):
            bh = h * r.detection_pct / 100.0
            y0 = margin + h - bh
            color = palette[bi % len(palette)]
            label = str(r.checkpoint or r.tile_size or r.variant or "all")
            lines.append(
                f'<rect x="{x:.1f}" y="{y0:.1f}" width="{bar_w}" height="{bh:.1f}" fill="{color}"/>'
            )
            iou = "" if r.mean_iou is None else f"{r.mean_iou:.2f}"
            lines.append(
                f'<text x="{x + bar_w / 2:.1f}" y="{y0 - 3:.1f}" text-anchor="middle">{iou}</text>'
            )
            lines.append(
                f'<text x="{x + bar_w / 2:.1f}" y="{margin + h + 12}" text-anchor="middle" '
                f'fill="#444">{label}</text>'
            )
            x += bar_w + gap
        lines.append(
            f'<text x="{(group_x0 + x - gap) / 2:.1f}" y="{margin + h + 26}" '
            f'text-anchor="middle" font-weight="bold">{date}</text>'
        )
        x += group_gap
    lines.append("</svg>")
    path.write_text("\n".join(lines))
    return path
