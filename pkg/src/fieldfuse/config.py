"""Run configuration: one JSON document drives the whole experiment grid."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .degrade import DegradationSpec
from .protocol import CHECKPOINTS
from .synth import FieldscapeSpec
from .tiling import ALLOWED_TILE_SIZES

VARIANTS = ("original", "edge_enhanced")

DEFAULT_ADAPTER = ["python3", "-m", "fieldfuse.mock_adapter"]


class ConfigError(ValueError):
    """Raised for invalid run configurations (CLI exit code 1)."""


@dataclass
class PreprocessParams:
    p_low: float = 2.0
    p_high: float = 98.0
    radius: int = 11
    sigma: float = 10.0
    wf: float = 2.0

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessParams":
        return cls(**d)


@dataclass
class RunConfig:
    out_dir: Path
    seed: int = 42
    fieldscape: FieldscapeSpec | None = None
    scenes: dict[str, dict[str, str]] = field(default_factory=dict)  # date -> paths
    dates: list[str] = field(default_factory=list)
    variants: list[str] = field(default_factory=lambda: ["original"])
    tile_sizes: list[int] = field(default_factory=lambda: [512])
    checkpoints: list[str] = field(default_factory=lambda: ["mock"])
    adapter: list[str] = field(default_factory=lambda: list(DEFAULT_ADAPTER))
    degradation: DegradationSpec = field(default_factory=DegradationSpec)
    preprocess: PreprocessParams = field(default_factory=PreprocessParams)
    tie_points: dict[str, list] = field(default_factory=dict)  # date -> [src, dst]
    bbox_threshold: float = 0.5
    denominator: str = "gt"
    merge_threshold: float = 0.85
    min_area_px: float = 25.0
    workers: int = 4
    adapter_timeout_s: float = 600.0

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.fieldscape is None and not self.scenes:
            raise ConfigError("config needs either a fieldscape block or scene rasters")
        if not self.dates:
            self.dates = (
                self.fieldscape.date_ids if self.fieldscape else sorted(self.scenes)
            )
        for req, what in (
            (self.dates, "dates"),
            (self.variants, "variants"),
            (self.tile_sizes, "tile sizes"),
            (self.checkpoints, "checkpoints"),
        ):
            if not req:
                raise ConfigError(f"config needs at least one of: {what}")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r} (choose from {VARIANTS})")
        for s in self.tile_sizes:
            if s not in ALLOWED_TILE_SIZES:
                raise ConfigError(f"tile size {s} not in {ALLOWED_TILE_SIZES}")
        for c in self.checkpoints:
            if c not in CHECKPOINTS:
                raise ConfigError(f"unknown checkpoint {c!r} (choose from {CHECKPOINTS})")
        if self.denominator not in ("gt", "pred"):
            raise ConfigError("matching denominator must be 'gt' or 'pred'")

    def grid_cells(self) -> list[tuple[str, str, int, str]]:
        """(date, variant, size, checkpoint) cells in deterministic order."""
        return [
            (d, v, s, c)
            for d in self.dates
            for v in self.variants
            for s in self.tile_sizes
            for c in self.checkpoints
        ]

    def cell_dir(self, date: str, variant: str, size: int, checkpoint: str) -> Path:
        return self.out_dir / date / variant / str(size) / checkpoint

    @classmethod
    def from_dict(cls, doc: dict, out_dir: str | None = None) -> "RunConfig":
        doc = dict(doc)
        if out_dir:
            doc["out_dir"] = out_dir
        if "out_dir" not in doc:
            raise ConfigError("config needs an out_dir (or pass --out)")
        if "fieldscape" in doc and doc["fieldscape"] is not None:
            fs = dict(doc["fieldscape"])
            fs.setdefault("seed", doc.get("seed", 42))
            doc["fieldscape"] = FieldscapeSpec.from_dict(fs)
        if "degradation" in doc:
            deg = dict(doc["degradation"])
            deg.setdefault("seed", doc.get("seed", 42))
            doc["degradation"] = DegradationSpec.from_dict(deg)
        else:
            doc["degradation"] = DegradationSpec(seed=doc.get("seed", 42))
        if "preprocess" in doc:
            doc["preprocess"] = PreprocessParams.from_dict(doc["preprocess"])
        matching = doc.pop("matching", None)
        if matching:
            doc.setdefault("bbox_threshold", matching.get("bbox_threshold", 0.5))
            doc.setdefault("denominator", matching.get("denominator", "gt"))
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"bad config field: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path, out_dir: str | None = None) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc, out_dir)
