"""Prediction layers: sets of field polygons tagged with a fusion level and
configuration key, exchanged as GeoJSON FeatureCollections.

The layer-wide level/config keys live in a top-level `properties` block;
per-polygon provenance travels as feature properties.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import FieldPolygon, Provenance

FINAL_LEVEL = "variant-combined"


class LayerError(ValueError):
    """Raised for duplicate polygon ids or malformed layer files."""


@dataclass(frozen=True)
class ConfigKey:
    """Which (checkpoint, size, date, variant) cell a layer belongs to.

    None in a field means the layer was combined over that dimension.
    """

    checkpoint: str | None = None
    tile_size: int | None = None
    date_id: str | None = None
    variant: str | None = None

    def level(self) -> int | str:
        """Fusion level implied by which dimensions are still resolved."""
        if self.variant is None:
            return FINAL_LEVEL
        if self.date_id is None:
            return 4
        if self.tile_size is None:
            return 3
        if self.checkpoint is None:
            return 2
        return 1

    def path_parts(self) -> tuple[str, ...]:
        def part(v):
            return "combined" if v is None else str(v)

        return (part(self.date_id), part(self.variant), part(self.tile_size), part(self.checkpoint))

    def label(self) -> str:
        return "/".join(self.path_parts())

    def to_dict(self) -> dict:
        return {
            "checkpoint": self.checkpoint,
            "tile_size": self.tile_size,
            "date_id": self.date_id,
            "variant": self.variant,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConfigKey":
        return cls(
            d.get("checkpoint"), d.get("tile_size"), d.get("date_id"), d.get("variant")
        )


@dataclass
class PredictionLayer:
    polygons: list[FieldPolygon]
    level: int | str = 1
    key: ConfigKey = ConfigKey()

    def __post_init__(self):
        ids = [p.id for p in self.polygons]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})[:5]
            raise LayerError(f"duplicate polygon ids in layer: {dupes}")

    def __len__(self):
        return len(self.polygons)

    def by_id(self) -> dict[str, FieldPolygon]:
        return {p.id: p for p in self.polygons}


# ---------------------------------------------------------------------------
# GeoJSON
# ---------------------------------------------------------------------------


def _ring_coords(ring: np.ndarray) -> list[list[float]]:
    pts = [[float(x), float(y)] for x, y in ring]
    pts.append(pts[0])  # GeoJSON rings are explicitly closed
    return pts


def polygon_to_feature(p: FieldPolygon) -> dict:
    prov = p.provenance
    tile_index = prov.tile_index
    if isinstance(tile_index, tuple):
        tile_index = list(tile_index)
    return {
        "type": "Feature",
        "geometry": {
            "type": "Polygon",
            "coordinates": [_ring_coords(p.exterior)] + [_ring_coords(h) for h in p.holes],
        },
        "properties": {
            "id": p.id,
            "checkpoint": prov.checkpoint,
            "tile_size": prov.tile_size,
            "date_id": prov.date_id,
            "variant": prov.variant,
            "tile_index": tile_index,
        },
    }


def feature_to_polygon(feat: dict) -> FieldPolygon:
    geom = feat.get("geometry") or {}
    if geom.get("type") != "Polygon":
        raise LayerError(f"unsupported geometry type {geom.get('type')!r}")
    rings = geom["coordinates"]
    props = feat.get("properties") or {}
    tile_index = props.get("tile_index")
    if isinstance(tile_index, list):
        tile_index = tuple(tile_index)
    prov = Provenance(
        checkpoint=props.get("checkpoint"),
        tile_size=props.get("tile_size"),
        date_id=props.get("date_id"),
        variant=props.get("variant"),
        tile_index=tile_index,
    )
    return FieldPolygon(str(props.get("id")), rings[0], rings[1:], prov)


def layer_to_geojson(layer: PredictionLayer, extra_properties: dict | None = None) -> dict:
    props = {"level": layer.level, **layer.key.to_dict()}
    if extra_properties:
        props.update(extra_properties)
    return {
        "type": "FeatureCollection",
        "properties": props,
        "features": [polygon_to_feature(p) for p in sorted(layer.polygons, key=lambda p: p.id)],
    }


def geojson_to_layer(doc: dict) -> PredictionLayer:
    props = doc.get("properties") or {}
    return PredictionLayer(
        [feature_to_polygon(f) for f in doc.get("features", [])],
        level=props.get("level", 1),
        key=ConfigKey.from_dict(props),
    )


def write_layer(
    layer: PredictionLayer, path: str | Path, extra_properties: dict | None = None
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(layer_to_geojson(layer, extra_properties), separators=(",", ":")))
    return path


def read_layer(path: str | Path) -> PredictionLayer:
    return geojson_to_layer(json.loads(Path(path).read_text()))


def read_layer_properties(path: str | Path) -> dict:
    return json.loads(Path(path).read_text()).get("properties") or {}
