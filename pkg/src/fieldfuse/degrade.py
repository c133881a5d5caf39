"""Degradable mock segmenter: the desk-scale stand-in for a real model.

Detection of each field by each configuration is a thresholded uniform draw,
so the whole grid is reproducible and analytically predictable:

* a per-(field, date) "window" draw succeeds with probability
  ``date_response[date]`` and is shared by every checkpoint/size/variant at
  that date (fields have good and bad dates, which is what makes combining
  dates so effective);
* given the window, each configuration independently detects the field with
  probability ``(1 - dropout_rate) * size_response[size]``, clamped to [0, 1].

With ``date_response`` at 1 the model reduces to fully independent
per-configuration detection, where pooling k configurations detects a field
with probability 1 - (1 - p)^k.

Draw streams are keyed by (seed, purpose, config) and indexed by the field's
position in the sorted ground-truth id list, so every tile, process and
in-process caller sees identical decisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from .layers import PredictionLayer
from .raster import Tile, as_transform
from .synth import stream
from .vectorize import rasterize_polygon


@dataclass(frozen=True)
class MockConfig:
    """One cell of the prediction grid, as the mock segmenter sees it."""

    checkpoint: str
    size: int
    date_id: str
    variant: str

    def parts(self) -> tuple:
        return (self.checkpoint, int(self.size), self.date_id, self.variant)


@dataclass(frozen=True)
class DegradationSpec:
    dropout_rate: float = 0.0
    boundary_jitter_sigma: float = 0.0  # pixels
    aggregation_rate: float = 0.0  # per adjacent surviving pair, per config
    size_response: dict = dc_field(default_factory=dict)  # size -> multiplier
    date_response: dict = dc_field(default_factory=dict)  # date -> window prob
    seed: int = 0

    def __post_init__(self):
        for name, rate in (
            ("dropout_rate", self.dropout_rate),
            ("aggregation_rate", self.aggregation_rate),
        ):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {rate}")
        for size, mult in self.size_response.items():
            if mult <= 0:
                raise ValueError(f"size_response[{size}] must be positive")

    def config_rate(self, config: MockConfig) -> float:
        rate = (1.0 - self.dropout_rate) * self.size_response.get(int(config.size), 1.0)
        return min(1.0, max(0.0, rate))

    def window_rate(self, date_id: str) -> float:
        return min(1.0, max(0.0, self.date_response.get(date_id, 1.0)))

    def to_dict(self) -> dict:
        return {
            "dropout_rate": self.dropout_rate,
            "boundary_jitter_sigma": self.boundary_jitter_sigma,
            "aggregation_rate": self.aggregation_rate,
            "size_response": {str(k): v for k, v in self.size_response.items()},
            "date_response": dict(self.date_response),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationSpec":
        d = dict(d)
        if "size_response" in d:
            d["size_response"] = {int(k): v for k, v in d["size_response"].items()}
        return cls(**d)


def survival_mask(n_fields: int, deg: DegradationSpec, config: MockConfig) -> np.ndarray:
    """Boolean detection vector over the sorted ground-truth field list."""
    window_u = stream(deg.seed, "window", config.date_id).random(n_fields)
    config_u = stream(deg.seed, "config", *config.parts()).random(n_fields)
    return (window_u < deg.window_rate(config.date_id)) & (
        config_u < deg.config_rate(config)
    )


def analytic_detection(
    deg: DegradationSpec, configs: list[MockConfig] | list[tuple]
) -> float:
    """Closed-form detection probability for a pooled set of configurations.

    P = 1 - prod over dates t of [1 - r_t * (1 - prod over configs at t of
    (1 - b_c))], with r the window rates and b the per-config rates. With all
    windows at 1 and uniform b = p this is 1 - (1 - p)^k.
    """
    cfgs = [c if isinstance(c, MockConfig) else MockConfig(*c) for c in configs]
    by_date: dict[str, list[MockConfig]] = {}
    for c in cfgs:
        by_date.setdefault(c.date_id, []).append(c)
    p_miss = 1.0
    for date_id, group in by_date.items():
        inside = 1.0
        for c in group:
            inside *= 1.0 - deg.config_rate(c)
        p_miss *= 1.0 - deg.window_rate(date_id) * (1.0 - inside)
    return 1.0 - p_miss


def staircase_preset(seed: int = 0) -> DegradationSpec:
    """Degradation calibrated to the reported level-wise detection ladder.

    Window and per-config rates solve the closed forms of
    `analytic_detection` for best-single-cell 18%, sizes-combined 26%,
    dates-combined 50% and variants-combined 58% on the full
    3 checkpoints x 4 sizes x 4 dates x 2 variants grid, with the mid tile
    sizes strongest and one date (T4) clearly best.
    """
    b512, b768, b_edge = 0.227898, 0.168510, 0.03
    r_best, r_other = 0.333507, 0.157133
    return DegradationSpec(
        dropout_rate=1.0 - b512,
        size_response={
            256: b_edge / b512,
            512: 1.0,
            768: b768 / b512,
            1024: b_edge / b512,
        },
        date_response={"T1": r_other, "T2": r_other, "T3": r_other, "T4": r_best},
        seed=seed,
    )


def _union_find_groups(ids: list[str], pairs: list[tuple[str, str]]) -> list[list[str]]:
    parent = {i: i for i in ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    idset = set(ids)
    for a, b in pairs:
        if a in idset and b in idset:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[str, list[str]] = {}
    for i in ids:
        groups.setdefault(find(i), []).append(i)
    return [sorted(groups[r]) for r in sorted(groups)]


def mock_segment(
    tile: Tile,
    gt: PredictionLayer,
    deg: DegradationSpec,
    config: MockConfig,
    adjacency: list[tuple[str, str]] = (),
    bund_px: int = 2,
) -> np.ndarray:
    """Label raster (uint16) for one tile: degraded rasterization of the truth.

    Surviving fields are rasterized exactly; aggregated groups are fused into
    one connected label (the gap between them closed); boundary jitter moves
    mask edges by a smoothed Gaussian displacement field. Overlaps created by
    jitter are flattened smaller-wins, matching the adapter protocol.
    """
    transform = as_transform(tile.transform)
    shape = (tile.size, tile.size)
    fields = sorted(gt.polygons, key=lambda p: p.id)
    alive = survival_mask(len(fields), deg, config)

    x0, y1 = transform.pixel_to_world(0, 0)
    x1, y0 = transform.pixel_to_world(tile.size, tile.size)
    survivors = [
        f
        for f, a in zip(fields, alive)
        if a
        and f.bbox[0] < x1
        and f.bbox[2] > x0
        and f.bbox[1] < y1
        and f.bbox[3] > y0
    ]
    if not survivors:
        return np.zeros(shape, dtype=np.uint16)

    if deg.aggregation_rate > 0 and adjacency:
        agg_u = stream(deg.seed, "agg", *config.parts()).random(len(adjacency))
        # decisions are positional over the full sorted pair list, so every
        # tile of a config fuses the same pairs
        chosen = [
            pair
            for pair, u in zip(sorted(adjacency), agg_u)
            if u < deg.aggregation_rate
        ]
        groups = _union_find_groups([f.id for f in survivors], chosen)
    else:
        groups = [[f.id] for f in survivors]

    by_id = {f.id: f for f in survivors}
    masks = []
    for group in groups:
        mask = np.zeros(shape, dtype=bool)
        for fid in group:
            mask |= rasterize_polygon(by_id[fid], transform, shape)
        if len(group) > 1:
            mask = _close_gaps(mask, max(1, bund_px))
        if mask.any():
            masks.append(mask)

    if deg.boundary_jitter_sigma > 0:
        rng = stream(deg.seed, "jitter", *config.parts(), tile.index[0], tile.index[1])
        masks = [m for m in (_jitter(m, deg.boundary_jitter_sigma, rng) for m in masks) if m.any()]

    # paint large to small so smaller masks overwrite (protocol's flattening rule)
    masks.sort(key=lambda m: -int(m.sum()))
    label = np.zeros(shape, dtype=np.uint16)
    for i, mask in enumerate(masks, start=1):
        label[mask] = i
    return _relabel_dense(label)


def _close_gaps(mask: np.ndarray, iterations: int) -> np.ndarray:
    pad = iterations + 1
    padded = np.pad(mask, pad)
    closed = ndimage.binary_erosion(
        ndimage.binary_dilation(padded, iterations=iterations), iterations=iterations
    )
    return closed[pad:-pad, pad:-pad]


def _jitter(mask: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    signed = ndimage.distance_transform_edt(mask) - ndimage.distance_transform_edt(~mask)
    noise = ndimage.gaussian_filter(rng.normal(size=mask.shape), 3.0)
    std = noise.std()
    if std > 0:
        noise *= sigma / std
    return (signed + noise) > 0


def _relabel_dense(label: np.ndarray) -> np.ndarray:
    """Remap labels to exactly {1..N} preserving order of first appearance by value."""
    values = np.unique(label)
    values = values[values != 0]
    if len(values) == 0:
        return label
    lut = np.zeros(int(values.max()) + 1, dtype=np.uint16)
    lut[values] = np.arange(1, len(values) + 1, dtype=np.uint16)
    return lut[label]
