"""Synthetic smallholder fieldscape generator.

A seeded point process drives a pixel-space Voronoi partition (each pixel
belongs to the cell of its nearest seed point); cell interiors become fields
and the ownership boundaries become dark bund lines. Ground-truth polygons
are the pixel-exact field shapes, so a degradation-free mock segmenter can
reproduce them bit for bit. Per date, fields take reflectance from a crop
growth profile (bright pre-sowing soil to dense canopy to senescence) and the
scene is rendered twice: coarse multispectral bands plus a fine panchromatic
band, so the preprocessing chain has real work to do.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .geometry import Provenance
from .layers import ConfigKey, PredictionLayer
from .preprocess import pansharpen, percentile_normalize, round_half_up
from .raster import ByteComposite, GeoTransform, RasterGrid
from .vectorize import vectorize_mask


class SynthError(ValueError):
    """Raised for fieldscape specs that cannot be realized."""


def stream(*parts) -> np.random.Generator:
    """Deterministic generator keyed by a mixed tuple of ints and strings."""
    entropy = [
        zlib.crc32(p.encode()) if isinstance(p, str) else int(p) & 0xFFFFFFFF
        for p in parts
    ]
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class FieldscapeSpec:
    seed: int = 42
    extent: tuple[float, float] = (1000.0, 1000.0)  # meters (width, height)
    pixel_size: float = 0.8
    median_ha: float = 0.05
    sigma: float = 0.5  # log-normal shape of the target field-size distribution
    n_dates: int = 4
    bund_px: int = 2  # 0 disables bunds (full Voronoi partition)
    noise_sigma: float = 0.01  # reflectance units
    coarse_factor: float = 2.5  # multispectral pixel = this many pan pixels
    min_field_px: int = 25  # suppress sliver fields below the vectorizer floor

    def __post_init__(self):
        if self.median_ha <= 0:
            raise SynthError("median_ha must be positive")
        w, h = self.dims
        if abs(self.extent[0] / self.pixel_size - w) > 1e-9 or abs(
            self.extent[1] / self.pixel_size - h
        ) > 1e-9:
            raise SynthError("extent must be an integer number of pixels")
        if abs(w / self.coarse_factor - round(w / self.coarse_factor)) > 1e-9 or abs(
            h / self.coarse_factor - round(h / self.coarse_factor)
        ) > 1e-9:
            raise SynthError("extent must divide evenly into coarse pixels")

    @property
    def dims(self) -> tuple[int, int]:
        return (
            int(round(self.extent[0] / self.pixel_size)),
            int(round(self.extent[1] / self.pixel_size)),
        )

    @property
    def n_fields(self) -> int:
        mean_area_ha = self.median_ha * float(np.exp(self.sigma**2 / 2.0))
        total_ha = self.extent[0] * self.extent[1] / 10_000.0
        return int(round(total_ha / mean_area_ha))

    @property
    def date_ids(self) -> list[str]:
        return [f"T{i + 1}" for i in range(self.n_dates)]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "extent": list(self.extent),
            "pixel_size": self.pixel_size,
            "median_ha": self.median_ha,
            "sigma": self.sigma,
            "n_dates": self.n_dates,
            "bund_px": self.bund_px,
            "noise_sigma": self.noise_sigma,
            "coarse_factor": self.coarse_factor,
            "min_field_px": self.min_field_px,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FieldscapeSpec":
        d = dict(d)
        if "extent" in d:
            d["extent"] = tuple(d["extent"])
        return cls(**d)


@dataclass
class Fieldscape:
    spec: FieldscapeSpec
    transform: GeoTransform  # fine grid
    gt: PredictionLayer
    label_raster: np.ndarray  # int32, 0 = bund/background
    adjacency: list[tuple[str, str]]  # gt ids of fields sharing a bund
    rasters: dict[str, dict[str, RasterGrid]]  # date -> {"ms", "pan"}
    composites: dict[str, ByteComposite]  # date -> original-variant composite


# anchor reflectance (blue, green, nir) along the growth cycle:
# pre-sowing bright soil, early sparse cover, dense mid-season canopy,
# senescing mature crop
_STAGES = np.array(
    [
        [0.28, 0.32, 0.38],
        [0.20, 0.27, 0.46],
        [0.08, 0.17, 0.62],
        [0.22, 0.28, 0.36],
    ]
)
_BUND_REFLECTANCE = np.array([0.10, 0.11, 0.13])


def _stage_profile(n_dates: int) -> np.ndarray:
    """(n_dates, 3) band means, interpolated along the growth cycle."""
    if n_dates == 1:
        return _STAGES[1:2]
    pos = np.linspace(0, len(_STAGES) - 1, n_dates)
    out = np.empty((n_dates, 3))
    for b in range(3):
        out[:, b] = np.interp(pos, np.arange(len(_STAGES)), _STAGES[:, b])
    return out


def generate_fieldscape(spec: FieldscapeSpec) -> Fieldscape:
    """Deterministically realize a fieldscape from its spec."""
    n = spec.n_fields
    if n < 2:
        raise SynthError(f"extent too small: target of {n} fields (need >= 2)")
    w, h = spec.dims
    transform = GeoTransform(0.0, spec.extent[1], spec.pixel_size)

    rng_pts = stream(spec.seed, "points")
    points = rng_pts.uniform((0.0, 0.0), spec.extent, size=(n, 2))

    owner_fine = _ownership(points, transform, (h, w))
    bund_fine = _bund_mask(owner_fine, spec.bund_px)
    label = _field_labels(owner_fine, bund_fine)
    if spec.min_field_px > 0:
        counts = np.bincount(label.ravel())
        small = np.nonzero(counts < spec.min_field_px)[0]
        label[np.isin(label, small[small > 0])] = 0

    gt_polys = vectorize_mask(
        label,
        transform,
        id_prefix="f",
        provenance=Provenance(checkpoint="ground-truth"),
    )
    gt = PredictionLayer(gt_polys, level=1, key=ConfigKey())
    adjacency = _field_adjacency(owner_fine, label)

    # coarse grid shares the origin; ownership is re-sampled at its centers
    cw = int(round(w / spec.coarse_factor))
    ch = int(round(h / spec.coarse_factor))
    coarse_t = GeoTransform(0.0, spec.extent[1], spec.pixel_size * spec.coarse_factor)
    owner_coarse = _ownership(points, coarse_t, (ch, cw))
    bund_coarse = _bund_mask(owner_coarse, max(1, spec.bund_px // 2) if spec.bund_px else 0)

    profile = _stage_profile(spec.n_dates)
    rasters: dict[str, dict[str, RasterGrid]] = {}
    composites: dict[str, ByteComposite] = {}
    for di, date_id in enumerate(spec.date_ids):
        gains = stream(spec.seed, "reflectance", di).lognormal(0.0, 0.12, size=(n, 3))
        refl = profile[di] * gains  # (n_fields, 3) per-owner band values

        fine_bands = _render(refl, owner_fine, bund_fine)
        pan = fine_bands.mean(axis=0)
        coarse_bands = _render(refl, owner_coarse, bund_coarse)

        noise = stream(spec.seed, "noise", di)
        for arr in (*coarse_bands, pan):
            arr += noise.normal(0.0, spec.noise_sigma, size=arr.shape)

        ms = RasterGrid.from_bands(
            {"blue": coarse_bands[0], "green": coarse_bands[1], "nir": coarse_bands[2]},
            coarse_t,
        )
        pan_grid = RasterGrid.from_bands({"pan": pan}, transform)
        rasters[date_id] = {"ms": ms, "pan": pan_grid}
        composites[date_id] = compose(ms, pan_grid, date_id=date_id)

    return Fieldscape(spec, transform, gt, label, adjacency, rasters, composites)


def compose(
    ms: RasterGrid,
    pan: RasterGrid,
    date_id: str | None = None,
    p_low: float = 2.0,
    p_high: float = 98.0,
) -> ByteComposite:
    """normalize -> pansharpen -> clamp into a false-color (NIR, G, B) composite."""
    norm = {
        name: percentile_normalize(ms.band(name), p_low, p_high).data.astype(np.float64)
        for name in ("blue", "green", "nir")
    }
    pan_norm = percentile_normalize(pan.band("pan"), p_low, p_high).data.astype(np.float64)
    sharp = pansharpen(
        norm["blue"], norm["green"], norm["nir"], pan_norm, ms.transform, pan.transform
    )
    channels = [sharp.bands["nir"], sharp.bands["green"], sharp.bands["blue"]]
    data = np.stack(
        [np.clip(round_half_up(c), 0, 255).astype(np.uint8) for c in channels], axis=-1
    )
    return ByteComposite(data, pan.transform, variant="original", date_id=date_id)


def _ownership(points: np.ndarray, transform: GeoTransform, shape) -> np.ndarray:
    h, w = shape
    cols, rows = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    xs, ys = transform.pixel_to_world(cols.ravel(), rows.ravel())
    _, owner = cKDTree(points).query(np.column_stack([xs, ys]))
    return owner.reshape(h, w).astype(np.int32)


def _bund_mask(owner: np.ndarray, bund_px: int) -> np.ndarray:
    """Pixels within the bund strip: both sides of every ownership change."""
    bund = np.zeros(owner.shape, dtype=bool)
    if bund_px <= 0:
        return bund
    dv = owner[1:, :] != owner[:-1, :]
    bund[1:, :] |= dv
    bund[:-1, :] |= dv
    dh = owner[:, 1:] != owner[:, :-1]
    bund[:, 1:] |= dh
    bund[:, :-1] |= dh
    extra = (bund_px - 1) // 2
    if extra > 0:
        bund = ndimage.binary_dilation(bund, iterations=extra)
    return bund


def _field_labels(owner: np.ndarray, bund: np.ndarray) -> np.ndarray:
    if not bund.any():
        return (owner + 1).astype(np.int32)
    cross = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    label, _ = ndimage.label(~bund, structure=cross)
    return label.astype(np.int32)


def _field_adjacency(owner: np.ndarray, label: np.ndarray) -> list[tuple[str, str]]:
    """Pairs of gt field ids whose Voronoi cells share a boundary."""
    owner_pairs = set()
    for a, b in zip(owner[1:, :].ravel(), owner[:-1, :].ravel()):
        if a != b:
            owner_pairs.add((min(a, b), max(a, b)))
    for a, b in zip(owner[:, 1:].ravel(), owner[:, :-1].ravel()):
        if a != b:
            owner_pairs.add((min(a, b), max(a, b)))
    # owner -> field ids via any pixel of each field component
    fields_of_owner: dict[int, set[str]] = {}
    for lab in np.unique(label):
        if lab == 0:
            continue
        rows, cols = np.nonzero(label == lab)
        own = int(owner[rows[0], cols[0]])
        fields_of_owner.setdefault(own, set()).add(f"f{lab:05d}")
    pairs = set()
    for a, b in owner_pairs:
        for fa in fields_of_owner.get(a, ()):
            for fb in fields_of_owner.get(b, ()):
                pairs.add((min(fa, fb), max(fa, fb)))
    return sorted(pairs)


def _render(refl: np.ndarray, owner: np.ndarray, bund: np.ndarray) -> np.ndarray:
    """(3, h, w) float reflectance bands for one date."""
    bands = refl[owner].transpose(2, 0, 1).copy()
    for b in range(3):
        bands[b][bund] = _BUND_REFLECTANCE[b]
    return bands
