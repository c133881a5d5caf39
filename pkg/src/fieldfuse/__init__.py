"""Field-boundary delineation toolkit.

Preprocessing of multispectral rasters, multi-size tiling, mask
vectorization, cross-tile polygon merging, multi-level fusion of
predictions, and detection/delineation accuracy assessment, verifiable end
to end with a synthetic fieldscape generator and a degradable mock
segmenter.
"""

from .degrade import DegradationSpec, MockConfig, analytic_detection, mock_segment, survival_mask
from .fusion import combine_layers, dedup, fuse_all_levels
from .geometry import (
    FieldPolygon,
    Provenance,
    SpatialIndex,
    bbox_iou,
    build_index,
    intersection_area,
    polygon_area,
    polygon_iou,
)
from .georef import AffineTransform, TieSet, fit_affine, warp
from .layers import ConfigKey, PredictionLayer, read_layer, write_layer
from .metrics import (
    MatchResult,
    area_histogram,
    delineation_accuracy,
    detection_accuracy,
    match_detections,
)
from .mosaic import TileBorder, contact_segments, clip_layer_to_grid, merge_adjacent
from .preprocess import enhance_edges, gaussian_blur, gaussian_kernel, pansharpen, percentile_normalize
from .raster import ByteComposite, GeoTransform, RasterGrid, Tile, read_raster, write_raster
from .reports import MetricsReport, evaluate_layer, level_report
from .synth import FieldscapeSpec, generate_fieldscape
from .tiling import TileGrid, make_tiles
from .vectorize import rasterize_polygon, vectorize_mask

__version__ = "0.1.0"
