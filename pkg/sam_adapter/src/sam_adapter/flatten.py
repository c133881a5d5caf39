"""Flatten overlapping instance masks into one label raster.

The protocol's rule: paint masks by area, largest first, so smaller masks
painted later overwrite larger ones and small fields survive inside big
aggregate masks. Equal-area ties go by mask centroid in lexicographic (x, y)
order, keeping the painting order deterministic for identical mask sets.
"""

from __future__ import annotations

import numpy as np


def flatten_masks(masks: list[np.ndarray], shape: tuple[int, int]) -> np.ndarray:
    """Paint boolean masks into a dense uint16 label raster.

    Returns labels with 0 as background and values exactly {1..N}; masks that
    end up fully overwritten are dropped from the numbering.
    """
    order = sorted(range(len(masks)), key=lambda i: _paint_key(masks[i]))
    labels = np.zeros(shape, dtype=np.uint16)
    for seq, idx in enumerate(order, start=1):
        mask = masks[idx]
        if mask.shape != shape:
            raise ValueError(f"mask shape {mask.shape} != tile shape {shape}")
        labels[mask] = seq
    return _relabel_dense(labels)


def _paint_key(mask: np.ndarray):
    area = int(mask.sum())
    if area == 0:
        return (0, 0.0, 0.0)
    rows, cols = np.nonzero(mask)
    centroid_x = float(cols.mean())
    centroid_y = float(rows.mean())
    return (-area, centroid_x, centroid_y)


def _relabel_dense(labels: np.ndarray) -> np.ndarray:
    values = np.unique(labels)
    values = values[values != 0]
    if len(values) == 0:
        return labels
    lut = np.zeros(int(values.max()) + 1, dtype=np.uint16)
    lut[values] = np.arange(1, len(values) + 1, dtype=np.uint16)
    return lut[labels]
