"""Mask-generation backends.

The sam backend wraps SamAutomaticMaskGenerator over a local checkpoint; all
heavyweight imports happen lazily so the adapter starts (and fails with a
clear message) on machines without torch. The fake backend is a deterministic
stand-in for dry runs and protocol tests: it proposes a full-tile mask plus a
grid of interior rectangles, which also exercises the overlap flattening.
"""

from __future__ import annotations

import numpy as np

from .config import AdapterConfig


class BackendError(RuntimeError):
    pass


def load_backend(config: AdapterConfig):
    """Returns a callable image -> list of boolean masks."""
    if config.backend == "fake":
        return _fake_generator
    return _load_sam(config)


def _load_sam(config: AdapterConfig):
    try:
        import torch  # noqa: F401
        from segment_anything import SamAutomaticMaskGenerator, sam_model_registry
    except ImportError as exc:
        raise BackendError(
            "sam backend needs the 'segment-anything' and 'torch' packages "
            f"(pip install 'sam-adapter[sam]'): {exc}"
        ) from exc
    try:
        sam = sam_model_registry[config.model_type](checkpoint=config.checkpoint_path)
    except (FileNotFoundError, RuntimeError, KeyError) as exc:
        raise BackendError(f"cannot load checkpoint {config.checkpoint_path}: {exc}") from exc
    sam.to(config.device)
    generator = SamAutomaticMaskGenerator(
        sam,
        points_per_side=config.points_per_side,
        pred_iou_thresh=config.pred_iou_thresh,
        stability_score_thresh=config.stability_score_thresh,
    )

    def generate(image: np.ndarray) -> list[np.ndarray]:
        records = generator.generate(image)
        return [np.asarray(r["segmentation"], dtype=bool) for r in records]

    return generate


def _fake_generator(image: np.ndarray) -> list[np.ndarray]:
    """Deterministic proposals derived from image content only."""
    h, w = image.shape[:2]
    masks = []
    full = np.ones((h, w), dtype=bool)
    masks.append(full)  # an aggregate covering the tile
    step = max(8, min(h, w) // 6)
    margin = max(2, step // 4)
    for r0 in range(margin, h - step, step + margin):
        for c0 in range(margin, w - step, step + margin):
            block = image[r0 : r0 + step, c0 : c0 + step]
            # keep proposals content-dependent so different tiles differ
            if int(block.mean()) % 3 == 0:
                continue
            m = np.zeros((h, w), dtype=bool)
            m[r0 : r0 + step, c0 : c0 + step] = True
            masks.append(m)
    return masks
