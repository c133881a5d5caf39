"""Adapter configuration, read from the FIELDFUSE_ADAPTER_CONFIG JSON file."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

ENV_VAR = "FIELDFUSE_ADAPTER_CONFIG"

MODEL_TYPES = ("vit_b", "vit_h", "vit_l")


class AdapterConfigError(ValueError):
    pass


@dataclass
class AdapterConfig:
    """Checkpoint location plus automatic-mask-generation hyperparameters.

    `backend` selects the mask generator: "sam" runs Segment Anything over a
    local checkpoint file; "fake" is a deterministic dry-run generator used
    by tests and smoke runs, needing no model weights.
    """

    checkpoint_path: str | None = None
    model_type: str = "vit_b"
    device: str = "cpu"
    backend: str = "sam"
    # pass-through hyperparameters for SamAutomaticMaskGenerator
    points_per_side: int = 32
    pred_iou_thresh: float = 0.88
    stability_score_thresh: float = 0.95

    def __post_init__(self):
        if self.model_type not in MODEL_TYPES:
            raise AdapterConfigError(
                f"model_type {self.model_type!r} not in {MODEL_TYPES}"
            )
        if self.backend not in ("sam", "fake"):
            raise AdapterConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "sam":
            if not self.checkpoint_path:
                raise AdapterConfigError("sam backend needs a checkpoint_path")
            if not Path(self.checkpoint_path).exists():
                raise AdapterConfigError(
                    f"checkpoint file missing: {self.checkpoint_path}"
                )

    @classmethod
    def from_env(cls, checkpoint: str) -> "AdapterConfig":
        """Build the config for a requested checkpoint name.

        Without FIELDFUSE_ADAPTER_CONFIG the adapter cannot locate weights
        and refuses to run the sam backend.
        """
        path = os.environ.get(ENV_VAR)
        doc = {}
        if path:
            try:
                doc = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise AdapterConfigError(f"cannot read {ENV_VAR}={path}: {exc}") from exc
        doc.setdefault("model_type", checkpoint)
        if doc["model_type"] != checkpoint:
            raise AdapterConfigError(
                f"config model_type {doc['model_type']!r} != requested checkpoint {checkpoint!r}"
            )
        return cls(**doc)
