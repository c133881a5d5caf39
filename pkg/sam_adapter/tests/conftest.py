import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def make_fixture_job(job_dir: Path, n_tiles=3, size=96, constant_tile=False):
    """A protocol job directory built from scratch: manifest + tile PNGs."""
    (job_dir / "tiles").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(17)
    tiles = []
    for i in range(n_tiles):
        tile_id = f"t{i:02d}_00"
        if constant_tile and i == 0:
            data = np.full((size, size, 3), 127, dtype=np.uint8)
        else:
            base = rng.integers(30, 220, (size // 8, size // 8, 3), dtype=np.uint8)
            data = np.kron(base, np.ones((8, 8, 1), dtype=np.uint8))
        Image.fromarray(data, mode="RGB").save(job_dir / "tiles" / f"{tile_id}.png")
        tiles.append(
            {
                "tile_id": tile_id,
                "image": f"tiles/{tile_id}.png",
                "width": size,
                "height": size,
                "geotransform": [0.0, float(size), 1.0],
            }
        )
    manifest = {
        "job_id": "fixture-job",
        "checkpoint": "vit_b",
        "variant": "original",
        "tiles": tiles,
    }
    (job_dir / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return job_dir / "manifest.json"


def validate_mask_file(path: Path, width: int, height: int) -> int:
    """Protocol mask rules: 16-bit single-channel PNG, exact dims, dense labels."""
    head = path.read_bytes()[:26]
    assert head[:8] == b"\x89PNG\r\n\x1a\n", "not a PNG"
    assert head[24] == 16, f"bit depth {head[24]} != 16"
    assert head[25] == 0, f"color type {head[25]} != grayscale"
    arr = np.asarray(Image.open(path), dtype=np.int64)
    assert arr.shape == (height, width)
    values = np.unique(arr)
    nonzero = values[values != 0]
    if len(nonzero):
        assert nonzero.min() == 1 and nonzero.max() == len(nonzero), "labels not dense"
    return int(nonzero.max()) if len(nonzero) else 0


@pytest.fixture
def fake_config(tmp_path, monkeypatch):
    cfg = tmp_path / "adapter_config.json"
    cfg.write_text(json.dumps({"backend": "fake", "model_type": "vit_b"}))
    monkeypatch.setenv("FIELDFUSE_ADAPTER_CONFIG", str(cfg))
    return cfg
