import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from conftest import make_fixture_job, validate_mask_file

CMD = [sys.executable, "-m", "sam_adapter.adapter"]


def run_adapter(manifest, out_dir, checkpoint="vit_b", env_extra=None):
    env = {**os.environ, **(env_extra or {})}
    return subprocess.run(
        CMD
        + ["--manifest", str(manifest), "--out", str(out_dir), "--checkpoint", checkpoint],
        capture_output=True,
        text=True,
        env=env,
        timeout=300,
    )


class TestFixtureJob:
    def test_three_tile_job_conforms(self, tmp_path, fake_config):
        manifest = make_fixture_job(tmp_path / "job", n_tiles=3)
        proc = run_adapter(manifest, tmp_path / "job")
        assert proc.returncode == 0, proc.stderr
        done = json.loads((tmp_path / "job" / "done.json").read_text())
        assert done["job_id"] == "fixture-job"
        assert len(done["results"]) == 3
        for entry in done["results"]:
            assert entry["status"] == "ok"
            n = validate_mask_file(tmp_path / "job" / entry["mask"], 96, 96)
            assert n == entry["n_masks"] and n >= 1

    def test_constant_tile_validates(self, tmp_path, fake_config):
        manifest = make_fixture_job(tmp_path / "job", n_tiles=1, constant_tile=True)
        proc = run_adapter(manifest, tmp_path / "job")
        assert proc.returncode == 0, proc.stderr
        done = json.loads((tmp_path / "job" / "done.json").read_text())
        assert done["results"][0]["status"] == "ok"
        validate_mask_file(tmp_path / "job" / done["results"][0]["mask"], 96, 96)

    def test_deterministic_reruns(self, tmp_path, fake_config):
        manifest = make_fixture_job(tmp_path / "job", n_tiles=2)
        assert run_adapter(manifest, tmp_path / "a").returncode == 0
        assert run_adapter(manifest, tmp_path / "b").returncode == 0
        for i in range(2):
            a = (tmp_path / "a" / "masks" / f"t{i:02d}_00.png").read_bytes()
            b = (tmp_path / "b" / "masks" / f"t{i:02d}_00.png").read_bytes()
            assert a == b

    def test_overlap_flattening_visible_in_output(self, tmp_path, fake_config):
        # the fake backend always proposes a full-tile aggregate plus interior
        # rectangles; the protocol rule keeps the small ones on top
        manifest = make_fixture_job(tmp_path / "job", n_tiles=1)
        run_adapter(manifest, tmp_path / "job")
        done = json.loads((tmp_path / "job" / "done.json").read_text())
        labels = np.asarray(
            Image.open(tmp_path / "job" / done["results"][0]["mask"]), dtype=np.int64
        )
        assert labels.max() >= 2  # aggregate + at least one interior mask
        assert (labels == 1).any()  # the large mask still owns the rest


class TestFailureModes:
    def test_missing_weights_exit_nonzero(self, tmp_path, monkeypatch):
        monkeypatch.delenv("FIELDFUSE_ADAPTER_CONFIG", raising=False)
        manifest = make_fixture_job(tmp_path / "job", n_tiles=1)
        proc = run_adapter(manifest, tmp_path / "job")
        assert proc.returncode == 2
        assert "checkpoint" in proc.stderr

    def test_checkpoint_mismatch_exit_nonzero(self, tmp_path, fake_config):
        manifest = make_fixture_job(tmp_path / "job", n_tiles=1)
        proc = run_adapter(manifest, tmp_path / "job", checkpoint="vit_h")
        assert proc.returncode == 2
        assert "model_type" in proc.stderr

    def test_single_bad_tile_is_error_entry_not_crash(self, tmp_path, fake_config):
        manifest = make_fixture_job(tmp_path / "job", n_tiles=3)
        (tmp_path / "job" / "tiles" / "t01_00.png").write_bytes(b"not a png")
        proc = run_adapter(manifest, tmp_path / "job")
        assert proc.returncode == 0  # other tiles succeeded
        done = json.loads((tmp_path / "job" / "done.json").read_text())
        by_tile = {r["tile_id"]: r for r in done["results"]}
        assert by_tile["t01_00"]["status"] == "error"
        assert by_tile["t01_00"]["message"]
        assert by_tile["t00_00"]["status"] == "ok"
        assert by_tile["t02_00"]["status"] == "ok"

    def test_all_tiles_failing_exits_nonzero(self, tmp_path, fake_config):
        manifest = make_fixture_job(tmp_path / "job", n_tiles=1)
        (tmp_path / "job" / "tiles" / "t00_00.png").write_bytes(b"junk")
        proc = run_adapter(manifest, tmp_path / "job")
        assert proc.returncode != 0
        # done.json still enumerates the failure
        done = json.loads((tmp_path / "job" / "done.json").read_text())
        assert done["results"][0]["status"] == "error"


@pytest.mark.skipif(
    not os.environ.get("SAM_CHECKPOINT"),
    reason="real ViT-b weights not available (set SAM_CHECKPOINT to run)",
)
class TestRealWeights:
    def test_three_tile_job_with_vit_b(self, tmp_path, monkeypatch):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "backend": "sam",
                    "model_type": "vit_b",
                    "checkpoint_path": os.environ["SAM_CHECKPOINT"],
                }
            )
        )
        monkeypatch.setenv("FIELDFUSE_ADAPTER_CONFIG", str(cfg))
        manifest = make_fixture_job(tmp_path / "job", n_tiles=3)
        proc = run_adapter(manifest, tmp_path / "job")
        assert proc.returncode == 0, proc.stderr
        done = json.loads((tmp_path / "job" / "done.json").read_text())
        for entry in done["results"]:
            assert entry["status"] == "ok"
            validate_mask_file(tmp_path / "job" / entry["mask"], 96, 96)
