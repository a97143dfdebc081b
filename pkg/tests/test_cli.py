import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest
import yaml
from PIL import Image

from scenesynth import manifest, preview
from scenesynth.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main

SMALL = ["--total", "8", "--resolution", "96x96", "--p", "6", "--q", "2", "--seed", "3"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def small_dataset(tmp_path, demo_config, capsys):
    out = str(tmp_path / "ds")
    code, stdout, _ = run(capsys, "generate", "--config", demo_config, "--recipe", "C", *SMALL, "--out", out, "--workers", "1")
    assert code == EXIT_OK
    return out, json.loads(stdout)


def test_generate_summary(small_dataset):
    out, summary = small_dataset
    assert (summary["total"], summary["single"], summary["double"]) == (8, 6, 2)
    assert summary["dataset_sha256"] == manifest.dataset_digest(out)
    header, _ = manifest.read_manifest(out)
    assert header["created"] is None
    assert header["config"]["master_seed"] == 3


def test_generate_repeatable(small_dataset, tmp_path, demo_config, capsys):
    out, summary = small_dataset
    code, stdout, _ = run(capsys, "generate", "--config", demo_config, "--recipe", "C", *SMALL, "--out", str(tmp_path / "b"), "--workers", "1")
    assert code == EXIT_OK
    assert json.loads(stdout)["dataset_sha256"] == summary["dataset_sha256"]


def test_source_date_epoch(tmp_path, demo_config, capsys, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    out = str(tmp_path / "ts")
    assert run(capsys, "generate", "--config", demo_config, *SMALL, "--out", out, "--workers", "1")[0] == EXIT_OK
    assert manifest.read_manifest(out)[0]["created"] == "1970-01-01T00:00:00+00:00"


def test_config_from_env(tmp_path, demo_config, capsys, monkeypatch):
    monkeypatch.setenv("SCENESYNTH_CONFIG", demo_config)
    out = str(tmp_path / "env")
    assert run(capsys, "generate", *SMALL, "--out", out, "--workers", "1")[0] == EXIT_OK


def test_validate_and_stats(small_dataset, capsys):
    out, _ = small_dataset
    code, stdout, _ = run(capsys, "validate", out)
    assert code == EXIT_OK and json.loads(stdout)["ok"]
    code, stdout, _ = run(capsys, "stats", out)
    st = json.loads(stdout)
    assert code == EXIT_OK and st["single"] == 6 and st["double"] == 2 and st["empty"] == 0


def test_validate_reports_corruption(small_dataset, capsys):
    out, _ = small_dataset
    os.remove(os.path.join(out, "masks/000000.png"))
    code, stdout, _ = run(capsys, "validate", out)
    assert code == EXIT_DATA
    assert json.loads(stdout)["violations"][0]["kind"] == "missing_file"
    assert run(capsys, "stats", out)[0] == EXIT_DATA


def test_missing_asset_named(tmp_path, demo_config, capsys):
    cfg = yaml.safe_load(open(demo_config))
    base = os.path.dirname(demo_config)
    cfg["assets"]["background"] = os.path.join(base, cfg["assets"]["background"])
    for c in cfg["assets"]["classes"]:
        c["seeds"] = [os.path.join(base, s) for s in c["seeds"]]
    cfg["assets"]["classes"][2]["seeds"][0] = str(tmp_path / "gone.png")
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    code, _, err = run(capsys, "generate", "--config", str(path), *SMALL, "--out", str(tmp_path / "x"))
    assert code == EXIT_DATA
    assert "gone.png" in err


def test_usage_errors(tmp_path, demo_config, capsys):
    assert run(capsys, "generate", "--config", demo_config, "--resolution", "big")[0] == EXIT_USAGE
    assert run(capsys, "generate", "--config", demo_config, "--augmix", "medium")[0] == EXIT_USAGE
    assert run(capsys, "frobnicate")[0] == EXIT_USAGE
    bad = tmp_path / "bad.yaml"
    bad.write_text("recipe: A\nbogus_key: 1\n")
    code, _, err = run(capsys, "generate", "--config", str(bad))
    assert code == EXIT_USAGE and "bogus_key" in err
    assert run(capsys, "generate", "--config", demo_config, "--recipe", "Q")[0] == EXIT_USAGE
    assert run(capsys, "preview", "--config", demo_config, *SMALL, "--n", "0")[0] == EXIT_USAGE


def test_preview(tmp_path, demo_config, capsys):
    out = str(tmp_path / "sheet.png")
    code, stdout, _ = run(capsys, "preview", "--config", demo_config, *SMALL, "--augmix", "soft", "--n", "8", "--out", out)
    assert code == EXIT_OK and json.loads(stdout)["tiles"] == 16
    sheet = np.asarray(Image.open(out))
    assert sheet.shape == (8 * 96, 2 * 96, 3)
    first = sheet
    code, _, _ = run(capsys, "preview", "--config", demo_config, *SMALL, "--augmix", "soft", "--n", "8", "--out", out)
    assert np.array_equal(np.asarray(Image.open(out)), first)


def test_preview_overlay_matches_mask(small_dataset):
    out, _ = small_dataset
    _, records = manifest.read_manifest(out)
    from scenesynth.composer import SceneRecord

    for d in records:
        scene = manifest.read_scene(out, SceneRecord.from_dict(d))
        tinted = preview.overlay(scene)
        changed = (tinted != scene.image.data).any(axis=2)
        assert np.array_equal(changed, scene.mask.data[..., 0] > 0)


def test_dsc(small_dataset, tmp_path, capsys):
    out, _ = small_dataset
    masks = os.path.join(out, "masks")
    code, stdout, _ = run(capsys, "dsc", "--pred", masks, "--gt", masks, "--per-image")
    rep = json.loads(stdout)
    assert code == EXIT_OK and rep["mean_dsc"] == 1.0 and rep["pairs"] == 8 and len(rep["per_image"]) == 8
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run(capsys, "dsc", "--pred", str(empty), "--gt", masks)[0] == EXIT_DATA


def test_demo_assets(tmp_path, capsys):
    code, stdout, _ = run(capsys, "demo-assets", str(tmp_path / "a"), "--seeds-per-class", "1", "--n-classes", "3")
    assert code == EXIT_OK
    cfg = yaml.safe_load(open(stdout.strip()))
    assert len(cfg["assets"]["classes"]) == 3


def test_module_entry_point(small_dataset):
    out, _ = small_dataset
    res = subprocess.run([sys.executable, "-m", "scenesynth", "validate", out], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["ok"]
    exe = shutil.which("scenesynth")
    if exe:
        assert subprocess.run([exe, "--help"], capture_output=True).returncode == 0


def test_prefix_reuses_existing_dataset(tmp_path, demo_config, capsys):
    base = ["--config", demo_config, "--resolution", "96x96", "--p", "6", "--q", "2", "--workers", "1"]
    a = str(tmp_path / "a")
    assert run(capsys, "generate", *base, "--recipe", "A", "--total", "16", "--seed", "1", "--out", a)[0] == EXIT_OK
    b = str(tmp_path / "b")
    code, stdout, _ = run(capsys, "generate", *base, "--recipe", "B", "--total", "24", "--seed", "2", "--prefix", a, "--out", b)
    assert code == EXIT_OK and json.loads(stdout)["reused_prefix"] == 16
    for i in range(16):
        for sub in ("images", "masks"):
            name = f"{sub}/{i:06d}.png"
            assert manifest.file_digest(os.path.join(a, name)) == manifest.file_digest(os.path.join(b, name))
    st = manifest.stats(b)
    assert (st.single, st.double) == (16, 8)
    assert run(capsys, "generate", *base, "--recipe", "A", "--total", "8", "--prefix", a, "--out", str(tmp_path / "c"))[0] == EXIT_USAGE
    assert run(capsys, "generate", *base, "--recipe", "B", "--total", "24", "--prefix", a, "--out", a)[0] == EXIT_USAGE
