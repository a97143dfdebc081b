import json
import os

import numpy as np
import pytest
from PIL import Image

from scenesynth import manifest
from scenesynth.composer import SceneRecord, generate, recipe
from scenesynth.manifest import (
    CLASS_MISMATCH,
    COUNT_MISMATCH,
    DUPLICATE_INDEX,
    EMPTY_MASK,
    INDEX_GAP,
    MISSING_FILE,
    UNKNOWN_CLASS,
    UNREADABLE_FILE,
    WRONG_CHANNELS,
    WRONG_DIMS,
    ManifestError,
)


@pytest.fixture
def dataset(tmp_path, make_pools, registry):
    rc = recipe("C", total=10, resolution=(96, 96))
    out = str(tmp_path / "ds")
    header = manifest.make_header(rc, registry, {"note": "test"})
    manifest.write_dataset(out, header, generate(rc, registry, make_pools()))
    return out


def rewrite_records(directory, fn):
    path = os.path.join(directory, manifest.MANIFEST_NAME)
    lines = open(path).read().splitlines()
    objs = [json.loads(ln) for ln in lines]
    objs = [objs[0]] + fn(objs[1:])
    with open(path, "w") as fh:
        fh.write("\n".join(json.dumps(o) for o in objs) + "\n")


def test_layout_and_round_trip(dataset, make_pools):
    header, records = manifest.read_manifest(dataset)
    assert header["total"] == 10 and len(records) == 10
    assert header["recipe"]["single"] == 8 and header["recipe"]["double"] == 2
    assert not os.path.exists(os.path.join(dataset, "manifest.jsonl.partial"))
    pools = make_pools()
    from scenesynth.composer import replay

    for d in records:
        rec = SceneRecord.from_dict(d)
        stored = manifest.read_scene(dataset, rec)
        again = replay(rec, pools)
        assert stored.image == again.image and stored.mask == again.mask
        assert sorted(stored.classes_present) == d["classes"]


def test_png_formats(dataset):
    with Image.open(os.path.join(dataset, "images/000000.png")) as im:
        assert im.mode == "RGB" and im.size == (96, 96)
    with Image.open(os.path.join(dataset, "masks/000000.png")) as im:
        assert im.mode == "L"


def test_digest_stable(dataset, tmp_path, make_pools, registry):
    rc = recipe("C", total=10, resolution=(96, 96))
    other = str(tmp_path / "again")
    manifest.write_dataset(other, manifest.make_header(rc, registry, {"note": "test"}), generate(rc, registry, make_pools()))
    assert manifest.dataset_digest(dataset) == manifest.dataset_digest(other)


def test_clean_dataset_validates(dataset):
    report = manifest.validate(dataset)
    assert report.ok and report.checked == 10


def test_missing_file(dataset):
    os.remove(os.path.join(dataset, "masks/000003.png"))
    report = manifest.validate(dataset)
    assert report.kinds() == {MISSING_FILE: 1}
    assert report.violations[0].index == 3


def test_wrong_dims(dataset):
    Image.new("RGB", (50, 96)).save(os.path.join(dataset, "images/000001.png"))
    assert manifest.validate(dataset).kinds() == {WRONG_DIMS: 1}


def test_wrong_channels(dataset):
    Image.new("RGBA", (96, 96)).save(os.path.join(dataset, "images/000001.png"))
    assert manifest.validate(dataset).kinds() == {WRONG_CHANNELS: 1}


def test_unknown_class(dataset):
    path = os.path.join(dataset, "masks/000002.png")
    mask = np.asarray(Image.open(path)).copy()
    mask[mask > 0] = 42
    Image.fromarray(mask, "L").save(path)
    assert manifest.validate(dataset).kinds() == {UNKNOWN_CLASS: 1}


def test_empty_mask(dataset):
    Image.new("L", (96, 96)).save(os.path.join(dataset, "masks/000004.png"))
    kinds = manifest.validate(dataset).kinds()
    assert kinds[EMPTY_MASK] == 1


def test_unreadable(dataset):
    with open(os.path.join(dataset, "images/000005.png"), "wb") as fh:
        fh.write(b"not a png")
    assert manifest.validate(dataset).kinds() == {UNREADABLE_FILE: 1}


def test_class_mismatch(dataset):
    def fix(recs):
        recs[0]["classes"] = [recs[0]["classes"][0] % 8 + 1]
        return recs

    rewrite_records(dataset, fix)
    assert manifest.validate(dataset).kinds() == {CLASS_MISMATCH: 1}


def test_index_problems(dataset):
    rewrite_records(dataset, lambda recs: recs[:-2] + [recs[0]])
    kinds = manifest.validate(dataset).kinds()
    assert kinds[COUNT_MISMATCH] == 1 and kinds[INDEX_GAP] == 2 and kinds[DUPLICATE_INDEX] == 1


def test_bad_manifest(tmp_path):
    with pytest.raises(ManifestError):
        manifest.read_manifest(str(tmp_path))
    (tmp_path / manifest.MANIFEST_NAME).write_text("{not json\n")
    with pytest.raises(ManifestError):
        manifest.read_manifest(str(tmp_path))
    (tmp_path / manifest.MANIFEST_NAME).write_text(json.dumps({"type": "header", "format_version": 99}) + "\n")
    with pytest.raises(ManifestError):
        manifest.read_manifest(str(tmp_path))


def test_stats(dataset):
    st = manifest.stats(dataset)
    assert st.single == 8 and st.double == 2 and st.empty == 0
    assert sum(st.per_class.values()) == 12
    assert sum(st.histogram) == 10
    assert all(0 < o < 1 for o in st.occupancy)


def test_stats_refuses_invalid(dataset):
    os.remove(os.path.join(dataset, "images/000000.png"))
    with pytest.raises(ManifestError):
        manifest.stats(dataset)
