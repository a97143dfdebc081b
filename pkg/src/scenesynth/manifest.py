"""Dataset files on disk: PNG images/masks plus a line-delimited manifest.

Layout::

    out/
      manifest.jsonl        header line, then one scene record per line
      images/000000.png     8-bit RGB
      masks/000000.png      8-bit grayscale, value = class id (0 = background)
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from PIL import Image

from scenesynth.blend import Scene
from scenesynth.composer import SceneRecord
from scenesynth.imgcore import PixelBuffer

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"
PNG_COMPRESS_LEVEL = 6

# violation kinds
MISSING_FILE = "missing_file"
UNREADABLE_FILE = "unreadable_file"
WRONG_DIMS = "wrong_dims"
WRONG_CHANNELS = "wrong_channels"
UNKNOWN_CLASS = "unknown_class"
CLASS_MISMATCH = "class_mismatch"
EMPTY_MASK = "empty_mask"
COUNT_MISMATCH = "count_mismatch"
INDEX_GAP = "index_gap"
DUPLICATE_INDEX = "duplicate_index"


class ManifestError(RuntimeError):
    pass


class SceneWriteError(OSError):
    def __init__(self, path: str, index: int, cause: Exception):
        super().__init__(f"scene {index}: cannot write {path}: {cause}")
        self.path = path
        self.index = index


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def save_png(path: str, data: np.ndarray):
    mode = "L" if data.ndim == 2 or data.shape[2] == 1 else ("RGB" if data.shape[2] == 3 else "RGBA")
    arr = data[:, :, 0] if data.ndim == 3 and data.shape[2] == 1 else data
    Image.fromarray(arr, mode).save(path, format="PNG", compress_level=PNG_COMPRESS_LEVEL, optimize=False)


def load_png(path: str) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def write_scene(directory: str, scene: Scene, record) -> None:
    """Write one scene's image and mask under ``directory``."""
    for rel, data in ((record.image_path, scene.image.data), (record.mask_path, scene.mask.data)):
        path = os.path.join(directory, rel)
        try:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            save_png(path, data)
        except OSError as exc:
            raise SceneWriteError(path, record.index, exc) from exc


def read_scene(directory: str, record) -> Scene:
    image = PixelBuffer(load_png(os.path.join(directory, record.image_path)))
    mask = PixelBuffer(load_png(os.path.join(directory, record.mask_path)))
    return Scene(image, mask)


def make_header(recipe_cfg, registry, config_echo: dict | None = None, created: str | None = None) -> dict:
    from scenesynth.seeding import DERIVATION_DOC, STREAMS

    return {
        "type": "header",
        "format_version": FORMAT_VERSION,
        "master_seed": recipe_cfg.master_seed,
        "seed_derivation": {"formula": DERIVATION_DOC, "streams": STREAMS},
        "total": recipe_cfg.total,
        "resolution": list(recipe_cfg.resolution),
        "recipe": recipe_cfg.to_dict(),
        "registry": registry.to_dict(),
        "config": config_echo or {},
        "created": created,
    }


def write_dataset(directory: str, header: dict, scenes: Iterable) -> str:
    """Write every ``(scene, record)`` and the manifest; returns the manifest path.

    Records are written in the order received, which callers keep by index.
    """
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, MANIFEST_NAME)
    tmp = path + ".partial"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(header) + "\n")
        for scene, record in scenes:
            write_scene(directory, scene, record)
            fh.write(_dumps({"type": "scene", **record.to_dict()}) + "\n")
    os.replace(tmp, path)
    return path


def read_manifest(directory: str) -> tuple[dict, list[dict]]:
    path = os.path.join(directory, MANIFEST_NAME)
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    try:
        objs = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise ManifestError(f"malformed manifest {path}: {exc}") from exc
    if not objs or objs[0].get("type") != "header":
        raise ManifestError(f"manifest {path} has no header line")
    header = objs[0]
    if header.get("format_version") != FORMAT_VERSION:
        raise ManifestError(f"unsupported manifest format {header.get('format_version')!r}")
    return header, objs[1:]


def read_dataset(directory: str) -> Iterator[tuple[Scene, SceneRecord]]:
    """Yield the stored ``(scene, record)`` pairs of a valid dataset in index order."""
    report = validate(directory)
    if not report.ok:
        first = report.violations[0]
        raise ManifestError(f"{directory} has {len(report.violations)} violations, first: {first.message}")
    _, records = read_manifest(directory)
    for d in sorted(records, key=lambda r: r["index"]):
        rec = SceneRecord.from_dict(d)
        yield read_scene(directory, rec), rec


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def dataset_digest(directory: str) -> str:
    """SHA-256 over the manifest and every image and mask, in index order."""
    _, records = read_manifest(directory)
    h = hashlib.sha256()
    h.update(file_digest(os.path.join(directory, MANIFEST_NAME)).encode())
    for rec in sorted(records, key=lambda r: r["index"]):
        for key in ("image", "mask"):
            h.update(file_digest(os.path.join(directory, rec[key])).encode())
    return h.hexdigest()


@dataclass(frozen=True)
class Violation:
    kind: str
    index: int | None
    message: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "index": self.index, "message": self.message}


@dataclass
class ValidationReport:
    checked: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> Counter:
        return Counter(v.kind for v in self.violations)

    def to_dict(self) -> dict:
        return {"checked": self.checked, "ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


def validate(directory: str) -> ValidationReport:
    """Check every record; collects all violations rather than stopping."""
    header, records = read_manifest(directory)
    report = ValidationReport()
    add = report.violations.append
    total = header.get("total")
    width, height = header["resolution"]
    known = {int(e["id"]) for e in header["registry"]}

    if len(records) != total:
        add(Violation(COUNT_MISMATCH, None, f"{len(records)} records, header says {total}"))
    seen = Counter(int(r["index"]) for r in records)
    for idx, n in sorted(seen.items()):
        if n > 1:
            add(Violation(DUPLICATE_INDEX, idx, f"index {idx} appears {n} times"))
    for idx in range(total or 0):
        if idx not in seen:
            add(Violation(INDEX_GAP, idx, f"no record for index {idx}"))

    for rec in records:
        idx = int(rec["index"])
        report.checked += 1
        arrays = {}
        for key, channels in (("image", 3), ("mask", 1)):
            path = os.path.join(directory, rec[key])
            if not os.path.isfile(path):
                add(Violation(MISSING_FILE, idx, f"missing {key} file {rec[key]}"))
                continue
            try:
                arr = load_png(path)
            except (OSError, ValueError) as exc:
                add(Violation(UNREADABLE_FILE, idx, f"cannot decode {rec[key]}: {exc}"))
                continue
            if arr.shape[:2] != (height, width):
                add(Violation(WRONG_DIMS, idx, f"{rec[key]} is {arr.shape[1]}x{arr.shape[0]}, expected {width}x{height}"))
            if arr.shape[2] != channels or arr.dtype != np.uint8:
                add(Violation(WRONG_CHANNELS, idx, f"{rec[key]} has {arr.shape[2]} channels, expected {channels}"))
            arrays[key] = arr
        mask = arrays.get("mask")
        if mask is None:
            continue
        values = {int(v) for v in np.unique(mask)}
        ids = values - {0}
        unknown = ids - known
        if unknown:
            add(Violation(UNKNOWN_CLASS, idx, f"mask has unregistered class ids {sorted(unknown)}"))
        if not ids:
            add(Violation(EMPTY_MASK, idx, "mask has no foreground pixels"))
        declared = {int(c) for c in rec["classes"]}
        if ids != declared and not unknown:
            add(Violation(CLASS_MISMATCH, idx, f"mask ids {sorted(ids)} != declared {sorted(declared)}"))
    return report


@dataclass
class DatasetStats:
    per_class: dict[int, int]
    single: int
    double: int
    empty: int
    occupancy: list[float]
    histogram: list[int]
    bin_edges: list[float]

    def to_dict(self) -> dict:
        return {
            "per_class": {str(k): v for k, v in sorted(self.per_class.items())},
            "single": self.single,
            "double": self.double,
            "empty": self.empty,
            "occupancy_mean": float(np.mean(self.occupancy)) if self.occupancy else 0.0,
            "occupancy_histogram": {"bin_edges": self.bin_edges, "counts": self.histogram},
        }


def stats(directory: str, bins: int = 10) -> DatasetStats:
    """Class counts, single/double split and mask occupancy for a valid dataset."""
    report = validate(directory)
    if not report.ok:
        first = report.violations[0]
        raise ManifestError(f"dataset has {len(report.violations)} violations, first: {first.message}")
    header, records = read_manifest(directory)
    per_class = {int(e["id"]): 0 for e in header["registry"]}
    single = double = empty = 0
    occupancy = []
    for rec in sorted(records, key=lambda r: r["index"]):
        mask = load_png(os.path.join(directory, rec["mask"]))[:, :, 0]
        ids = {int(v) for v in np.unique(mask)} - {0}
        for c in ids:
            per_class[c] += 1
        if len(ids) == 1:
            single += 1
        elif len(ids) == 2:
            double += 1
        elif not ids:
            empty += 1
        occupancy.append(float(np.count_nonzero(mask)) / mask.size)
    counts, edges = np.histogram(occupancy, bins=bins, range=(0.0, 1.0))
    return DatasetStats(per_class, single, double, empty, occupancy, counts.tolist(), edges.tolist())
