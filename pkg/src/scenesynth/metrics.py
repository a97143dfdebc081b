"""Dice similarity between binary instrument masks."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from scenesynth.imgcore import InvalidArgument, PixelBuffer


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class BinaryMaskView:
    mask: np.ndarray  # bool (height, width)

    @classmethod
    def from_labels(cls, buf: PixelBuffer | np.ndarray) -> "BinaryMaskView":
        """Instrument wherever the class id is nonzero."""
        arr = buf.data if isinstance(buf, PixelBuffer) else np.asarray(buf)
        return cls(_first_channel(arr) > 0)

    @classmethod
    def from_probability(cls, buf: PixelBuffer | np.ndarray, threshold: int = 128) -> "BinaryMaskView":
        """Instrument wherever the grayscale probability is >= ``threshold``."""
        arr = buf.data if isinstance(buf, PixelBuffer) else np.asarray(buf)
        return cls(_first_channel(arr) >= threshold)

    @property
    def dims(self) -> tuple[int, int]:
        return self.mask.shape[1], self.mask.shape[0]


def _first_channel(arr: np.ndarray) -> np.ndarray:
    return arr[:, :, 0] if arr.ndim == 3 else arr


def dsc(a: BinaryMaskView, b: BinaryMaskView) -> float:
    """2|A∩B| / (|A| + |B|); two empty masks score 1."""
    if a.dims != b.dims:
        raise InvalidArgument(f"mask dims differ: {a.dims} vs {b.dims}")
    size_a = int(np.count_nonzero(a.mask))
    size_b = int(np.count_nonzero(b.mask))
    if size_a + size_b == 0:
        return 1.0
    inter = int(np.count_nonzero(a.mask & b.mask))
    return 2.0 * inter / (size_a + size_b)


@dataclass
class DscReport:
    per_image: dict[str, float] = field(default_factory=dict)
    unpaired: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.per_image.values())))

    def to_dict(self, per_image: bool = True) -> dict:
        out = {"pairs": len(self.per_image), "mean_dsc": self.mean, "unpaired": self.unpaired, "errors": self.errors}
        if per_image:
            out["per_image"] = self.per_image
        return out


def _pngs(directory: str) -> set[str]:
    try:
        return {f for f in os.listdir(directory) if f.lower().endswith(".png")}
    except OSError as exc:
        raise EvaluationError(f"cannot list {directory}: {exc}") from exc


def dsc_batch(pred_dir: str, gt_dir: str, pred_mode: str = "label", threshold: int = 128) -> DscReport:
    """Per-image DSC over files paired by name, plus their arithmetic mean.

    Ground truth masks are class-id rasters (instrument = id > 0). Predictions
    are label rasters by default (any nonzero value, so 0/255 binary masks
    work too) or probability rasters thresholded at ``threshold``
    (``pred_mode="prob"``).
    """
    from scenesynth.manifest import load_png

    if pred_mode not in ("prob", "label"):
        raise InvalidArgument(f"pred_mode must be 'prob' or 'label', got {pred_mode!r}")
    preds, gts = _pngs(pred_dir), _pngs(gt_dir)
    report = DscReport()
    report.unpaired = sorted((preds ^ gts))
    for name in sorted(preds & gts):
        try:
            p = load_png(os.path.join(pred_dir, name))
            g = load_png(os.path.join(gt_dir, name))
        except (OSError, ValueError) as exc:
            report.errors.append(f"{name}: {exc}")
            continue
        pv = BinaryMaskView.from_probability(p, threshold) if pred_mode == "prob" else BinaryMaskView.from_labels(p)
        try:
            report.per_image[name] = dsc(pv, BinaryMaskView.from_labels(g))
        except InvalidArgument as exc:
            report.errors.append(f"{name}: {exc}")
    if not report.per_image:
        raise EvaluationError(f"no comparable mask pairs between {pred_dir} and {gt_dir}")
    return report
