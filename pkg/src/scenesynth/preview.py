"""Contact sheets pairing each scene with a mask-tinted copy."""

from __future__ import annotations

import numpy as np

from scenesynth.blend import Scene

PALETTE = np.array(
    [
        [0, 0, 0],
        [255, 225, 25],
        [60, 180, 75],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
        [250, 190, 212],
        [0, 128, 128],
    ],
    dtype=np.float64,
)


def class_color(class_id: int) -> np.ndarray:
    return PALETTE[1 + (class_id - 1) % (len(PALETTE) - 1)]


def overlay(scene: Scene) -> np.ndarray:
    """Half-tint every mask-positive pixel with its class color.

    Pixels outside the mask are copied unchanged; a positive pixel that the
    tint would leave unchanged is inverted instead so every one is visible.
    """
    img = scene.image.data.astype(np.float64)
    mask = scene.mask.data[:, :, 0]
    out = scene.image.data.copy()
    for c in np.unique(mask):
        if c == 0:
            continue
        sel = mask == c
        tinted = np.floor(0.5 * img[sel] + 0.5 * class_color(int(c)) + 0.5).astype(np.uint8)
        same = (tinted == scene.image.data[sel]).all(axis=1)
        tinted[same] = 255 - tinted[same]
        out[sel] = tinted
    return out


def contact_sheet(scenes: list[Scene]) -> np.ndarray:
    """One row per scene: image tile, then overlay tile."""
    if not scenes:
        raise ValueError("contact sheet needs at least one scene")
    rows = [np.concatenate([s.image.data, overlay(s)], axis=1) for s in scenes]
    return np.concatenate(rows, axis=0)
