"""Augmentation operator catalog and application.

Operators fall in three kinds:

* photometric -- color only, never touch alpha or masks;
* geometric -- coordinate warps, applied to image and mask together;
* occlusion -- rectangles or blocks overwritten with constants.

All randomness lives in the op parameters (seeded ops carry their own
``seed``), so applying an :class:`AugPlan` twice gives identical bytes.
"""

from __future__ import annotations

import math

import numpy as np

from scenesynth.augops import photometric as ph
from scenesynth.augops.catalog import (
    AUGMIX_HARD_EXTRA,
    AUGMIX_SOFT_NAMES,
    DESCRIPTORS,
    GEOMETRIC,
    OCCLUSION,
    PHOTOMETRIC,
    AugOpInstance,
    AugPlan,
    OpDescriptor,
    ParamSpec,
    catalog_augmix,
    catalog_background,
    catalog_foreground,
    in_range,
    sample_op,
    sample_plan,
    with_overrides,
)
from scenesynth.augops.noise import NoiseField, noise_alpha_blend, noise_field
from scenesynth.imgcore import (
    AffineMatrix,
    Homography,
    InvalidArgument,
    PixelBuffer,
    to_uint8,
    warp_affine,
    warp_perspective,
)
from scenesynth.seeding import rng

__all__ = [
    "AUGMIX_HARD_EXTRA",
    "AUGMIX_SOFT_NAMES",
    "AugOpInstance",
    "AugPlan",
    "ContractViolation",
    "DESCRIPTORS",
    "GEOMETRIC",
    "NoiseField",
    "OCCLUSION",
    "OpDescriptor",
    "PHOTOMETRIC",
    "ParamSpec",
    "apply_geometric_joint",
    "apply_occlusion",
    "apply_photometric",
    "apply_plan",
    "catalog_augmix",
    "catalog_background",
    "catalog_foreground",
    "geometric_transform",
    "in_range",
    "noise_alpha_blend",
    "noise_field",
    "sample_op",
    "sample_plan",
    "with_overrides",
]


class ContractViolation(TypeError):
    """An operator was routed to the wrong application function."""


_PHOTOMETRIC_FNS = {
    "LinearContrast": lambda x, p: ph.linear_contrast(x, p["gain"]),
    "FrequencyNoiseAlpha": lambda x, p: ph.frequency_noise_alpha(x, p["scale"], p["gain"], p["seed"]),
    "AddToHueAndSaturation": lambda x, p: ph.add_hue_saturation(x, p["hue"], p["saturation"]),
    "Multiply": lambda x, p: ph.multiply(x, p["factor"]),
    "Sharpen": lambda x, p: ph.sharpen(x, p["strength"]),
    "Emboss": lambda x, p: ph.emboss(x, p["strength"]),
    "SimplexNoiseAlpha": lambda x, p: ph.simplex_noise_alpha(x, p["scale"], p["offset"], p["seed"]),
    "AdditiveGaussianNoise": lambda x, p: ph.additive_gaussian_noise(x, p["sigma"], p["seed"]),
    "GaussianBlur": lambda x, p: ph.gaussian_blur(x, p["sigma"]),
    "MedianBlur": lambda x, p: ph.median_blur(x, p["kernel"]),
    "autocontrast": lambda x, p: ph.autocontrast(x),
    "equalize": lambda x, p: ph.equalize(x),
    "posterize": lambda x, p: ph.posterize(x, p["bits"]),
    "solarize": lambda x, p: ph.solarize(x, p["threshold"]),
    "color": lambda x, p: ph.color(x, p["factor"]),
    "contrast": lambda x, p: ph.contrast(x, p["factor"]),
    "brightness": lambda x, p: ph.brightness(x, p["factor"]),
    "sharpness": lambda x, p: ph.sharpness(x, p["factor"]),
}


def apply_photometric(op: AugOpInstance, img: PixelBuffer) -> PixelBuffer:
    if op.kind != PHOTOMETRIC:
        raise ContractViolation(f"{op.name} is {op.kind}, not photometric")
    if img.channels not in (3, 4):
        raise InvalidArgument("photometric ops need an RGB or RGBA image")
    fn = _PHOTOMETRIC_FNS.get(op.name)
    if fn is None:
        raise InvalidArgument(f"unknown photometric op {op.name!r}")
    rgb = img.data[:, :, :3].astype(np.float64)
    out = to_uint8(fn(rgb, op.params))
    if img.channels == 4:
        out = np.concatenate([out, img.data[:, :, 3:]], axis=2)
    return PixelBuffer(out)


def geometric_transform(op: AugOpInstance, width: int, height: int) -> Homography:
    """Output-to-input map realizing ``op`` on a ``width`` x ``height`` image."""
    p = op.params
    if op.name == "Affine":
        cx, cy = width / 2, height / 2
        th = math.radians(p["rotate"])
        sh = math.tan(math.radians(p["shear"]))
        s = p["scale"]
        rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        lin = rot @ np.array([[1.0, sh], [0.0, 1.0]]) * s
        t = np.array([cx + p["translate_x"] * width, cy + p["translate_y"] * height])
        fwd = np.eye(3)
        fwd[:2, :2] = lin
        fwd[:2, 2] = t - lin @ np.array([cx, cy])
        return AffineMatrix.from_array(np.linalg.inv(fwd)).as_homography()
    if op.name == "Flip":
        m = np.eye(3)
        if p["horizontal"]:
            m = AffineMatrix.flip(width, height, True).to_array() @ m
        if p["vertical"]:
            m = AffineMatrix.flip(width, height, False).to_array() @ m
        return Homography(tuple(m.ravel()))
    if op.name == "PerspectiveTransform":
        src = np.array([[0, 0], [width, 0], [width, height], [0, height]], dtype=np.float64)
        d = np.array([p[f"d{i}"] for i in range(8)]).reshape(4, 2) * [width, height]
        return Homography.from_points(src + d, src)
    raise InvalidArgument(f"unknown geometric op {op.name!r}")


def _warp(img: PixelBuffer, h: Homography, filter: str) -> PixelBuffer:
    m = h.to_array()
    if m[2, 0] == 0 and m[2, 1] == 0:
        return warp_affine(img, AffineMatrix.from_array(m), filter, 0)
    return warp_perspective(img, h, filter, 0)


def apply_geometric_joint(
    op: AugOpInstance, img: PixelBuffer, mask: PixelBuffer | None = None
) -> tuple[PixelBuffer, PixelBuffer | None]:
    """Warp image (bilinear) and mask (nearest) through the same coordinate map."""
    if op.kind != GEOMETRIC:
        raise ContractViolation(f"{op.name} is {op.kind}, not geometric")
    if mask is not None:
        if mask.dims != img.dims:
            raise InvalidArgument(f"image {img.dims} and mask {mask.dims} dims differ")
        if mask.channels != 1:
            raise InvalidArgument("mask must have one channel")
    h = geometric_transform(op, img.width, img.height)
    if op.name == "Flip":
        # exact permutation, no resampling
        warped = _flip_exact(img, op)
        return warped, (_flip_exact(mask, op) if mask is not None else None)
    out = _warp(img, h, "bilinear")
    return out, (_warp(mask, h, "nearest") if mask is not None else None)


def _flip_exact(img: PixelBuffer, op: AugOpInstance) -> PixelBuffer:
    a = img.data
    if op.params["horizontal"]:
        a = a[:, ::-1]
    if op.params["vertical"]:
        a = a[::-1]
    return PixelBuffer(a)


def _occlude_rgb(img: PixelBuffer, fn) -> PixelBuffer:
    out = img.data.copy()
    fn(out[:, :, :3])
    return PixelBuffer(out)


def apply_occlusion(op: AugOpInstance, img: PixelBuffer, rng_seed: int | None = None) -> PixelBuffer:
    """Overwrite rectangles (Cutout) or grid blocks (CoarseDropout).

    ``rng_seed`` defaults to the seed stored in the op parameters.
    """
    if op.kind != OCCLUSION:
        raise ContractViolation(f"{op.name} is {op.kind}, not occlusion")
    seed = op.params.get("seed", 0) if rng_seed is None else rng_seed
    gen = rng(seed)
    w, h = img.dims
    if op.name == "Cutout":
        area = float(op.params["area"])
        if area <= 0:
            return img

        def cut(rgb):
            for _ in range(int(op.params["count"])):
                aspect = math.exp(gen.uniform(math.log(0.5), math.log(2.0)))
                if area >= 1.0:
                    rw, rh = w, h
                else:
                    rw = min(w, max(1, int(round(math.sqrt(area * w * h * aspect)))))
                    rh = min(h, max(1, int(round(area * w * h / rw))))
                x0 = int(gen.integers(0, w - rw + 1))
                y0 = int(gen.integers(0, h - rh + 1))
                rgb[y0 : y0 + rh, x0 : x0 + rw] = int(gen.integers(0, 256))

        return _occlude_rgb(img, cut)
    if op.name == "CoarseDropout":
        fraction = float(op.params["fraction"])
        block = int(op.params["block"])
        if fraction <= 0:
            return img
        nx, ny = math.ceil(w / block), math.ceil(h / block)
        n_drop = int(round(fraction * nx * ny))
        picks = gen.permutation(nx * ny)[:n_drop]

        def drop(rgb):
            for k in picks:
                by, bx = divmod(int(k), nx)
                rgb[by * block : (by + 1) * block, bx * block : (bx + 1) * block] = 0

        return _occlude_rgb(img, drop)
    raise InvalidArgument(f"unknown occlusion op {op.name!r}")


def apply_plan(
    plan: AugPlan, img: PixelBuffer, mask: PixelBuffer | None = None
) -> tuple[PixelBuffer, PixelBuffer | None]:
    """Run every op of ``plan`` in order; geometric ops also move ``mask``."""
    for op in plan.ops:
        if op.kind == PHOTOMETRIC:
            img = apply_photometric(op, img)
        elif op.kind == GEOMETRIC:
            img, mask = apply_geometric_joint(op, img, mask)
        elif op.kind == OCCLUSION:
            img = apply_occlusion(op, img)
        else:
            raise InvalidArgument(f"unknown op kind {op.kind!r}")
    return img, mask
