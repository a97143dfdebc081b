"""Procedural stand-in seed assets.

Real seeds are a tissue frame and a handful of hand-matted instrument
cutouts. These synthetic ones let the pipeline, tests and CLI run without
any licensed data: a noisy reddish tissue texture and gray instrument-like
silhouettes whose tip shape differs per class.
"""

from __future__ import annotations

import math
import os

import numpy as np
import yaml
from PIL import Image, ImageDraw

from scenesynth.augops.noise import noise_field
from scenesynth.composer import DEFAULT_CLASSES
from scenesynth.seeding import derive, rng


def tissue_background(width: int = 320, height: int = 256, seed: int = 0) -> np.ndarray:
    coarse = noise_field(width, height, 64, derive(seed, 1, 0)).values
    fine = noise_field(width, height, 12, derive(seed, 1, 1)).values
    base = np.array([178.0, 74.0, 70.0])
    shade = 0.55 + 0.6 * coarse[..., None] + 0.25 * (fine[..., None] - 0.5)
    img = base * shade
    img[..., 2] += 25 * (fine - 0.5)
    im = Image.fromarray(np.clip(img, 0, 255).astype(np.uint8), "RGB")
    draw = ImageDraw.Draw(im)
    gen = rng(derive(seed, 1, 2))
    # a few vessels
    for _ in range(5):
        pts = [(float(gen.uniform(0, width)), float(gen.uniform(0, height)))]
        for _ in range(6):
            x, y = pts[-1]
            pts.append((x + float(gen.normal(0, 30)), y + float(gen.normal(0, 30))))
        draw.line(pts, fill=(120, 30, 40), width=int(gen.integers(2, 5)))
    return np.asarray(im)


def _tip(draw: ImageDraw.ImageDraw, kind: int, x: float, y: float, open_angle: float, color):
    """Draw a class-specific tool tip pointing right from (x, y)."""
    if kind == 0:  # bipolar jaws
        for sgn in (-1, 1):
            a = sgn * open_angle
            draw.polygon(
                [(x, y - 5), (x + 38 * math.cos(a), y + 38 * math.sin(a)), (x, y + 5)], fill=color
            )
    elif kind == 1:  # fenestrated: jaws with a hole
        for sgn in (-1, 1):
            a = sgn * open_angle
            ex, ey = x + 40 * math.cos(a), y + 40 * math.sin(a)
            draw.polygon([(x, y - 7), (ex, ey), (x, y + 7)], fill=color)
            draw.ellipse([x + 14 * math.cos(a) - 3, y + 14 * math.sin(a) - 3, x + 14 * math.cos(a) + 3, y + 14 * math.sin(a) + 3], fill=(0, 0, 0, 0))
    elif kind == 2:  # prograsp: wide short jaws
        for sgn in (-1, 1):
            a = sgn * open_angle
            draw.polygon([(x, y - 9), (x + 28 * math.cos(a), y + 28 * math.sin(a) - 6), (x + 28 * math.cos(a), y + 28 * math.sin(a) + 6), (x, y + 9)], fill=color)
    elif kind == 3:  # needle driver: blunt block
        draw.rectangle([x, y - 9, x + 30, y + 9], fill=color)
        draw.line([(x + 30, y), (x + 30 + 20 * math.cos(open_angle), y + 20 * math.sin(open_angle))], fill=color, width=4)
    elif kind == 4:  # curved scissors
        for sgn in (-1, 1):
            a = sgn * open_angle
            pts = [(x + t * math.cos(a), y + t * math.sin(a) + sgn * 0.004 * t * t) for t in range(0, 44, 4)]
            draw.line(pts, fill=color, width=6)
    elif kind == 5:  # ultrasound probe: rounded slab
        draw.rounded_rectangle([x, y - 14, x + 46, y + 14], radius=10, fill=color)
    elif kind == 6:  # clip applier
        draw.polygon([(x, y - 6), (x + 34, y - 12 - 10 * open_angle), (x + 40, y), (x + 34, y + 12 + 10 * open_angle), (x, y + 6)], fill=color)
    else:  # suction: plain tube with a ring
        draw.rectangle([x, y - 5, x + 36, y + 5], fill=color)
        draw.ellipse([x + 30, y - 8, x + 42, y + 8], outline=color, width=3)


def instrument_cutout(kind: int, variant: int, seed: int = 0, size: float = 2.0) -> np.ndarray:
    """RGBA cutout of a shaft plus tip; ``variant`` changes angle and opening.

    ``size`` scales the drawing; the default gives cutouts a few hundred
    pixels long, roughly what a matted instrument from a 1280x1024 frame is.
    """
    gen = rng(derive(seed, 2, kind * 97 + variant))
    length = int(gen.integers(150, 210))
    w, h = length + 80, 120
    im = Image.new("RGBA", (w, h), (0, 0, 0, 0))
    draw = ImageDraw.Draw(im)
    gray = int(gen.integers(150, 215))
    shaft = (gray, gray, min(255, gray + 10), 255)
    tip = (gray - 40, gray - 40, gray - 30, 255)
    y = h / 2
    thick = int(gen.integers(10, 16))
    draw.rectangle([0, y - thick, length, y + thick], fill=shaft)
    # specular stripe
    draw.rectangle([0, y - thick + 3, length, y - thick + 6], fill=(235, 235, 240, 255))
    draw.rectangle([length - 14, y - thick - 2, length, y + thick + 2], fill=(60, 60, 70, 255))
    _tip(draw, kind, length, y, 0.15 + 0.25 * variant, tip)
    if size != 1.0:
        im = im.resize((round(w * size), round(h * size)), Image.BILINEAR)
    im = im.rotate(float(gen.uniform(-40, 40)), resample=Image.BILINEAR, expand=True)
    arr = np.asarray(im).copy()
    arr[..., 3] = np.where(arr[..., 3] >= 128, 255, 0)
    return arr


def make_demo_assets(out_dir: str, seeds_per_class: int = 3, seed: int = 0, n_classes: int = 8) -> str:
    """Write a background, cutouts and a matching config; returns the config path."""
    os.makedirs(os.path.join(out_dir, "foreground"), exist_ok=True)
    bg_path = os.path.join(out_dir, "background.png")
    Image.fromarray(tissue_background(seed=seed), "RGB").save(bg_path)
    names = list(DEFAULT_CLASSES) + [f"Novel Instrument {k}" for k in range(1, max(0, n_classes - 8) + 1)]
    classes = []
    for kind, name in enumerate(names[:n_classes]):
        seeds = []
        for v in range(seeds_per_class):
            rel = os.path.join("foreground", f"class{kind + 1:02d}_{v}.png")
            Image.fromarray(instrument_cutout(kind % 8, v, seed + kind // 8), "RGBA").save(os.path.join(out_dir, rel))
            seeds.append(rel)
        classes.append({"name": name, "seeds": seeds})
    cfg = {"assets": {"background": "background.png", "classes": classes}}
    cfg_path = os.path.join(out_dir, "config.yaml")
    with open(cfg_path, "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=False)
    return cfg_path
