"""Smooth gradient-noise fields used as spatial blending masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scenesynth.imgcore import InvalidArgument, PixelBuffer, to_uint8
from scenesynth.seeding import rng

OCTAVES = 2
PERSISTENCE = 0.5
# peak gradient-noise amplitude is about 0.71, so this keeps values off the clip
AMPLITUDE = 0.7


@dataclass(frozen=True, eq=False)
class NoiseField:
    width: int
    height: int
    scale: float
    seed: int
    values: np.ndarray  # (height, width) float64 in [0, 1]


def _fade(t):
    return t * t * t * (t * (t * 6 - 15) + 10)


def _gradient_noise(width: int, height: int, scale: float, gen: np.random.Generator) -> np.ndarray:
    """Single octave of 2-D gradient noise in roughly [-0.7, 0.7]."""
    gw = int(np.ceil(width / scale)) + 2
    gh = int(np.ceil(height / scale)) + 2
    angles = gen.uniform(0.0, 2 * np.pi, size=(gh, gw))
    gx, gy = np.cos(angles), np.sin(angles)
    # random lattice offset so different seeds don't share lattice alignment
    ox, oy = gen.uniform(0.0, 1.0, size=2)

    x = (np.arange(width) + 0.5) / scale + ox
    y = (np.arange(height) + 0.5) / scale + oy
    xx, yy = np.meshgrid(x, y)
    x0 = np.floor(xx).astype(np.intp)
    y0 = np.floor(yy).astype(np.intp)
    fx = xx - x0
    fy = yy - y0

    def corner(dx, dy):
        return gx[y0 + dy, x0 + dx] * (fx - dx) + gy[y0 + dy, x0 + dx] * (fy - dy)

    u = _fade(fx)
    v = _fade(fy)
    top = corner(0, 0) * (1 - u) + corner(1, 0) * u
    bot = corner(0, 1) * (1 - u) + corner(1, 1) * u
    return top * (1 - v) + bot * v


def noise_field(w: int, h: int, scale: float, seed: int) -> NoiseField:
    """Octave-summed gradient noise mapped into [0, 1].

    ``scale`` is the wavelength of the coarsest octave in pixels; each further
    octave halves the wavelength and the amplitude.
    """
    if w < 1 or h < 1:
        raise InvalidArgument(f"noise field dims must be positive, got {w}x{h}")
    if not scale > 0:
        raise InvalidArgument(f"noise scale must be positive, got {scale}")
    gen = rng(seed)
    total = np.zeros((h, w))
    amp, norm, s = 1.0, 0.0, float(scale)
    for _ in range(OCTAVES):
        total += amp * _gradient_noise(w, h, s, gen)
        norm += amp
        amp *= PERSISTENCE
        s /= 2
    values = np.clip(0.5 + AMPLITUDE * total / norm, 0.0, 1.0)
    values.flags.writeable = False
    return NoiseField(w, h, float(scale), seed, values)


def noise_alpha_blend(img: PixelBuffer, overlay: PixelBuffer, field: NoiseField) -> PixelBuffer:
    """Per-pixel ``field * overlay + (1 - field) * img``; alpha of ``img`` is kept."""
    if img.dims != overlay.dims or img.dims != (field.width, field.height):
        raise InvalidArgument("image, overlay and noise field must share dims")
    if img.channels != overlay.channels:
        raise InvalidArgument("image and overlay channel counts differ")
    f = field.values[:, :, None]
    mixed = f * overlay.data.astype(np.float64) + (1 - f) * img.data.astype(np.float64)
    out = to_uint8(mixed)
    if img.channels == 4:
        out[:, :, 3] = img.data[:, :, 3]
    return PixelBuffer(out)
