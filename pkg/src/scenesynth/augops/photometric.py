"""Color-only operators. Each takes and returns an RGB float64 array (0..255)."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from scenesynth.augops.noise import noise_field

_GRAY = np.array([0.299, 0.587, 0.114])


def grayscale(rgb: np.ndarray) -> np.ndarray:
    return rgb @ _GRAY


def linear_contrast(rgb, gain):
    return 128.0 + gain * (rgb - 128.0)


def multiply(rgb, factor):
    return rgb * factor


def rgb_to_hsv(rgb):
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = mx - mn
    v = mx
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1), 0.0)
    safe = np.where(delta > 0, delta, 1)
    h = np.where(
        mx == r,
        ((g - b) / safe) % 6,
        np.where(mx == g, (b - r) / safe + 2, (r - g) / safe + 4),
    )
    h = np.where(delta > 0, h / 6.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv):
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    h6 = (h % 1.0) * 6.0
    i = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    p = v * (1 - s)
    q = v * (1 - s * f)
    t = v * (1 - s * (1 - f))
    choices = [
        np.stack([v, t, p], -1),
        np.stack([q, v, p], -1),
        np.stack([p, v, t], -1),
        np.stack([p, q, v], -1),
        np.stack([t, p, v], -1),
        np.stack([v, p, q], -1),
    ]
    out = np.zeros_like(hsv)
    for k, c in enumerate(choices):
        out = np.where((i == k)[..., None], c, out)
    return out


def add_hue_saturation(rgb, hue, saturation):
    """Shift hue and saturation, both given on a 0..255 scale."""
    if hue == 0 and saturation == 0:
        return rgb
    hsv = rgb_to_hsv(rgb / 255.0)
    hsv[..., 0] = (hsv[..., 0] + hue / 255.0) % 1.0
    hsv[..., 1] = np.clip(hsv[..., 1] + saturation / 255.0, 0.0, 1.0)
    return hsv_to_rgb(hsv) * 255.0


def _convolve(rgb, kernel):
    return np.stack(
        [ndimage.convolve(rgb[..., c], kernel, mode="nearest") for c in range(rgb.shape[-1])],
        axis=-1,
    )


SHARPEN_KERNEL = np.array([[0, -1, 0], [-1, 5, -1], [0, -1, 0]], dtype=np.float64)
EMBOSS_KERNEL = np.array([[-1, -1, 0], [-1, 1, 1], [0, 1, 1]], dtype=np.float64)


def sharpen(rgb, strength):
    if strength == 0:
        return rgb
    return (1 - strength) * rgb + strength * _convolve(rgb, SHARPEN_KERNEL)


def emboss(rgb, strength):
    if strength == 0:
        return rgb
    return (1 - strength) * rgb + strength * _convolve(rgb, EMBOSS_KERNEL)


def gaussian_blur(rgb, sigma):
    # below ~0.3 the kernel is effectively a delta
    if sigma < 0.3:
        return rgb
    return np.stack(
        [ndimage.gaussian_filter(rgb[..., c], sigma, mode="reflect") for c in range(rgb.shape[-1])],
        axis=-1,
    )


def median_blur(rgb, kernel):
    kernel = int(kernel)
    if kernel <= 1:
        return rgb
    return np.stack(
        [ndimage.median_filter(rgb[..., c], size=kernel, mode="reflect") for c in range(rgb.shape[-1])],
        axis=-1,
    )


def additive_gaussian_noise(rgb, sigma, seed):
    if sigma == 0:
        return rgb
    from scenesynth.seeding import rng

    return rgb + rng(seed).normal(0.0, sigma, size=rgb.shape)


def _noise_overlay_blend(rgb, overlay, scale, seed):
    h, w = rgb.shape[:2]
    f = noise_field(w, h, scale, seed).values[..., None]
    return f * overlay + (1 - f) * rgb


def frequency_noise_alpha(rgb, scale, gain, seed):
    """Blend in a brightness-scaled copy through a fine-grained noise mask."""
    if gain == 1:
        return rgb
    return _noise_overlay_blend(rgb, np.clip(rgb * gain, 0, 255), scale, seed)


def simplex_noise_alpha(rgb, scale, offset, seed):
    """Blend in a brightness-offset copy through a coarse noise mask."""
    if offset == 0:
        return rgb
    return _noise_overlay_blend(rgb, np.clip(rgb + offset, 0, 255), scale, seed)


# AugMix set. Operates on uint8-valued float arrays and mirrors the usual
# PIL definitions.


def autocontrast(rgb):
    out = np.empty_like(rgb)
    for c in range(rgb.shape[-1]):
        ch = rgb[..., c]
        lo, hi = ch.min(), ch.max()
        if hi <= lo:
            out[..., c] = ch
        else:
            out[..., c] = (ch - lo) * (255.0 / (hi - lo))
    return out


def equalize(rgb):
    out = np.empty_like(rgb)
    for c in range(rgb.shape[-1]):
        ch = np.floor(rgb[..., c] + 0.5).clip(0, 255).astype(np.intp)
        hist = np.bincount(ch.ravel(), minlength=256)
        nonzero = hist[hist > 0]
        step = (nonzero.sum() - nonzero[-1]) // 255
        if step == 0:
            out[..., c] = rgb[..., c]
            continue
        lut = (np.concatenate([[0], np.cumsum(hist)[:-1]]) + step // 2) // step
        out[..., c] = np.minimum(lut, 255)[ch]
    return out


def posterize(rgb, bits):
    bits = int(bits)
    mask = (0xFF << (8 - bits)) & 0xFF
    q = np.floor(rgb + 0.5).clip(0, 255).astype(np.uint8)
    return (q & mask).astype(np.float64)


def solarize(rgb, threshold):
    return np.where(rgb >= threshold, 255.0 - rgb, rgb)


def color(rgb, factor):
    gray = grayscale(rgb)[..., None]
    return gray + factor * (rgb - gray)


def contrast(rgb, factor):
    mean = np.floor(grayscale(rgb).mean() + 0.5)
    return mean + factor * (rgb - mean)


def brightness(rgb, factor):
    return rgb * factor


_SMOOTH = np.array([[1, 1, 1], [1, 5, 1], [1, 1, 1]], dtype=np.float64) / 13.0


def sharpness(rgb, factor):
    smooth = rgb.copy()
    if rgb.shape[0] > 2 and rgb.shape[1] > 2:
        smooth[1:-1, 1:-1] = _convolve(rgb, _SMOOTH)[1:-1, 1:-1]
    return smooth + factor * (rgb - smooth)
