"""Pixel buffers, warps and resampling.

Conventions used throughout the package:

* Buffers are ``uint8`` arrays of shape ``(height, width, channels)`` with
  1 (label mask), 3 (RGB) or 4 (RGBA) channels.
* Pixel ``(i, j)`` has its center at ``(i + 0.5, j + 0.5)``.
* Every warp is an inverse map: the matrix takes output coordinates to input
  coordinates.
* Arithmetic happens in float64 and is rounded once (half-up) and clamped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

Filter = Literal["nearest", "bilinear"]


class InvalidArgument(ValueError):
    """Raised when an argument violates an operation's precondition."""


@dataclass(frozen=True, eq=False)
class PixelBuffer:
    """Immutable 8-bit image with 1, 3 or 4 channels."""

    data: np.ndarray

    def __post_init__(self):
        arr = self.data
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3, 4):
            raise InvalidArgument(f"unsupported buffer shape {self.data.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidArgument("buffer must be at least 1x1")
        if arr.dtype != np.uint8:
            raise InvalidArgument(f"buffer dtype must be uint8, got {arr.dtype}")
        arr = np.ascontiguousarray(arr)
        if arr.flags.writeable:
            arr = arr.copy()
            arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def dims(self) -> tuple[int, int]:
        return self.width, self.height

    def tobytes(self) -> bytes:
        return self.data.tobytes()

    def __eq__(self, other):
        if not isinstance(other, PixelBuffer):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.data.shape, self.data.tobytes()))

    def __repr__(self):
        return f"PixelBuffer({self.width}x{self.height}x{self.channels})"

    @classmethod
    def from_float(cls, arr: np.ndarray) -> "PixelBuffer":
        return cls(to_uint8(arr))

    @classmethod
    def full(cls, width: int, height: int, channels: int, value=0) -> "PixelBuffer":
        return cls(np.full((height, width, channels), value, dtype=np.uint8))


def to_uint8(arr: np.ndarray) -> np.ndarray:
    """Round half-up and clamp a float array into ``uint8``."""
    return np.clip(np.floor(np.asarray(arr, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class AffineMatrix:
    """Output-to-input map ``u = a*x + b*y + tx``, ``v = c*x + d*y + ty``."""

    a: float
    b: float
    c: float
    d: float
    tx: float
    ty: float

    def __post_init__(self):
        if abs(self.a * self.d - self.b * self.c) < 1e-12:
            raise InvalidArgument("affine matrix is singular")

    @classmethod
    def identity(cls) -> "AffineMatrix":
        return cls(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)

    @classmethod
    def translation(cls, dx: float, dy: float) -> "AffineMatrix":
        """Moves image content by ``(dx, dy)`` pixels."""
        return cls(1.0, 0.0, 0.0, 1.0, -dx, -dy)

    @classmethod
    def flip(cls, width: int, height: int, horizontal: bool = True) -> "AffineMatrix":
        if horizontal:
            return cls(-1.0, 0.0, 0.0, 1.0, float(width), 0.0)
        return cls(1.0, 0.0, 0.0, -1.0, 0.0, float(height))

    @classmethod
    def from_array(cls, m: np.ndarray) -> "AffineMatrix":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1], m[0, 2], m[1, 2])

    def to_array(self) -> np.ndarray:
        return np.array([[self.a, self.b, self.tx], [self.c, self.d, self.ty], [0.0, 0.0, 1.0]])

    def inverse(self) -> "AffineMatrix":
        return AffineMatrix.from_array(np.linalg.inv(self.to_array()))

    def as_homography(self) -> "Homography":
        return Homography(tuple(self.to_array().ravel()))


@dataclass(frozen=True)
class Homography:
    """3x3 output-to-input projective map, stored row-major with h33 = 1."""

    h: tuple

    def __post_init__(self):
        m = np.asarray(self.h, dtype=np.float64).reshape(3, 3)
        if abs(m[2, 2]) < 1e-12 or abs(np.linalg.det(m)) < 1e-12:
            raise InvalidArgument("homography is singular")
        m = m / m[2, 2]
        object.__setattr__(self, "h", tuple(float(x) for x in m.ravel()))

    @classmethod
    def identity(cls) -> "Homography":
        return cls((1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0))

    @classmethod
    def from_points(cls, src: np.ndarray, dst: np.ndarray) -> "Homography":
        """Homography taking each ``src`` point to the matching ``dst`` point (4 pairs)."""
        src = np.asarray(src, dtype=np.float64)
        dst = np.asarray(dst, dtype=np.float64)
        rows, rhs = [], []
        for (x, y), (u, v) in zip(src, dst):
            rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y])
            rows.append([0, 0, 0, x, y, 1, -v * x, -v * y])
            rhs.extend([u, v])
        try:
            sol = np.linalg.solve(np.array(rows), np.array(rhs))
        except np.linalg.LinAlgError as exc:
            raise InvalidArgument("degenerate point correspondences") from exc
        return cls(tuple(sol) + (1.0,))

    def to_array(self) -> np.ndarray:
        return np.asarray(self.h, dtype=np.float64).reshape(3, 3)


def _pixel_centers(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:height, 0:width]
    return xs + 0.5, ys + 0.5


def _sample(src: np.ndarray, u: np.ndarray, v: np.ndarray, filter: Filter, fill) -> np.ndarray:
    """Sample ``src`` at continuous coordinates (pixel-center convention).

    A point outside ``[0, w) x [0, h)`` takes ``fill``. Inside, bilinear taps are
    clamped to the edge so constant images stay constant.
    """
    h, w, ch = src.shape
    inside = (u >= 0) & (u < w) & (v >= 0) & (v < h)
    fill_arr = np.broadcast_to(np.asarray(fill, dtype=np.float64), (ch,))
    if filter == "nearest":
        xi = np.clip(np.floor(u), 0, w - 1).astype(np.intp)
        yi = np.clip(np.floor(v), 0, h - 1).astype(np.intp)
        out = src[yi, xi].copy()
        out[~inside] = to_uint8(fill_arr)
        return out
    if filter != "bilinear":
        raise InvalidArgument(f"unknown filter {filter!r}")
    fx = u - 0.5
    fy = v - 0.5
    x0 = np.floor(fx)
    y0 = np.floor(fy)
    wx = (fx - x0)[..., None]
    wy = (fy - y0)[..., None]
    x0i = np.clip(x0, 0, w - 1).astype(np.intp)
    x1i = np.clip(x0 + 1, 0, w - 1).astype(np.intp)
    y0i = np.clip(y0, 0, h - 1).astype(np.intp)
    y1i = np.clip(y0 + 1, 0, h - 1).astype(np.intp)
    s = src.astype(np.float64)
    top = s[y0i, x0i] * (1 - wx) + s[y0i, x1i] * wx
    bot = s[y1i, x0i] * (1 - wx) + s[y1i, x1i] * wx
    out = top * (1 - wy) + bot * wy
    out[~inside] = fill_arr
    return to_uint8(out)


def _check_filter(filter: str):
    if filter not in ("nearest", "bilinear"):
        raise InvalidArgument(f"unknown filter {filter!r}")


def resize(img: PixelBuffer, w: int, h: int, filter: Filter = "bilinear") -> PixelBuffer:
    if w < 1 or h < 1:
        raise InvalidArgument(f"target size must be positive, got {w}x{h}")
    _check_filter(filter)
    if (w, h) == img.dims:
        return img
    sx = img.width / w
    sy = img.height / h
    u = (np.arange(w) + 0.5) * sx
    v = (np.arange(h) + 0.5) * sy
    uu, vv = np.meshgrid(u, v)
    return PixelBuffer(_sample(img.data, uu, vv, filter, 0))


def warp_affine(
    img: PixelBuffer,
    m: AffineMatrix,
    filter: Filter = "bilinear",
    fill=0,
    size: tuple[int, int] | None = None,
) -> PixelBuffer:
    """Warp through an output-to-input affine map.

    ``size`` (width, height) defaults to the input dimensions.
    """
    _check_filter(filter)
    ow, oh = size or img.dims
    x, y = _pixel_centers(ow, oh)
    u = m.a * x + m.b * y + m.tx
    v = m.c * x + m.d * y + m.ty
    return PixelBuffer(_sample(img.data, u, v, filter, fill))


def warp_perspective(
    img: PixelBuffer,
    h: Homography,
    filter: Filter = "bilinear",
    fill=0,
    size: tuple[int, int] | None = None,
) -> PixelBuffer:
    _check_filter(filter)
    ow, oh = size or img.dims
    x, y = _pixel_centers(ow, oh)
    (h11, h12, h13, h21, h22, h23, h31, h32, h33) = h.h
    wz = h31 * x + h32 * y + h33
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (h11 * x + h12 * y + h13) / wz
        v = (h21 * x + h22 * y + h23) / wz
    # points behind the projective horizon map nowhere
    bad = ~(wz > 0)
    u = np.where(bad, -1.0, u)
    v = np.where(bad, -1.0, v)
    return PixelBuffer(_sample(img.data, u, v, filter, fill))


def flip(img: PixelBuffer, axis: Literal["horizontal", "vertical"] = "horizontal") -> PixelBuffer:
    if axis == "horizontal":
        return PixelBuffer(img.data[:, ::-1])
    if axis == "vertical":
        return PixelBuffer(img.data[::-1])
    raise InvalidArgument(f"unknown flip axis {axis!r}")


def split_alpha(img: PixelBuffer) -> tuple[PixelBuffer, PixelBuffer | None]:
    """Separate an RGBA buffer into (RGB, alpha); non-RGBA returns (img, None)."""
    if img.channels != 4:
        return img, None
    return PixelBuffer(img.data[:, :, :3]), PixelBuffer(img.data[:, :, 3:])


def merge_alpha(rgb: PixelBuffer, alpha: PixelBuffer) -> PixelBuffer:
    if rgb.dims != alpha.dims:
        raise InvalidArgument("rgb and alpha dims differ")
    return PixelBuffer(np.concatenate([rgb.data[:, :, :3], alpha.data[:, :, :1]], axis=2))


def binarize(img: PixelBuffer, threshold: int = 128) -> PixelBuffer:
    """Single-channel 0/255 buffer: 255 where the sample is >= threshold."""
    return PixelBuffer(np.where(img.data[:, :, :1] >= threshold, 255, 0).astype(np.uint8))
