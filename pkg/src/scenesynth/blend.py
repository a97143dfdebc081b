"""Hard-alpha copy-paste compositing of cutouts onto a background."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from scenesynth.imgcore import AffineMatrix, InvalidArgument, PixelBuffer, warp_affine
from scenesynth.seeding import rng

ALPHA_THRESHOLD = 128
MIN_ON_CANVAS = 0.5
MAX_PLACEMENT_ATTEMPTS = 100
SCALE_RANGE = (0.5, 1.2)


class PlacementRejected(ValueError):
    """Placement leaves less than half of the silhouette on the canvas."""


class GenerationError(RuntimeError):
    pass


def bleed_colors(rgba: np.ndarray) -> np.ndarray:
    """Copy the nearest opaque color into transparent pixels.

    Keeps bilinear resampling at silhouette edges from pulling in whatever
    color the transparent region happened to hold.
    """
    opaque = rgba[:, :, 3] >= ALPHA_THRESHOLD
    if opaque.all() or not opaque.any():
        return rgba
    _, (iy, ix) = ndimage.distance_transform_edt(~opaque, return_indices=True)
    out = rgba.copy()
    out[:, :, :3] = rgba[iy, ix, :3]
    return out


@dataclass(frozen=True, eq=False)
class ForegroundCutout:
    """RGBA cutout whose alpha is the instrument silhouette.

    Alpha is binarized at 128 on construction.
    """

    image: PixelBuffer
    class_id: int
    source_asset: str = ""

    def __post_init__(self):
        if self.image.channels != 4:
            raise InvalidArgument(f"cutout {self.source_asset!r} must be RGBA")
        if self.class_id < 1:
            raise InvalidArgument("class_id must be >= 1")
        data = self.image.data.copy()
        data[:, :, 3] = np.where(data[:, :, 3] >= ALPHA_THRESHOLD, 255, 0)
        if not data[:, :, 3].any():
            raise InvalidArgument(f"cutout {self.source_asset!r} has an empty silhouette")
        object.__setattr__(self, "image", PixelBuffer(data))

    @property
    def alpha(self) -> np.ndarray:
        return self.image.data[:, :, 3] == 255

    @property
    def dims(self) -> tuple[int, int]:
        return self.image.dims


@dataclass(frozen=True)
class Placement:
    """Similarity transform of a cutout onto the canvas.

    ``tx``/``ty`` offset the cutout center from the canvas center; rotation
    is in degrees, counter-clockwise on screen.
    """

    tx: float = 0.0
    ty: float = 0.0
    scale: float = 1.0
    rotation: float = 0.0
    z_order: int = 0

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidArgument("placement scale must be positive")

    def to_dict(self) -> dict:
        return {
            "tx": self.tx,
            "ty": self.ty,
            "scale": self.scale,
            "rotation": self.rotation,
            "z_order": self.z_order,
        }

    @classmethod
    def from_dict(cls, d) -> "Placement":
        return cls(d["tx"], d["ty"], d["scale"], d["rotation"], d["z_order"])


@dataclass(frozen=True, eq=False)
class Scene:
    image: PixelBuffer
    mask: PixelBuffer
    classes_present: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.image.channels != 3 or self.mask.channels != 1:
            raise InvalidArgument("scene needs an RGB image and a 1-channel mask")
        if self.image.dims != self.mask.dims:
            raise InvalidArgument("scene image and mask dims differ")
        present = frozenset(int(v) for v in np.unique(self.mask.data) if v)
        if not present:
            raise InvalidArgument("scene has no foreground pixels")
        if self.classes_present and frozenset(self.classes_present) != present:
            raise InvalidArgument(
                f"classes_present {sorted(self.classes_present)} != mask ids {sorted(present)}"
            )
        object.__setattr__(self, "classes_present", present)


def placement_forward(pl: Placement, cutout_dims, canvas_dims) -> np.ndarray:
    """3x3 map from cutout coordinates to canvas coordinates."""
    cw, ch = cutout_dims
    W, H = canvas_dims
    th = math.radians(pl.rotation)
    c, s = math.cos(th), math.sin(th)
    # y points down, so a positive angle turns counter-clockwise on screen
    lin = pl.scale * np.array([[c, s], [-s, c]])
    m = np.eye(3)
    m[:2, :2] = lin
    m[:2, 2] = np.array([W / 2 + pl.tx, H / 2 + pl.ty]) - lin @ np.array([cw / 2, ch / 2])
    return m


def on_canvas_fraction(cutout: ForegroundCutout, pl: Placement, canvas_dims) -> float:
    """Fraction of alpha-positive pixel centers that land inside the canvas."""
    ys, xs = np.nonzero(cutout.alpha)
    m = placement_forward(pl, cutout.dims, canvas_dims)
    u = m[0, 0] * (xs + 0.5) + m[0, 1] * (ys + 0.5) + m[0, 2]
    v = m[1, 0] * (xs + 0.5) + m[1, 1] * (ys + 0.5) + m[1, 2]
    W, H = canvas_dims
    inside = (u >= 0) & (u < W) & (v >= 0) & (v < H)
    return float(inside.mean())


def place_cutout(cutout: ForegroundCutout, pl: Placement, canvas_dims) -> tuple[np.ndarray, np.ndarray]:
    """Render a cutout on an empty canvas.

    Returns ``(rgb, opaque)``: the resampled colors (H, W, 3) and the boolean
    layer where the resampled alpha binarizes to 255.
    """
    W, H = canvas_dims
    rgb = np.zeros((H, W, 3), dtype=np.uint8)
    opaque = np.zeros((H, W), dtype=bool)
    fwd = placement_forward(pl, cutout.dims, canvas_dims)
    cw, ch = cutout.dims
    corners = fwd @ np.array([[0, cw, cw, 0], [0, 0, ch, ch], [1, 1, 1, 1]], dtype=np.float64)
    # only the window covering the transformed cutout needs resampling
    x0 = max(0, int(np.floor(corners[0].min())) - 1)
    y0 = max(0, int(np.floor(corners[1].min())) - 1)
    x1 = min(W, int(np.ceil(corners[0].max())) + 1)
    y1 = min(H, int(np.ceil(corners[1].max())) + 1)
    if x1 <= x0 or y1 <= y0:
        return rgb, opaque
    shift = np.eye(3)
    shift[:2, 2] = [x0, y0]
    inv = AffineMatrix.from_array(np.linalg.inv(fwd) @ shift)
    warped = warp_affine(cutout.image, inv, "bilinear", fill=0, size=(x1 - x0, y1 - y0)).data
    rgb[y0:y1, x0:x1] = warped[:, :, :3]
    opaque[y0:y1, x0:x1] = warped[:, :, 3] >= ALPHA_THRESHOLD
    return rgb, opaque


def _check_placement(bg: PixelBuffer, fg: ForegroundCutout, pl: Placement):
    frac = on_canvas_fraction(fg, pl, bg.dims)
    if frac < MIN_ON_CANVAS:
        raise PlacementRejected(f"only {frac:.1%} of the silhouette lies on the canvas")


def _composite(bg: PixelBuffer, layers) -> Scene:
    if bg.channels != 3:
        raise InvalidArgument("background must be RGB")
    image = bg.data.copy()
    mask = np.zeros(image.shape[:2], dtype=np.uint8)
    for fg, pl in sorted(layers, key=lambda item: item[1].z_order):
        rgb, opaque = place_cutout(fg, pl, bg.dims)
        image[opaque] = rgb[opaque]
        mask[opaque] = fg.class_id
    if not mask.any():
        raise PlacementRejected("no silhouette pixel survived resampling")
    return Scene(PixelBuffer(image), PixelBuffer(mask))


def blend_one(bg: PixelBuffer, fg: ForegroundCutout, pl: Placement) -> Scene:
    """Paste one cutout; pixels under the binarized alpha come from the cutout."""
    _check_placement(bg, fg, pl)
    return _composite(bg, [(fg, pl)])


def blend_two(bg: PixelBuffer, fgs, pls) -> Scene:
    """Paste two cutouts of distinct classes; higher ``z_order`` wins overlaps."""
    fgs, pls = list(fgs), list(pls)
    if len(fgs) != 2 or len(pls) != 2:
        raise InvalidArgument("blend_two takes exactly two cutouts and two placements")
    if fgs[0].class_id == fgs[1].class_id:
        raise InvalidArgument("the two cutouts must have distinct class ids")
    for fg, pl in zip(fgs, pls):
        _check_placement(bg, fg, pl)
    return _composite(bg, list(zip(fgs, pls)))


def sample_placement(
    rng_seed: int,
    canvas,
    cutout: ForegroundCutout,
    z_order: int = 0,
    scale_range: tuple[float, float] = SCALE_RANGE,
) -> Placement:
    """Random scale, rotation and position keeping >= 50% of the silhouette on canvas."""
    W, H = canvas
    if W < 1 or H < 1:
        raise InvalidArgument("canvas must be nonempty")
    cw, ch = cutout.dims
    fit = min(W / cw, H / ch)
    gen = rng(rng_seed)
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        pl = Placement(
            tx=float(gen.uniform(-W / 2, W / 2)),
            ty=float(gen.uniform(-H / 2, H / 2)),
            scale=float(gen.uniform(*scale_range) * fit),
            rotation=float(gen.uniform(-180.0, 180.0)),
            z_order=z_order,
        )
        if on_canvas_fraction(cutout, pl, canvas) >= MIN_ON_CANVAS:
            return pl
    raise GenerationError(
        f"no valid placement for {cutout.source_asset!r} after {MAX_PLACEMENT_ATTEMPTS} attempts"
    )
