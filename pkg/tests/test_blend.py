import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenesynth.blend import (
    ForegroundCutout,
    GenerationError,
    Placement,
    PlacementRejected,
    Scene,
    blend_one,
    blend_two,
    bleed_colors,
    on_canvas_fraction,
    place_cutout,
    placement_forward,
    sample_placement,
)
from scenesynth.imgcore import InvalidArgument, PixelBuffer

from conftest import disk_cutout


def bg(w=64, h=48, seed=0):
    return PixelBuffer(np.random.default_rng(seed).integers(0, 256, (h, w, 3)).astype(np.uint8))


def test_cutout_binarizes_alpha():
    data = np.zeros((4, 4, 4), np.uint8)
    data[..., 3] = [[0, 127, 128, 255]] * 4
    cut = ForegroundCutout(PixelBuffer(data), 2)
    assert set(np.unique(cut.image.data[..., 3])) == {0, 255}
    with pytest.raises(InvalidArgument):
        ForegroundCutout(PixelBuffer(np.zeros((3, 3, 4), np.uint8)), 1)
    with pytest.raises(InvalidArgument):
        ForegroundCutout(PixelBuffer(np.zeros((3, 3, 3), np.uint8)), 1)


def test_scene_checks():
    with pytest.raises(InvalidArgument):
        Scene(PixelBuffer.full(4, 4, 3), PixelBuffer.full(4, 4, 1, 0))
    with pytest.raises(InvalidArgument):
        Scene(PixelBuffer.full(4, 4, 3), PixelBuffer.full(5, 4, 1, 1))
    s = Scene(PixelBuffer.full(4, 4, 3), PixelBuffer.full(4, 4, 1, 3))
    assert s.classes_present == {3}


def test_identity_placement_copies_pixels():
    # a cutout the size of the canvas at scale 1 lands pixel for pixel
    data = np.random.default_rng(1).integers(0, 256, (8, 10, 4)).astype(np.uint8)
    data[..., 3] = 0
    data[2:6, 3:7, 3] = 255
    cut = ForegroundCutout(PixelBuffer(data), 4)
    back = bg(10, 8)
    scene = blend_one(back, cut, Placement())
    inside = cut.alpha
    assert np.array_equal(scene.image.data[inside], data[..., :3][inside])
    assert np.array_equal(scene.image.data[~inside], back.data[~inside])
    assert np.array_equal(scene.mask.data[..., 0] == 4, inside)


def test_provenance_exhaustive():
    back = bg()
    for k in range(30):
        cut = disk_cutout(size=21, radius=7 + k % 3, color=(k, 255 - k, 77), class_id=1 + k % 5)
        pl = sample_placement(k, back.dims, cut)
        scene = blend_one(back, cut, pl)
        rgb, opaque = place_cutout(cut, pl, back.dims)
        img, mask = scene.image.data, scene.mask.data[..., 0]
        assert np.array_equal(mask > 0, opaque)
        assert np.array_equal(img[opaque], rgb[opaque])
        assert np.array_equal(img[~opaque], back.data[~opaque])


def test_two_cutouts_top_wins():
    back = bg()
    a = disk_cutout(class_id=1, color=(255, 0, 0))
    b = disk_cutout(class_id=2, color=(0, 0, 255))
    pa, pb = Placement(z_order=0), Placement(tx=4, z_order=1)
    scene = blend_two(back, [a, b], [pa, pb])
    _, oa = place_cutout(a, pa, back.dims)
    rgb_b, ob = place_cutout(b, pb, back.dims)
    mask = scene.mask.data[..., 0]
    assert (mask[ob] == 2).all()
    assert (mask[oa & ~ob] == 1).all()
    assert np.array_equal(scene.image.data[ob], rgb_b[ob])
    # order of arguments does not matter, only z_order
    again = blend_two(back, [b, a], [pb, pa])
    assert again.image == scene.image and again.mask == scene.mask


def test_blend_two_rejects_same_class():
    a = disk_cutout(class_id=1)
    with pytest.raises(InvalidArgument):
        blend_two(bg(), [a, a], [Placement(), Placement(z_order=1)])


def test_off_canvas_rejected():
    cut = disk_cutout()
    with pytest.raises(PlacementRejected):
        blend_one(bg(), cut, Placement(tx=60))


def test_on_canvas_fraction_oracle():
    cut = disk_cutout(size=20, radius=9)
    rng = np.random.default_rng(2)
    ys, xs = np.nonzero(cut.alpha)
    for _ in range(200):
        pl = Placement(rng.uniform(-40, 40), rng.uniform(-30, 30), rng.uniform(0.5, 2), rng.uniform(-180, 180))
        m = placement_forward(pl, cut.dims, (64, 48))
        inside = 0
        for y, x in zip(ys, xs):
            u, v, _ = m @ np.array([x + 0.5, y + 0.5, 1.0])
            inside += 0 <= u < 64 and 0 <= v < 48
        assert on_canvas_fraction(cut, pl, (64, 48)) == pytest.approx(inside / len(ys))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**63))
def test_sampled_placement_valid(seed):
    cut = disk_cutout(size=15, radius=6)
    pl = sample_placement(seed, (64, 48), cut, z_order=1)
    assert pl.z_order == 1
    assert on_canvas_fraction(cut, pl, (64, 48)) >= 0.5


def test_sample_placement_deterministic():
    cut = disk_cutout()
    assert sample_placement(3, (64, 48), cut) == sample_placement(3, (64, 48), cut)


def test_sample_placement_gives_up():
    # a silhouette that is one pixel in a corner of a huge transparent frame
    data = np.zeros((50, 50, 4), np.uint8)
    data[0, 0, 3] = 255
    cut = ForegroundCutout(PixelBuffer(data), 1)
    with pytest.raises(GenerationError):
        sample_placement(0, (4, 4), cut, scale_range=(20.0, 20.0))


def test_bleed_colors():
    data = np.zeros((3, 3, 4), np.uint8)
    data[1, 1] = [10, 20, 30, 255]
    out = bleed_colors(data)
    assert (out[..., :3] == [10, 20, 30]).all()
    assert np.array_equal(out[..., 3], data[..., 3])
