from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenesynth import composer
from scenesynth.augmix import MixConfig
from scenesynth.composer import (
    AssetError,
    ClassRegistry,
    Generator,
    PoolSpec,
    SceneRecord,
    class_schedule,
    extend_registry,
    generate,
    recipe,
    replay,
)
from scenesynth.imgcore import InvalidArgument, PixelBuffer


class TestRecipes:
    @pytest.mark.parametrize(
        "name,single,double,spc",
        [("A", 4000, 0, 2), ("B", 4000, 2000, 2), ("C", 6400, 1600, 3)],
    )
    def test_full_size(self, name, single, double, spc):
        r = recipe(name)
        assert (r.n_single, r.n_double, r.seeds_per_class) == (single, double, spc)

    @pytest.mark.parametrize("name,total,single,double", [("A", 40, 40, 0), ("B", 60, 40, 20), ("C", 80, 64, 16)])
    def test_scaled(self, name, total, single, double):
        r = recipe(name, total=total)
        assert (r.n_single, r.n_double) == (single, double)

    def test_fraction_strings(self):
        assert recipe("custom", total=10, two_instrument_fraction=0.25).n_double == 3
        assert recipe("custom", total=9, two_instrument_fraction=Fraction(1, 3)).n_double == 3

    def test_bad_recipe(self):
        with pytest.raises(InvalidArgument):
            recipe("Z")
        with pytest.raises(InvalidArgument):
            recipe("A", total=0)
        with pytest.raises(InvalidArgument):
            recipe("custom", two_instrument_fraction=1.5)


class TestSchedule:
    @settings(max_examples=80)
    @given(st.integers(2, 10), st.integers(0, 60), st.integers(0, 60))
    def test_balance_every_prefix(self, k, n1, n2):
        ids = list(range(1, k + 1))
        sched = class_schedule(ids, n1, n2)
        assert len(sched) == n1 + n2
        assert all(len(s) == 1 for s in sched[:n1])
        assert all(len(s) == 2 and s[0] != s[1] for s in sched[n1:])
        count = Counter()
        for i, s in enumerate(sched):
            count.update(s)
            if i + 1 == n1 or i >= n1:
                vals = [count[c] for c in ids]
                assert max(vals) - min(vals) <= 1

    def test_b_prefix_is_a(self):
        ids = list(range(1, 9))
        a = class_schedule(ids, 4000, 0)
        b = class_schedule(ids, 4000, 2000)
        assert b[:4000] == a

    def test_single_class_doubles(self):
        with pytest.raises(InvalidArgument):
            class_schedule([1], 0, 1)


class TestRegistry:
    def test_contiguous(self):
        r = ClassRegistry.from_seeds([("a", ["x"]), ("b", ["y"])])
        assert r.ids == [1, 2]
        assert r[2].name == "b"
        with pytest.raises(InvalidArgument):
            ClassRegistry.from_seeds([("a", ["x"]), ("a", ["y"])])
        with pytest.raises(InvalidArgument):
            ClassRegistry.from_seeds([("a", [])])

    def test_default_names(self):
        r = ClassRegistry.default([["s"]] * 8)
        assert [e.name for e in r.entries] == list(composer.DEFAULT_CLASSES)

    def test_extend(self):
        r = ClassRegistry.default([["s"]] * 8)
        r2 = extend_registry(r, [("Vessel Sealer", ["v"]), ("Suction Irrigator", ["c"])])
        assert r2.ids == list(range(1, 11))
        assert r2[9].name == "Vessel Sealer"
        assert r.ids == list(range(1, 9))
        with pytest.raises(InvalidArgument):
            extend_registry(r, [(r[1].name, ["z"])])
        assert extend_registry(r, []) == r


class TestPools:
    def test_sizes(self, make_pools):
        pools = make_pools(p=5, q=10, seeds_per_class=2)
        assert pools.p == 5
        assert pools.q == 8 * 2 * 10

    def test_pure_function_of_index(self, make_pools):
        a = make_pools(q=3)
        b = make_pools(q=3)
        # different access order, same result
        va = a.foreground_variant(3, 1, 2)
        b.foreground_variant(1, 0, 0)
        b.background_variant(4)
        vb = b.foreground_variant(3, 1, 2)
        assert va.image.image == vb.image.image
        assert va.plan == vb.plan
        assert a.background_variant(7).image == b.background_variant(7).image

    def test_every_variant_nonempty(self, make_pools):
        pools = make_pools(p=4, q=3).materialize()
        for c in range(1, 9):
            for a in range(3):
                for v in range(3):
                    cut = pools.foreground_variant(c, a, v).image
                    assert cut.alpha.any()
                    assert cut.class_id == c

    def test_identity_pools(self, make_pools, background):
        pools = make_pools(p=2, q=1, bg_ops=(0, 0), fg_ops=(0, 0))
        assert len(pools.background_variant(0).plan) == 0
        assert pools.background_variant(0).image == composer.prepare_background(background, (96, 96))

    def test_index_errors(self, make_pools):
        pools = make_pools(p=2, q=1)
        with pytest.raises(IndexError):
            pools.background_variant(2)
        with pytest.raises(IndexError):
            pools.foreground_variant(1, 0, 1)

    def test_bad_spec(self):
        with pytest.raises(InvalidArgument):
            PoolSpec(p=0)
        with pytest.raises(InvalidArgument):
            PoolSpec(bg_ops=(0, 2))


class TestAssets:
    def test_missing_file_named(self, tmp_path):
        path = str(tmp_path / "nope.png")
        with pytest.raises(AssetError, match="nope.png"):
            composer.load_rgba(path)

    def test_rgb_as_foreground(self, demo_engine):
        with pytest.raises(AssetError, match="alpha"):
            composer.load_rgba(demo_engine.background_path())

    def test_empty_alpha(self):
        with pytest.raises(AssetError):
            composer.prepare_cutout(PixelBuffer(np.zeros((4, 4, 4), np.uint8)), (8, 8), "blank")

    def test_cutout_fits_canvas(self):
        data = np.full((300, 100, 4), 255, np.uint8)
        out = composer.prepare_cutout(PixelBuffer(data), (64, 64))
        assert out.width <= 64 and out.height <= 64


class TestGenerate:
    def test_counts_and_classes(self, make_pools, registry):
        pools = make_pools()
        rc = recipe("C", total=20, resolution=(96, 96))
        out = list(generate(rc, registry, pools))
        assert [r.index for _, r in out] == list(range(20))
        sizes = Counter(len(s.classes_present) for s, _ in out)
        assert sizes == {1: 16, 2: 4}
        for s, r in out:
            assert set(r.classes) == set(s.classes_present)

    def test_index_order_independent(self, make_pools, registry):
        rc = recipe("B", total=9, resolution=(96, 96), augmix=MixConfig("soft"))
        fwd = {r.index: s for s, r in generate(rc, registry, make_pools())}
        rev = {r.index: s for s, r in generate(rc, registry, make_pools(), indices=range(8, -1, -1))}
        for i in range(9):
            assert fwd[i].image == rev[i].image and fwd[i].mask == rev[i].mask

    def test_replay(self, make_pools, registry):
        pools = make_pools()
        rc = recipe("C", total=10, resolution=(96, 96), augmix=MixConfig("hard"))
        for scene, rec in generate(rc, registry, pools):
            rec2 = SceneRecord.from_dict(rec.to_dict())
            again = replay(rec2, pools)
            assert again.image == scene.image and again.mask == scene.mask

    def test_b_prefix_matches_a(self, make_pools, registry):
        a = recipe("A", total=16, resolution=(96, 96))
        b = recipe("B", total=24, resolution=(96, 96))
        sa = [s for s, _ in generate(a, registry, make_pools())]
        sb = [s for s, _ in generate(b, registry, make_pools(), indices=range(16))]
        assert all(x.image == y.image and x.mask == y.mask for x, y in zip(sa, sb))

    def test_seed_changes_output(self, make_pools, registry):
        rc = recipe("A", total=2, resolution=(96, 96))
        s1 = next(generate(rc, registry, make_pools(seed=1)))[0]
        s2 = next(generate(rc, registry, make_pools(seed=2)))[0]
        assert s1.image != s2.image

    def test_restricted_classes(self, make_pools, registry):
        rc = recipe("B", total=12, resolution=(96, 96), classes=(2, 5))
        for s, _ in generate(rc, registry, make_pools()):
            assert s.classes_present <= {2, 5}
        with pytest.raises(InvalidArgument):
            Generator(recipe("A", total=2, classes=(42,)), registry, make_pools())

    def test_lower_instrument_visible(self, make_pools, registry):
        pools = make_pools()
        rc = recipe("B", total=30, resolution=(96, 96))
        for s, r in generate(rc, registry, pools, indices=range(20, 30)):
            assert len(s.classes_present) == 2
            lower = min(zip(r.fg_variants, r.placements), key=lambda kp: kp[1].z_order)
            _, opaque = composer.place_cutout(pools.foreground_variant(*lower[0]).image, lower[1], (96, 96))
            visible = (s.mask.data[..., 0] == lower[0][0]).sum()
            assert visible >= 0.5 * opaque.sum()
