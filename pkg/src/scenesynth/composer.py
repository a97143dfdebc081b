"""Augmented pools and dataset recipes.

A dataset is built in two stages. The background pool holds ``p`` augmented
variants of the single background; the foreground pool holds ``q_per_seed``
jointly augmented (image + silhouette) variants of every cutout seed. Scenes
then draw from both pools and paste one or two cutouts.

Every pool variant and every scene is a pure function of
``(master_seed, index, config)``, so pools are materialized lazily and
scenes can be produced in any order or in parallel with identical bytes.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np
from PIL import Image

from scenesynth import seeding
from scenesynth.augmix import MixConfig, MixDraw, mix_apply, sample_mix
from scenesynth.augops import (
    AugPlan,
    apply_plan,
    catalog_background,
    catalog_foreground,
    sample_plan,
    with_overrides,
)
from scenesynth.blend import (
    ALPHA_THRESHOLD,
    MAX_PLACEMENT_ATTEMPTS,
    ForegroundCutout,
    GenerationError,
    Placement,
    PlacementRejected,
    Scene,
    blend_one,
    blend_two,
    bleed_colors,
    place_cutout,
    sample_placement,
)
from scenesynth.imgcore import InvalidArgument, PixelBuffer, resize

log = logging.getLogger(__name__)

DEFAULT_CLASSES = (
    "Maryland Bipolar Forceps",
    "Fenestrated Bipolar Forceps",
    "Prograsp Forceps",
    "Large Needle Driver",
    "Monopolar Curved Scissors",
    "Ultrasound Probe",
    "Clip Applier",
    "Suction Instrument",
)

DEFAULT_RESOLUTION = (224, 224)
FG_MAX_RETRIES = 10


class AssetError(ValueError):
    """A seed asset is missing or malformed."""


# --------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class ClassEntry:
    class_id: int
    name: str
    seeds: tuple[str, ...]


@dataclass(frozen=True)
class ClassRegistry:
    entries: tuple[ClassEntry, ...]

    def __post_init__(self):
        for expected, entry in enumerate(self.entries, start=1):
            if entry.class_id != expected:
                raise InvalidArgument("class ids must be contiguous from 1")
            if not entry.seeds:
                raise InvalidArgument(f"class {entry.name!r} has no seed assets")
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise InvalidArgument("class names must be unique")

    @classmethod
    def from_seeds(cls, classes: Sequence[tuple[str, Sequence[str]]]) -> "ClassRegistry":
        return cls(tuple(ClassEntry(i, name, tuple(seeds)) for i, (name, seeds) in enumerate(classes, 1)))

    @classmethod
    def default(cls, seeds: Sequence[Sequence[str]]) -> "ClassRegistry":
        """The eight-instrument registry, one seed list per class."""
        if len(seeds) != len(DEFAULT_CLASSES):
            raise InvalidArgument(f"default registry needs {len(DEFAULT_CLASSES)} seed lists")
        return cls.from_seeds(list(zip(DEFAULT_CLASSES, seeds)))

    @property
    def ids(self) -> list[int]:
        return [e.class_id for e in self.entries]

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, class_id: int) -> ClassEntry:
        return self.entries[class_id - 1]

    def to_dict(self) -> list[dict]:
        return [{"id": e.class_id, "name": e.name, "seeds": list(e.seeds)} for e in self.entries]


def extend_registry(registry: ClassRegistry, new_classes: Sequence[tuple[str, Sequence[str]]]) -> ClassRegistry:
    """Append novel classes after the existing ids."""
    existing = {e.name for e in registry.entries}
    entries = list(registry.entries)
    for name, seeds in new_classes:
        if name in existing:
            raise InvalidArgument(f"class {name!r} already registered")
        existing.add(name)
        entries.append(ClassEntry(len(entries) + 1, name, tuple(seeds)))
    return ClassRegistry(tuple(entries))


# --------------------------------------------------------------------------
# recipes


@dataclass(frozen=True)
class PoolSpec:
    p: int = 200
    q_per_seed: int = 25
    bg_ops: tuple[int, int] = (1, 4)
    fg_ops: tuple[int, int] = (1, 3)

    def __post_init__(self):
        if self.p < 1 or self.q_per_seed < 1:
            raise InvalidArgument("pool sizes must be >= 1")
        for lo, hi in (self.bg_ops, self.fg_ops):
            # (0, 0) means "no augmentation"
            if lo < 0 or hi < lo or (lo == 0 and hi != 0):
                raise InvalidArgument(f"invalid op count range {(lo, hi)}")

    def to_dict(self) -> dict:
        return {"p": self.p, "q_per_seed": self.q_per_seed, "bg_ops": list(self.bg_ops), "fg_ops": list(self.fg_ops)}


RECIPES = {
    "A": dict(total=4000, two_instrument_fraction=Fraction(0), seeds_per_class=2),
    # 4000 singles + 2000 doubles
    "B": dict(total=6000, two_instrument_fraction=Fraction(1, 3), seeds_per_class=2),
    "C": dict(total=8000, two_instrument_fraction=Fraction(1, 5), seeds_per_class=3),
}


@dataclass(frozen=True)
class RecipeConfig:
    name: str = "custom"
    total: int = 4000
    two_instrument_fraction: Fraction = Fraction(0)
    seeds_per_class: int = 2
    pool: PoolSpec = field(default_factory=PoolSpec)
    augmix: MixConfig = field(default_factory=MixConfig)
    master_seed: int = 0
    resolution: tuple[int, int] = DEFAULT_RESOLUTION
    classes: tuple[int, ...] | None = None
    ranges: dict | None = None

    def __post_init__(self):
        frac = Fraction(str(self.two_instrument_fraction)) if isinstance(self.two_instrument_fraction, float) else Fraction(self.two_instrument_fraction)
        object.__setattr__(self, "two_instrument_fraction", frac)
        if self.total < 1:
            raise InvalidArgument("total must be >= 1")
        if not 0 <= frac <= 1:
            raise InvalidArgument("two_instrument_fraction must lie in [0, 1]")
        if self.seeds_per_class < 1:
            raise InvalidArgument("seeds_per_class must be >= 1")
        if min(self.resolution) < 1:
            raise InvalidArgument("resolution must be positive")

    @property
    def n_double(self) -> int:
        # exact half-up rounding of total * fraction
        return math.floor(self.total * self.two_instrument_fraction + Fraction(1, 2))

    @property
    def n_single(self) -> int:
        return self.total - self.n_double

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "total": self.total,
            "two_instrument_fraction": str(self.two_instrument_fraction),
            "single": self.n_single,
            "double": self.n_double,
            "seeds_per_class": self.seeds_per_class,
            "pool": self.pool.to_dict(),
            "augmix": self.augmix.to_dict(),
            "master_seed": self.master_seed,
            "resolution": list(self.resolution),
            "classes": list(self.classes) if self.classes else None,
            "ranges": self.ranges,
        }


def recipe(name: str, **overrides) -> RecipeConfig:
    """Recipe ``A``, ``B`` or ``C`` (or ``custom``) with optional overrides.

    Overriding ``total`` keeps the recipe's single/double proportion.
    """
    key = name.upper() if name.lower() != "custom" else "custom"
    base = dict(RECIPES.get(key, {}))
    if key != "custom" and key not in RECIPES:
        raise InvalidArgument(f"unknown recipe {name!r}")
    base.update({k: v for k, v in overrides.items() if v is not None})
    return RecipeConfig(name=key, **base)


def class_schedule(class_ids: Sequence[int], n_single: int, n_double: int) -> list[tuple[int, ...]]:
    """Class assignment for every scene index, singles first.

    Singles cycle round-robin. Doubles greedily take the two least-used
    classes (ties broken by least-used pair, then by id), which keeps every
    class within one of every other at any prefix.
    """
    ids = list(class_ids)
    if not ids:
        raise InvalidArgument("no classes to schedule")
    out: list[tuple[int, ...]] = [(ids[i % len(ids)],) for i in range(n_single)]
    if n_double:
        if len(ids) < 2:
            raise InvalidArgument("two-instrument scenes need at least two classes")
        count = {c: 0 for c in ids}
        for (c,) in out:
            count[c] += 1
        pair_uses: dict[tuple[int, int], int] = {}
        for _ in range(n_double):
            lo = min(count.values())
            low = [c for c in ids if count[c] == lo]
            cands = low if len(low) >= 2 else low + [c for c in ids if count[c] == lo + 1]
            best = None
            for i, a in enumerate(cands):
                for b in cands[i + 1 :]:
                    pair = (min(a, b), max(a, b))
                    if len(low) == 1 and low[0] not in pair:
                        continue
                    key = (pair_uses.get(pair, 0), pair)
                    if best is None or key < best[0]:
                        best = (key, pair)
            pair = best[1]
            pair_uses[pair] = pair_uses.get(pair, 0) + 1
            count[pair[0]] += 1
            count[pair[1]] += 1
            out.append(pair)
    return out


# --------------------------------------------------------------------------
# assets


def load_rgb(path: str) -> PixelBuffer:
    try:
        with Image.open(path) as im:
            if im.mode != "RGB":
                raise AssetError(f"background asset {path} must be RGB, got mode {im.mode}")
            return PixelBuffer(np.asarray(im, dtype=np.uint8))
    except (OSError, FileNotFoundError) as exc:
        raise AssetError(f"cannot read asset {path}: {exc}") from exc


def load_rgba(path: str) -> PixelBuffer:
    try:
        with Image.open(path) as im:
            if im.mode not in ("RGBA", "LA", "PA") and "transparency" not in im.info:
                raise AssetError(f"foreground asset {path} has no alpha channel (mode {im.mode})")
            return PixelBuffer(np.asarray(im.convert("RGBA"), dtype=np.uint8))
    except (OSError, FileNotFoundError) as exc:
        raise AssetError(f"cannot read asset {path}: {exc}") from exc


def prepare_background(img: PixelBuffer, resolution, asset_id: str = "background") -> PixelBuffer:
    if img.channels != 3:
        raise AssetError(f"background asset {asset_id} must have 3 channels")
    w, h = resolution
    return resize(img, w, h, "bilinear")


def prepare_cutout(img: PixelBuffer, resolution, asset_id: str = "") -> PixelBuffer:
    """Binarize alpha, crop to the silhouette and shrink to fit the canvas."""
    if img.channels != 4:
        raise AssetError(f"foreground asset {asset_id} must be RGBA")
    alpha = img.data[:, :, 3] >= ALPHA_THRESHOLD
    if not alpha.any():
        raise AssetError(f"foreground asset {asset_id} has an empty alpha silhouette")
    ys, xs = np.nonzero(alpha)
    data = img.data[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1].copy()
    data[:, :, 3] = np.where(data[:, :, 3] >= ALPHA_THRESHOLD, 255, 0)
    data = bleed_colors(data)
    h, w = data.shape[:2]
    ratio = min(1.0, resolution[0] / w, resolution[1] / h)
    if ratio < 1.0:
        nw, nh = max(1, round(w * ratio)), max(1, round(h * ratio))
        small = resize(PixelBuffer(data), nw, nh, "bilinear").data.copy()
        small[:, :, 3] = np.where(small[:, :, 3] >= ALPHA_THRESHOLD, 255, 0)
        if not small[:, :, 3].any():
            raise AssetError(f"foreground asset {asset_id} vanishes when fit to the canvas")
        data = small
    return PixelBuffer(data)


def _pad_square(rgba: np.ndarray) -> np.ndarray:
    """Pad to a square of side >= the diagonal so rotations don't clip."""
    h, w = rgba.shape[:2]
    side = int(math.ceil(math.hypot(w, h))) + 2
    out = np.zeros((side, side, 4), dtype=np.uint8)
    y0, x0 = (side - h) // 2, (side - w) // 2
    out[y0 : y0 + h, x0 : x0 + w] = rgba
    return bleed_colors(out)


def _crop_to_alpha(rgba: np.ndarray) -> np.ndarray | None:
    ys, xs = np.nonzero(rgba[:, :, 3])
    if len(ys) == 0:
        return None
    return rgba[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]


# --------------------------------------------------------------------------
# pools


@dataclass(frozen=True, eq=False)
class PoolVariant:
    image: PixelBuffer | ForegroundCutout
    plan: AugPlan


def _fg_key(class_id: int, asset: int, variant: int) -> int:
    return (class_id << 40) | (asset << 24) | variant


class Pools:
    """Background pool ``X_b`` and foreground pool ``X_f``, materialized on demand."""

    def __init__(
        self,
        registry: ClassRegistry,
        background: PixelBuffer,
        cutouts: dict[int, list[PixelBuffer]],
        spec: PoolSpec,
        master_seed: int,
        ranges: dict | None = None,
    ):
        self.registry = registry
        self.background = background
        self.cutouts = cutouts
        self.spec = spec
        self.master_seed = master_seed
        self.ranges = ranges
        self._bg_catalog = with_overrides(catalog_background(), ranges)
        self._fg_catalog = with_overrides(catalog_foreground(), ranges)
        self._bg: dict[int, PoolVariant] = {}
        self._fg: dict[tuple[int, int, int], PoolVariant] = {}

    @property
    def p(self) -> int:
        return self.spec.p

    @property
    def q(self) -> int:
        return sum(len(v) for v in self.cutouts.values()) * self.spec.q_per_seed

    def n_assets(self, class_id: int) -> int:
        return len(self.cutouts[class_id])

    def _plan(self, seed: int, catalog, count_range) -> AugPlan:
        if count_range == (0, 0):
            return AugPlan((), seed)
        return sample_plan(seed, catalog, count_range)

    def background_variant(self, j: int) -> PoolVariant:
        if not 0 <= j < self.spec.p:
            raise IndexError(j)
        if j not in self._bg:
            seed = seeding.derive(self.master_seed, "bg", j)
            plan = self._plan(seed, self._bg_catalog, self.spec.bg_ops)
            img, _ = apply_plan(plan, self.background)
            self._bg[j] = PoolVariant(img, plan)
        return self._bg[j]

    def foreground_variant(self, class_id: int, asset: int, v: int) -> PoolVariant:
        key = (class_id, asset, v)
        if not 0 <= v < self.spec.q_per_seed:
            raise IndexError(v)
        if key not in self._fg:
            self._fg[key] = self._make_fg(class_id, asset, v)
        return self._fg[key]

    def _make_fg(self, class_id: int, asset: int, v: int) -> PoolVariant:
        base = self.cutouts[class_id][asset]
        source = self.registry[class_id].seeds[asset]
        padded = PixelBuffer(_pad_square(base.data))
        mask = PixelBuffer(padded.data[:, :, 3:].copy())
        seed = seeding.derive(self.master_seed, "fg", _fg_key(class_id, asset, v))
        for _ in range(FG_MAX_RETRIES):
            plan = self._plan(seed, self._fg_catalog, self.spec.fg_ops)
            img, warped_mask = apply_plan(plan, padded, mask)
            rgba = img.data.copy()
            # the jointly warped silhouette is the label; alpha follows it exactly
            rgba[:, :, 3] = np.where(warped_mask.data[:, :, 0] >= ALPHA_THRESHOLD, 255, 0)
            cropped = _crop_to_alpha(rgba)
            if cropped is not None:
                cutout = ForegroundCutout(PixelBuffer(bleed_colors(cropped)), class_id, source)
                return PoolVariant(cutout, plan)
            seed = seeding.splitmix64(seed)
        raise GenerationError(f"augmentation emptied every variant of {source}")

    def materialize(self) -> "Pools":
        for j in range(self.spec.p):
            self.background_variant(j)
        for class_id, assets in self.cutouts.items():
            for a in range(len(assets)):
                for v in range(self.spec.q_per_seed):
                    self.foreground_variant(class_id, a, v)
        return self

    def __getstate__(self):
        state = self.__dict__.copy()
        # workers rebuild variants lazily; shipping caches only costs pickling time
        state["_bg"] = {}
        state["_fg"] = {}
        return state


def build_pools(
    registry: ClassRegistry,
    bg_asset: PixelBuffer,
    spec: PoolSpec,
    master_seed: int,
    cutouts: dict[int, list[PixelBuffer]] | None = None,
    resolution=DEFAULT_RESOLUTION,
    seeds_per_class: int | None = None,
    ranges: dict | None = None,
) -> Pools:
    """Ingest seed assets and return lazily materialized pools.

    ``cutouts`` maps class id to raw RGBA seed images; when omitted they are
    loaded from the registry's seed paths. Only the first ``seeds_per_class``
    seeds of each class are used.
    """
    background = prepare_background(bg_asset, resolution)
    if cutouts is None:
        cutouts = {e.class_id: [load_rgba(s) for s in e.seeds[:seeds_per_class]] for e in registry.entries}
    prepared = {}
    for entry in registry.entries:
        raws = list(cutouts.get(entry.class_id, []))[:seeds_per_class]
        if not raws:
            raise AssetError(f"class {entry.name!r} has no seed images")
        prepared[entry.class_id] = [
            prepare_cutout(raw, resolution, entry.seeds[k] if k < len(entry.seeds) else f"{entry.name}#{k}")
            for k, raw in enumerate(raws)
        ]
    return Pools(registry, background, prepared, spec, master_seed, ranges)


# --------------------------------------------------------------------------
# scenes


@dataclass(frozen=True)
class SceneRecord:
    index: int
    image_path: str
    mask_path: str
    classes: tuple[int, ...]
    bg_variant: int
    fg_variants: tuple[tuple[int, int, int], ...]
    placements: tuple[Placement, ...]
    plans: dict
    mix: MixDraw | None
    seed: int

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "image": self.image_path,
            "mask": self.mask_path,
            "classes": list(self.classes),
            "seed": self.seed,
            "bg_variant": self.bg_variant,
            "fg_variants": [{"class_id": c, "asset": a, "variant": v} for c, a, v in self.fg_variants],
            "placements": [p.to_dict() for p in self.placements],
            "plans": self.plans,
            "mix": self.mix.to_dict() if self.mix else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneRecord":
        return cls(
            index=int(d["index"]),
            image_path=d["image"],
            mask_path=d["mask"],
            classes=tuple(d["classes"]),
            bg_variant=int(d["bg_variant"]),
            fg_variants=tuple((f["class_id"], f["asset"], f["variant"]) for f in d["fg_variants"]),
            placements=tuple(Placement.from_dict(p) for p in d["placements"]),
            plans=d["plans"],
            mix=MixDraw.from_dict(d["mix"]) if d.get("mix") else None,
            seed=int(d["seed"]),
        )


def image_name(index: int) -> str:
    return f"{index:06d}.png"


def render(pools: Pools, bg_variant: int, fg_variants, placements, mix: MixDraw | None) -> Scene:
    """Compose a scene from explicit pool indices, placements and mix draw."""
    bg = pools.background_variant(bg_variant).image
    cutouts = [pools.foreground_variant(*key).image for key in fg_variants]
    if len(cutouts) == 1:
        scene = blend_one(bg, cutouts[0], placements[0])
    else:
        scene = blend_two(bg, cutouts, placements)
    if mix is not None:
        scene = Scene(mix_apply(scene.image, mix), scene.mask, scene.classes_present)
    return scene


def _lower_visible(pools, bg, keys, pls) -> bool:
    """Second-from-top cutout keeps at least half its placed pixels."""
    lower, upper = sorted(zip(keys, pls), key=lambda kp: kp[1].z_order)
    _, under = place_cutout(pools.foreground_variant(*lower[0]).image, lower[1], bg.dims)
    _, over = place_cutout(pools.foreground_variant(*upper[0]).image, upper[1], bg.dims)
    placed = under.sum()
    return placed > 0 and (under & ~over).sum() >= 0.5 * placed


class Generator:
    """Per-index scene synthesis for one recipe."""

    def __init__(self, recipe_cfg: RecipeConfig, registry: ClassRegistry, pools: Pools):
        self.recipe = recipe_cfg
        self.registry = registry
        self.pools = pools
        ids = list(recipe_cfg.classes) if recipe_cfg.classes else registry.ids
        unknown = set(ids) - set(registry.ids)
        if unknown:
            raise InvalidArgument(f"unknown class ids {sorted(unknown)}")
        self.schedule = class_schedule(ids, recipe_cfg.n_single, recipe_cfg.n_double)

    def scene(self, index: int) -> tuple[Scene, SceneRecord]:
        if not 0 <= index < self.recipe.total:
            raise IndexError(index)
        seed = seeding.derive(self.recipe.master_seed, "scene", index)
        gen = seeding.rng(seed)
        pools = self.pools
        classes = self.schedule[index]
        bg_variant = int(gen.integers(pools.p))
        bg = pools.background_variant(bg_variant).image
        keys = tuple(
            (c, int(gen.integers(pools.n_assets(c))), int(gen.integers(pools.spec.q_per_seed))) for c in classes
        )
        cutouts = [pools.foreground_variant(*k).image for k in keys]
        mix = None
        if self.recipe.augmix.enabled:
            mix = sample_mix(seeding.derive(self.recipe.master_seed, "mix", index), self.recipe.augmix)
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            try:
                pls = tuple(
                    sample_placement(seeding.child_seed(gen), bg.dims, cut, z_order=z)
                    for z, cut in enumerate(cutouts)
                )
            except GenerationError as exc:
                raise GenerationError(f"scene {index}: {exc}") from exc
            if len(keys) == 2 and not _lower_visible(pools, bg, keys, pls):
                continue
            try:
                scene = render(pools, bg_variant, keys, pls, mix)
            except PlacementRejected:
                continue
            break
        else:
            raise GenerationError(f"scene {index}: no valid placement after {MAX_PLACEMENT_ATTEMPTS} attempts")
        record = SceneRecord(
            index=index,
            image_path=f"images/{image_name(index)}",
            mask_path=f"masks/{image_name(index)}",
            classes=tuple(sorted(scene.classes_present)),
            bg_variant=bg_variant,
            fg_variants=keys,
            placements=pls,
            plans={
                "background": pools.background_variant(bg_variant).plan.to_dict(),
                "foreground": [pools.foreground_variant(*k).plan.to_dict() for k in keys],
            },
            mix=mix,
            seed=seed,
        )
        return scene, record


def replay(record: SceneRecord, pools: Pools) -> Scene:
    """Regenerate a scene from its manifest record."""
    return render(pools, record.bg_variant, record.fg_variants, record.placements, record.mix)


_WORKER: Generator | None = None


def _init_worker(gen: Generator):
    global _WORKER
    _WORKER = gen


def _work(index: int):
    return _WORKER.scene(index)


def generate(
    recipe_cfg: RecipeConfig,
    registry: ClassRegistry,
    pools: Pools,
    workers: int = 1,
    indices: Sequence[int] | None = None,
) -> Iterator[tuple[Scene, SceneRecord]]:
    """Yield ``(scene, record)`` in index order.

    With ``workers > 1`` scenes are computed in a process pool; the output is
    byte-identical to the sequential run.
    """
    gen = Generator(recipe_cfg, registry, pools)
    idx = list(range(recipe_cfg.total)) if indices is None else list(indices)
    if workers <= 1 or len(idx) < 2:
        for i in idx:
            yield gen.scene(i)
        return
    chunk = max(1, len(idx) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(gen,)) as ex:
        yield from ex.map(_work, idx, chunksize=chunk)


def default_workers() -> int:
    return os.cpu_count() or 1
