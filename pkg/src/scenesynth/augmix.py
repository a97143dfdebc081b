"""Chained augmentation mixing.

The mixed image is ``m * x + (1 - m) * sum_i w_i * chain_i(x)`` with
``m ~ Beta(a, a)`` and ``w ~ Dirichlet(a, ..., a)``. Each chain applies one
to three photometric ops drawn from the Soft or Hard operator set, so the
label mask is never involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scenesynth.augops import (
    PHOTOMETRIC,
    AugPlan,
    apply_photometric,
    catalog_augmix,
    sample_op,
    with_overrides,
)
from scenesynth.imgcore import InvalidArgument, PixelBuffer, to_uint8
from scenesynth.seeding import child_seed, rng

OP_SETS = ("none", "soft", "hard")


@dataclass(frozen=True)
class MixConfig:
    op_set: str = "none"
    n_chains: int = 3
    depth_choices: tuple[int, ...] = (1, 2, 3)
    beta_alpha: float = 1.0
    dirichlet_alpha: float = 1.0
    ranges: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "op_set", self.op_set.lower())
        if self.op_set not in OP_SETS:
            raise InvalidArgument(f"augmix op set must be one of {OP_SETS}, got {self.op_set!r}")
        if self.n_chains < 1:
            raise InvalidArgument("n_chains must be >= 1")
        if not self.depth_choices or min(self.depth_choices) < 1:
            raise InvalidArgument("depth choices must be positive")
        if not (self.beta_alpha > 0 and self.dirichlet_alpha > 0):
            raise InvalidArgument("Beta and Dirichlet parameters must be positive")

    @property
    def enabled(self) -> bool:
        return self.op_set != "none"

    def to_dict(self) -> dict:
        return {
            "op_set": self.op_set,
            "n_chains": self.n_chains,
            "depth_choices": list(self.depth_choices),
            "beta_alpha": self.beta_alpha,
            "dirichlet_alpha": self.dirichlet_alpha,
        }


@dataclass(frozen=True)
class MixDraw:
    m: float
    weights: tuple[float, ...]
    chains: tuple[AugPlan, ...]

    def __post_init__(self):
        if not 0.0 <= self.m <= 1.0:
            raise InvalidArgument(f"m must lie in [0, 1], got {self.m}")
        if len(self.weights) != len(self.chains) or not self.chains:
            raise InvalidArgument("need one weight per chain")
        if min(self.weights) < 0 or abs(sum(self.weights) - 1.0) > 1e-9:
            raise InvalidArgument("chain weights must be nonnegative and sum to 1")
        for chain in self.chains:
            for op in chain.ops:
                if op.kind != PHOTOMETRIC:
                    raise InvalidArgument(f"chain op {op.name} is not photometric")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "weights": list(self.weights),
            "chains": [c.to_dict() for c in self.chains],
        }

    @classmethod
    def from_dict(cls, d) -> "MixDraw":
        return cls(float(d["m"]), tuple(d["weights"]), tuple(AugPlan.from_dict(c) for c in d["chains"]))


def sample_mix(rng_seed: int, cfg: MixConfig) -> MixDraw:
    if not cfg.enabled:
        raise InvalidArgument("augmix is disabled for op set 'none'; skip mixing instead")
    ops = with_overrides(catalog_augmix(cfg.op_set), cfg.ranges)
    gen = rng(rng_seed)
    m = float(gen.beta(cfg.beta_alpha, cfg.beta_alpha))
    weights = gen.dirichlet([cfg.dirichlet_alpha] * cfg.n_chains)
    # renormalize in float64 so the sum is 1 to rounding
    weights = tuple(float(w) for w in weights / weights.sum())
    chains = []
    for _ in range(cfg.n_chains):
        depth = cfg.depth_choices[int(gen.integers(len(cfg.depth_choices)))]
        chain_seed = child_seed(gen)
        picks = gen.integers(len(ops), size=depth)
        chains.append(AugPlan(tuple(sample_op(ops[int(i)], gen) for i in picks), chain_seed))
    return MixDraw(m, weights, tuple(chains))


def chain_outputs(scene_img: PixelBuffer, draw: MixDraw) -> list[PixelBuffer]:
    """The image after each chain (rounded to 8 bits after every op)."""
    outs = []
    for chain in draw.chains:
        img = scene_img
        for op in chain.ops:
            img = apply_photometric(op, img)
        outs.append(img)
    return outs


def mix_apply(scene_img: PixelBuffer, draw: MixDraw) -> PixelBuffer:
    if scene_img.channels != 3:
        raise InvalidArgument("augmix expects an RGB scene image")
    if draw.m == 1.0:
        return scene_img
    mixed = np.zeros(scene_img.data.shape, dtype=np.float64)
    for w, out in zip(draw.weights, chain_outputs(scene_img, draw)):
        mixed += w * out.data
    result = draw.m * scene_img.data + (1.0 - draw.m) * mixed
    return PixelBuffer(to_uint8(result))
