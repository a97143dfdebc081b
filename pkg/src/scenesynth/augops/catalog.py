"""Operator descriptors, parameter ranges and plan sampling."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from scenesynth.imgcore import InvalidArgument
from scenesynth.seeding import child_seed, rng

PHOTOMETRIC = "photometric"
GEOMETRIC = "geometric"
OCCLUSION = "occlusion"


@dataclass(frozen=True)
class ParamSpec:
    """Sampling range for one parameter.

    ``kind`` is ``"float"``, ``"int"`` (inclusive bounds) or ``"choice"``.
    """

    lo: float = 0.0
    hi: float = 0.0
    kind: str = "float"
    choices: tuple = ()

    def sample(self, gen: np.random.Generator):
        if self.kind == "choice":
            return self.choices[int(gen.integers(len(self.choices)))]
        if self.kind == "int":
            return int(gen.integers(int(self.lo), int(self.hi) + 1))
        return float(gen.uniform(self.lo, self.hi))

    def contains(self, value) -> bool:
        if self.kind == "choice":
            return value in self.choices
        return self.lo <= value <= self.hi

    def to_dict(self) -> dict:
        if self.kind == "choice":
            return {"choices": list(self.choices)}
        return {"range": [self.lo, self.hi], "kind": self.kind}


@dataclass(frozen=True)
class OpDescriptor:
    name: str
    kind: str
    params: Mapping[str, ParamSpec]
    identity: Mapping[str, Any]
    seeded: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "params": {k: v.to_dict() for k, v in self.params.items()},
        }


@dataclass(frozen=True)
class AugOpInstance:
    name: str
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        desc = DESCRIPTORS.get(self.name)
        if desc is not None and desc.kind != self.kind:
            raise InvalidArgument(f"{self.name} is {desc.kind}, not {self.kind}")

    @classmethod
    def make(cls, name: str, **params) -> "AugOpInstance":
        """Build an instance, filling unspecified params with identity values."""
        desc = DESCRIPTORS[name]
        full = dict(desc.identity)
        full.update(params)
        return cls(name, desc.kind, full)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "AugOpInstance":
        return cls(d["name"], d["kind"], dict(d["params"]))


@dataclass(frozen=True)
class AugPlan:
    ops: tuple[AugOpInstance, ...]
    seed: int

    def __len__(self):
        return len(self.ops)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "ops": [op.to_dict() for op in self.ops]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "AugPlan":
        return cls(tuple(AugOpInstance.from_dict(o) for o in d["ops"]), int(d["seed"]))


def _f(lo, hi):
    return ParamSpec(lo, hi, "float")


def _i(lo, hi):
    return ParamSpec(lo, hi, "int")


def _c(*choices):
    return ParamSpec(kind="choice", choices=tuple(choices))


_SEED = {"seed": 0}

# Ranges chosen to keep instruments recognizable; all overridable via config.
BACKGROUND_OPS: tuple[OpDescriptor, ...] = (
    OpDescriptor("LinearContrast", PHOTOMETRIC, {"gain": _f(0.6, 1.4)}, {"gain": 1.0}),
    OpDescriptor(
        "FrequencyNoiseAlpha",
        PHOTOMETRIC,
        {"scale": _f(4.0, 16.0), "gain": _f(0.5, 1.5)},
        {"scale": 8.0, "gain": 1.0, **_SEED},
        seeded=True,
    ),
    OpDescriptor(
        "AddToHueAndSaturation",
        PHOTOMETRIC,
        {"hue": _i(-18, 18), "saturation": _i(-36, 36)},
        {"hue": 0, "saturation": 0},
    ),
    OpDescriptor("Multiply", PHOTOMETRIC, {"factor": _f(0.7, 1.3)}, {"factor": 1.0}),
    OpDescriptor(
        "PerspectiveTransform",
        GEOMETRIC,
        {f"d{i}": _f(-0.1, 0.1) for i in range(8)},
        {f"d{i}": 0.0 for i in range(8)},
    ),
    OpDescriptor(
        "Cutout",
        OCCLUSION,
        {"count": _i(1, 3), "area": _f(0.02, 0.2)},
        {"count": 1, "area": 0.0, **_SEED},
        seeded=True,
    ),
    OpDescriptor(
        "Affine",
        GEOMETRIC,
        {
            "rotate": _f(-25.0, 25.0),
            "scale": _f(0.7, 1.3),
            "translate_x": _f(-0.1, 0.1),
            "translate_y": _f(-0.1, 0.1),
            "shear": _f(-8.0, 8.0),
        },
        {"rotate": 0.0, "scale": 1.0, "translate_x": 0.0, "translate_y": 0.0, "shear": 0.0},
    ),
    OpDescriptor(
        "Flip",
        GEOMETRIC,
        {"horizontal": _c(0, 1), "vertical": _c(0, 1)},
        {"horizontal": 0, "vertical": 0},
    ),
    OpDescriptor("Sharpen", PHOTOMETRIC, {"strength": _f(0.0, 1.0)}, {"strength": 0.0}),
    OpDescriptor("Emboss", PHOTOMETRIC, {"strength": _f(0.0, 1.0)}, {"strength": 0.0}),
    OpDescriptor(
        "SimplexNoiseAlpha",
        PHOTOMETRIC,
        {"scale": _f(16.0, 64.0), "offset": _f(-60.0, 60.0)},
        {"scale": 32.0, "offset": 0.0, **_SEED},
        seeded=True,
    ),
    OpDescriptor(
        "AdditiveGaussianNoise",
        PHOTOMETRIC,
        {"sigma": _f(0.0, 12.0)},
        {"sigma": 0.0, **_SEED},
        seeded=True,
    ),
    OpDescriptor(
        "CoarseDropout",
        OCCLUSION,
        {"fraction": _f(0.02, 0.2), "block": _i(4, 16)},
        {"fraction": 0.0, "block": 8, **_SEED},
        seeded=True,
    ),
    OpDescriptor("GaussianBlur", PHOTOMETRIC, {"sigma": _f(0.5, 3.0)}, {"sigma": 0.0}),
    OpDescriptor("MedianBlur", PHOTOMETRIC, {"kernel": _c(3, 5)}, {"kernel": 1}),
)

AUGMIX_SOFT_NAMES = ("autocontrast", "equalize", "posterize", "solarize")
AUGMIX_HARD_EXTRA = ("color", "contrast", "brightness", "sharpness")

AUGMIX_OPS: tuple[OpDescriptor, ...] = (
    OpDescriptor("autocontrast", PHOTOMETRIC, {}, {}),
    OpDescriptor("equalize", PHOTOMETRIC, {}, {}),
    OpDescriptor("posterize", PHOTOMETRIC, {"bits": _i(3, 7)}, {"bits": 8}),
    OpDescriptor("solarize", PHOTOMETRIC, {"threshold": _i(128, 256)}, {"threshold": 256}),
    OpDescriptor("color", PHOTOMETRIC, {"factor": _f(0.5, 1.5)}, {"factor": 1.0}),
    OpDescriptor("contrast", PHOTOMETRIC, {"factor": _f(0.5, 1.5)}, {"factor": 1.0}),
    OpDescriptor("brightness", PHOTOMETRIC, {"factor": _f(0.5, 1.5)}, {"factor": 1.0}),
    OpDescriptor("sharpness", PHOTOMETRIC, {"factor": _f(0.5, 1.5)}, {"factor": 1.0}),
)

DESCRIPTORS: dict[str, OpDescriptor] = {d.name: d for d in BACKGROUND_OPS + AUGMIX_OPS}


def catalog_background() -> list[OpDescriptor]:
    """The fifteen pool-building operators."""
    return list(BACKGROUND_OPS)


def catalog_foreground() -> list[OpDescriptor]:
    """Pool operators for cutouts: everything except occlusion."""
    return [d for d in BACKGROUND_OPS if d.kind != OCCLUSION]


def catalog_augmix(op_set: str) -> list[OpDescriptor]:
    op_set = op_set.lower()
    if op_set == "soft":
        names = AUGMIX_SOFT_NAMES
    elif op_set == "hard":
        names = AUGMIX_SOFT_NAMES + AUGMIX_HARD_EXTRA
    else:
        raise InvalidArgument(f"no AugMix operator set named {op_set!r}")
    return [DESCRIPTORS[n] for n in names]


def with_overrides(
    catalog: Sequence[OpDescriptor], overrides: Mapping[str, Mapping[str, Sequence]] | None
) -> list[OpDescriptor]:
    """Replace parameter ranges, e.g. ``{"GaussianBlur": {"sigma": [0.5, 2.0]}}``.

    Integer and float params take ``[lo, hi]``; choice params take a list of
    allowed values.
    """
    if not overrides:
        return list(catalog)
    unknown = set(overrides) - set(DESCRIPTORS)
    if unknown:
        raise InvalidArgument(f"unknown operators in range overrides: {sorted(unknown)}")
    out = []
    for desc in catalog:
        ov = overrides.get(desc.name)
        if not ov:
            out.append(desc)
            continue
        params = dict(desc.params)
        for pname, value in ov.items():
            if pname not in params:
                raise InvalidArgument(f"{desc.name} has no parameter {pname!r}")
            spec = params[pname]
            if spec.kind == "choice":
                if not value:
                    raise InvalidArgument(f"{desc.name}.{pname}: empty choice list")
                params[pname] = replace(spec, choices=tuple(value))
            else:
                lo, hi = value
                if lo > hi:
                    raise InvalidArgument(f"{desc.name}.{pname}: lo > hi")
                params[pname] = replace(spec, lo=lo, hi=hi)
        out.append(replace(desc, params=params))
    return out


def sample_op(desc: OpDescriptor, gen: np.random.Generator) -> AugOpInstance:
    params = {name: spec.sample(gen) for name, spec in desc.params.items()}
    if desc.name == "Flip" and not (params["horizontal"] or params["vertical"]):
        # a sampled Flip must actually flip something
        params["horizontal"] = 1
    if desc.seeded:
        params["seed"] = child_seed(gen)
    return AugOpInstance(desc.name, desc.kind, params)


def sample_plan(
    rng_seed: int, catalog: Sequence[OpDescriptor], count_range: tuple[int, int] = (1, 3)
) -> AugPlan:
    """Draw an op count uniformly from ``count_range`` then distinct ops in random order."""
    lo, hi = count_range
    if not catalog:
        raise InvalidArgument("cannot sample from an empty catalog")
    if lo < 1 or hi < lo:
        raise InvalidArgument(f"invalid count range {count_range}")
    gen = rng(rng_seed)
    count = int(gen.integers(lo, hi + 1))
    replace_ops = count > len(catalog)
    picks = gen.choice(len(catalog), size=count, replace=replace_ops)
    ops = tuple(sample_op(catalog[int(i)], gen) for i in picks)
    return AugPlan(ops, rng_seed)


def in_range(op: AugOpInstance, catalog: Sequence[OpDescriptor]) -> bool:
    desc = next((d for d in catalog if d.name == op.name), None)
    if desc is None or desc.kind != op.kind:
        return False
    return all(spec.contains(op.params[name]) for name, spec in desc.params.items())
