"""Engine configuration: YAML file + command-line overrides.

Example::

    assets:
      background: background.png
      classes:
        - name: Maryland Bipolar Forceps
          seeds: [fg/mbf_0.png, fg/mbf_1.png, fg/mbf_2.png]
    recipe: C
    total: 80
    master_seed: 7
    augmix: {op_set: hard, n_chains: 3}
    out: datasets/synthetic-c

Relative asset paths resolve against the config file's directory.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import yaml

from scenesynth.augmix import MixConfig
from scenesynth.composer import ClassRegistry, PoolSpec, RecipeConfig, recipe

ENV_CONFIG = "SCENESYNTH_CONFIG"


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "assets": None,
    "recipe": "A",
    "total": None,
    "two_instrument_fraction": None,
    "seeds_per_class": None,
    "resolution": [224, 224],
    "pool": {"p": 200, "q_per_seed": 25, "bg_ops": [1, 4], "fg_ops": [1, 3]},
    "augmix": {"op_set": "none", "n_chains": 3, "depth_choices": [1, 2, 3], "beta_alpha": 1.0, "dirichlet_alpha": 1.0},
    "master_seed": 0,
    "classes": None,
    "ranges": None,
    "out": "dataset",
    "workers": None,
    "timestamp": False,
    "prefix": None,
}

_NESTED = {
    "assets": {"background", "classes"},
    "pool": set(DEFAULTS["pool"]),
    "augmix": set(DEFAULTS["augmix"]),
}


def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if key not in base:
            raise ConfigError(f"unknown config key {key!r}")
        allowed = _NESTED.get(key)
        if allowed is not None and isinstance(value, dict):
            extra = set(value) - allowed
            if extra:
                raise ConfigError(f"unknown keys under {key!r}: {sorted(extra)}")
            merged = dict(out.get(key) or {})
            merged.update(value)
            out[key] = merged
        elif key == "augmix" and isinstance(value, str):
            out[key] = {**out[key], "op_set": value}
        else:
            out[key] = value
    return out


@dataclass
class EngineConfig:
    raw: dict
    base_dir: str

    @classmethod
    def load(cls, path: str | None = None, overrides: dict | None = None) -> "EngineConfig":
        """Read ``path`` (or ``$SCENESYNTH_CONFIG``) and apply overrides on top."""
        path = path or os.environ.get(ENV_CONFIG)
        data: dict = {}
        base_dir = os.getcwd()
        if path:
            try:
                with open(path, encoding="utf-8") as fh:
                    data = yaml.safe_load(fh) or {}
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            except yaml.YAMLError as exc:
                raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"config {path} must be a mapping")
            base_dir = os.path.dirname(os.path.abspath(path))
        raw = _merge(DEFAULTS, data)
        if overrides:
            raw = _merge(raw, {k: v for k, v in overrides.items() if v is not None})
        cfg = cls(raw, base_dir)
        cfg.recipe()  # validate eagerly
        return cfg

    def path(self, p: str) -> str:
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(self.base_dir, p))

    def registry(self) -> ClassRegistry:
        assets = self.raw.get("assets")
        if not assets or not assets.get("classes"):
            raise ConfigError("config has no assets.classes")
        try:
            return ClassRegistry.from_seeds(
                [(c["name"], [self.path(s) for s in c["seeds"]]) for c in assets["classes"]]
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed assets.classes entry: {exc}") from exc

    def background_path(self) -> str:
        assets = self.raw.get("assets") or {}
        if not assets.get("background"):
            raise ConfigError("config has no assets.background")
        return self.path(assets["background"])

    def recipe(self) -> RecipeConfig:
        r = self.raw
        try:
            pool = PoolSpec(
                p=int(r["pool"]["p"]),
                q_per_seed=int(r["pool"]["q_per_seed"]),
                bg_ops=tuple(r["pool"]["bg_ops"]),
                fg_ops=tuple(r["pool"]["fg_ops"]),
            )
            am = r["augmix"]
            mix = MixConfig(
                op_set=str(am["op_set"]),
                n_chains=int(am["n_chains"]),
                depth_choices=tuple(int(d) for d in am["depth_choices"]),
                beta_alpha=float(am["beta_alpha"]),
                dirichlet_alpha=float(am["dirichlet_alpha"]),
                ranges=r["ranges"],
            )
            frac = r["two_instrument_fraction"]
            return recipe(
                str(r["recipe"]),
                total=r["total"],
                two_instrument_fraction=Fraction(str(frac)) if frac is not None else None,
                seeds_per_class=r["seeds_per_class"],
                pool=pool,
                augmix=mix,
                master_seed=int(r["master_seed"]),
                resolution=tuple(int(x) for x in r["resolution"]),
                classes=tuple(int(c) for c in r["classes"]) if r["classes"] else None,
                ranges=r["ranges"],
            )
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    def echo(self) -> dict:
        """Effective configuration for the manifest header.

        Output location, worker count and the timestamp switch are left out:
        none of them affects a byte of the dataset.
        """
        return {k: copy.deepcopy(v) for k, v in self.raw.items() if k not in ("out", "workers", "timestamp")}
