import os

import pytest

from scenesynth.config import DEFAULTS, ConfigError, EngineConfig


def test_defaults():
    cfg = EngineConfig.load(None)
    rc = cfg.recipe()
    assert rc.name == "A" and rc.total == 4000 and rc.resolution == (224, 224)
    assert rc.pool.p == 200 and rc.pool.q_per_seed == 25
    assert not rc.augmix.enabled


def test_overrides_win(demo_config):
    cfg = EngineConfig.load(demo_config, {"recipe": "C", "total": 80, "pool": {"p": 7}, "augmix": {"op_set": "hard"}})
    rc = cfg.recipe()
    assert (rc.n_single, rc.n_double, rc.pool.p, rc.pool.q_per_seed) == (64, 16, 7, 25)
    assert rc.augmix.op_set == "hard"


def test_relative_paths(demo_config):
    cfg = EngineConfig.load(demo_config)
    assert os.path.isfile(cfg.background_path())
    assert all(os.path.isfile(s) for e in cfg.registry().entries for s in e.seeds)


def test_unknown_keys(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("pool: {p: 3, r: 4}\n")
    with pytest.raises(ConfigError, match="r"):
        EngineConfig.load(str(p))
    with pytest.raises(ConfigError):
        EngineConfig.load(None, {"nope": 1})


def test_bad_values(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        EngineConfig.load(str(p))
    with pytest.raises(ConfigError):
        EngineConfig.load(None, {"two_instrument_fraction": "lots"})
    with pytest.raises(ConfigError):
        EngineConfig.load(str(tmp_path / "missing.yaml"))
    with pytest.raises(ConfigError):
        EngineConfig.load(None).registry()


def test_echo_excludes_runtime_keys(demo_config):
    echo = EngineConfig.load(demo_config, {"out": "x", "workers": 3}).echo()
    assert "out" not in echo and "workers" not in echo
    assert set(echo) == set(DEFAULTS) - {"out", "workers", "timestamp"}
